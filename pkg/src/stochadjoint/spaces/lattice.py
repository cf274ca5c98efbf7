"""
Recombining lattice of a single binary driver.

A process that depends on the path only through the number u of up moves so
far needs k + 1 states at level k instead of 2**k atoms. State u at level k has
driver value u * up + (k - u) * down and moves to u + 1 with probability p_up.

Drivers:
    wiener  - up = -down = sqrt(dt), p_up = 1/2
    poisson - one mark: up = 1 - q, down = -q, p_up = q = pi * dt
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy.stats import binom

from stochadjoint.core.errors import LevelError, ModelError, SpaceMismatchError
from stochadjoint.spaces.tree import MarkSet, Model, PathSample, TimeGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinaryLattice:
    """
    Attributes:
        n_steps: Grid resolution
        model: WIENER or POISSON
        p_up: Probability of an up move
        up: Driver increment of an up move
        down: Driver increment of a down move
        pi: Mark intensity, the pairing weight of a marked slot; 1 for the Wiener driver
    """

    n_steps: int
    model: Model
    p_up: float
    up: float
    down: float
    pi: float = 1.0

    @classmethod
    def wiener(cls, n_steps: int) -> BinaryLattice:
        step = math.sqrt(TimeGrid(n_steps).dt)
        return cls(n_steps, Model.WIENER, 0.5, step, -step)

    @classmethod
    def poisson(cls, n_steps: int, pi: float) -> BinaryLattice:
        """
        Raises:
            IntensityError: If pi * dt is not strictly inside (0, 1)
        """
        q = float(MarkSet.of([("y", pi)]).jump_probabilities(TimeGrid(n_steps).dt)[0])
        return cls(n_steps, Model.POISSON, q, 1.0 - q, -q, float(pi))

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps

    def _check_level(self, k: int) -> None:
        if not 0 <= k <= self.n_steps:
            raise LevelError(f"level {k} outside 0..{self.n_steps}")

    def probabilities(self, k: int) -> np.ndarray:
        self._check_level(k)
        return binom.pmf(np.arange(k + 1), k, self.p_up)

    def states(self, k: int) -> np.ndarray:
        """Driver value at every state of level k."""
        self._check_level(k)
        u = np.arange(k + 1)
        return u * self.up + (k - u) * self.down

    def expectation(self, values: np.ndarray, k: int) -> float:
        return float(self.probabilities(k) @ values)

    def step_expectation(self, values: np.ndarray) -> np.ndarray:
        """E[X | F_{t_k}] of a level-(k+1) array."""
        return self.p_up * values[1:] + (1.0 - self.p_up) * values[:-1]

    def slope(self, values: np.ndarray) -> np.ndarray:
        """One-step regression coefficient of a level-(k+1) array on the driver increment."""
        return (values[1:] - values[:-1]) / (self.up - self.down)

    def process(self, fn: Callable[[float, np.ndarray], np.ndarray]) -> List[np.ndarray]:
        """Levels 0..n-1 of chi(t_k) = fn(t_k, x_k), x_k the driver value."""
        return [
            np.asarray(fn(k * self.dt, self.states(k)), dtype=float) for k in range(self.n_steps)
        ]

    def path_states(self, sample: PathSample) -> np.ndarray:
        """
        State index at levels 0..n-1 along sampled paths, shape (n_paths, n_steps).

        Raises:
            SpaceMismatchError: If the sample was drawn from another resolution or driver
        """
        tree = sample.tree
        if tree.n_steps != self.n_steps or tree.model is not self.model:
            raise SpaceMismatchError(
                f"{tree!r} does not match the {self.model.value} lattice at n={self.n_steps}"
            )
        if self.model is Model.WIENER:
            moves = (sample.wiener_increments > 0).astype(np.int64)
        elif tree.n_marks == 1:
            moves = (sample.jump_flags[:, :, 0] > 0).astype(np.int64)
        else:
            raise ModelError(f"{tree!r}: a lattice follows a single mark")
        states = np.zeros(moves.shape, dtype=np.int64)
        np.cumsum(moves[:, :-1], axis=1, out=states[:, 1:])
        return states
