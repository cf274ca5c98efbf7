"""
Progressively measurable processes on a scenario tree, their norms and pairings.

A process holds one value per (k, atom) for k = 0..n-1; the value at index k is
the value on the cell [t_k, t_{k+1}) and is F_{t_k}-measurable by construction.
Integrator outputs additionally carry a terminal array at level n (the value at
t = 1). Norms and pairings use the indices 0..n-1 only.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from stochadjoint.core.errors import LevelError, ModelError, ParameterError
from stochadjoint.spaces.tree import (
    RandomVariable,
    ScenarioTree,
    _check_descriptor,
    space_descriptor,
)

logger = logging.getLogger(__name__)

Number = Union[int, float]


class Process:
    """
    Scalar adapted process f(t_k, atom).

    Attributes:
        tree: Probability space
        levels: levels[k] holds the b**k values at t_k, k = 0..n-1
        terminal: Optional values at t_n = 1 (level n)
    """

    __slots__ = ("_tree", "_levels", "_terminal")

    def __init__(
        self,
        tree: ScenarioTree,
        levels: Sequence[np.ndarray],
        terminal: Optional[np.ndarray] = None,
    ) -> None:
        if len(levels) != tree.n_steps:
            raise LevelError(f"a process needs {tree.n_steps} levels, got {len(levels)}")
        arrays = []
        for k, values in enumerate(levels):
            arrays.append(_level_array(tree, k, values, ()))
        self._tree = tree
        self._levels = tuple(arrays)
        self._terminal = None
        if terminal is not None:
            self._terminal = _level_array(tree, tree.n_steps, terminal, ())

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, tree: ScenarioTree) -> Process:
        return cls.constant(tree, 0.0)

    @classmethod
    def constant(cls, tree: ScenarioTree, value: float) -> Process:
        return cls(tree, [np.full(tree.level_size(k), float(value)) for k in range(tree.n_steps)])

    @classmethod
    def deterministic(cls, tree: ScenarioTree, values: Sequence[float]) -> Process:
        """f(t_k, w) = g(t_k): one value per time index."""
        if len(values) != tree.n_steps:
            raise LevelError(f"need {tree.n_steps} time values, got {len(values)}")
        return cls(tree, [np.full(tree.level_size(k), float(v)) for k, v in enumerate(values)])

    @classmethod
    def from_function(cls, tree: ScenarioTree, fn: Callable[[int], np.ndarray]) -> Process:
        """Build from a function returning the level-k array."""
        return cls(tree, [fn(k) for k in range(tree.n_steps)])

    @classmethod
    def random(cls, tree: ScenarioTree, rng: np.random.Generator, scale: float = 1.0) -> Process:
        return cls(
            tree, [scale * rng.standard_normal(tree.level_size(k)) for k in range(tree.n_steps)]
        )

    @classmethod
    def wiener(cls, tree: ScenarioTree) -> Process:
        """w(t_k) with the terminal value w(1)."""
        _require_wiener(tree)
        return cls(
            tree,
            [tree.wiener_path(k) for k in range(tree.n_steps)],
            terminal=tree.wiener_path(tree.n_steps),
        )

    @classmethod
    def compensated_count(cls, tree: ScenarioTree, mark: int = 0) -> Process:
        """N_i(t_k) - k q_i for mark i, with its terminal value."""
        if not tree.has_marks:
            raise ModelError(f"{tree!r} carries no marks")
        q = tree.branches.q[mark]

        def level(k: int) -> np.ndarray:
            return tree.jump_counts(k)[:, mark] - k * q

        return cls(tree, [level(k) for k in range(tree.n_steps)], terminal=level(tree.n_steps))

    @classmethod
    def from_vector(cls, tree: ScenarioTree, vector: np.ndarray) -> Process:
        """Inverse of `to_vector`."""
        vector = np.asarray(vector, dtype=float)
        sizes = [tree.level_size(k) for k in range(tree.n_steps)]
        if vector.shape != (sum(sizes),):
            raise LevelError(
                f"vector of shape {vector.shape} does not fit {sum(sizes)} process slots"
            )
        return cls(tree, np.split(vector, np.cumsum(sizes)[:-1]))

    # -- accessors ---------------------------------------------------------

    @property
    def tree(self) -> ScenarioTree:
        return self._tree

    @property
    def levels(self) -> tuple:
        return self._levels

    @property
    def terminal(self) -> Optional[np.ndarray]:
        return self._terminal

    @property
    def n_steps(self) -> int:
        return self._tree.n_steps

    def __getitem__(self, k: int) -> np.ndarray:
        """Level array at t_k; k = n returns the terminal array."""
        if k == self.n_steps:
            if self._terminal is None:
                raise LevelError("process has no terminal value")
            return self._terminal
        return self._levels[k]

    def at(self, k: int) -> RandomVariable:
        return RandomVariable(self._tree, k, self[k])

    def terminal_variable(self) -> RandomVariable:
        return self.at(self.n_steps)

    def with_terminal(self, terminal: Optional[np.ndarray]) -> Process:
        return Process(self._tree, self._levels, terminal)

    def to_vector(self) -> np.ndarray:
        """Levels 0..n-1 concatenated; aligned with `pairing_weights`."""
        return np.concatenate(self._levels)

    def means(self) -> np.ndarray:
        """E f(t_k) for k = 0..n-1."""
        return np.array([self._tree.expectation(v, k) for k, v in enumerate(self._levels)])

    def along(self, sample: Any) -> np.ndarray:
        """Values along sampled paths, shape (n_paths, n_steps)."""
        self._tree.require_same(sample.tree)
        return np.stack([v[sample.atoms(k)] for k, v in enumerate(self._levels)], axis=1)

    def max_abs_difference(self, other: Process) -> float:
        self._tree.require_same(other.tree)
        diffs = [np.max(np.abs(a - b)) for a, b in zip(self._levels, other.levels)]
        if self._terminal is not None and other.terminal is not None:
            diffs.append(np.max(np.abs(self._terminal - other.terminal)))
        return float(max(diffs))

    def allclose(self, other: Process, atol: float = 1e-12) -> bool:
        return self.max_abs_difference(other) <= atol

    # -- arithmetic --------------------------------------------------------

    def _combine(self, other: Union[Process, Number], op: Callable) -> Process:
        if isinstance(other, Process):
            self._tree.require_same(other.tree)
            terminal = None
            if self._terminal is not None and other.terminal is not None:
                terminal = op(self._terminal, other.terminal)
            levels = [op(a, b) for a, b in zip(self._levels, other.levels)]
            return Process(self._tree, levels, terminal)
        terminal = None if self._terminal is None else op(self._terminal, other)
        return Process(self._tree, [op(a, other) for a in self._levels], terminal)

    def __add__(self, other: Union[Process, Number]) -> Process:
        return self._combine(other, np.add)

    def __sub__(self, other: Union[Process, Number]) -> Process:
        return self._combine(other, np.subtract)

    def __mul__(self, other: Union[Process, Number]) -> Process:
        return self._combine(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self) -> Process:
        return self * -1.0

    def __repr__(self) -> str:
        return f"Process({self._tree!r}, terminal={self._terminal is not None})"

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "kind": "process",
            "space": space_descriptor(self._tree),
            "levels": [v.tolist() for v in self._levels],
        }
        if self._terminal is not None:
            data["terminal"] = self._terminal.tolist()
        return data

    @classmethod
    def from_dict(cls, tree: ScenarioTree, data: Dict[str, Any]) -> Process:
        _check_descriptor(tree, data)
        terminal = data.get("terminal")
        return cls(
            tree,
            [np.asarray(v, dtype=float) for v in data["levels"]],
            None if terminal is None else np.asarray(terminal, dtype=float),
        )

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns level, t, atom, value; terminal rows included."""
        rows = [_frame_rows(self._tree, k, v) for k, v in enumerate(self._levels)]
        if self._terminal is not None:
            rows.append(_frame_rows(self._tree, self.n_steps, self._terminal))
        return pd.concat(rows, ignore_index=True)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\r\n")
        logger.info(f"Wrote process table to {path}")


class MarkedProcess:
    """
    Mark-indexed adapted process a(t_k, atom, y_i).

    Attributes:
        tree: Probability space (must carry marks unless empty)
        levels: levels[k] has shape (b**k, m)
    """

    __slots__ = ("_tree", "_levels")

    def __init__(self, tree: ScenarioTree, levels: Sequence[np.ndarray]) -> None:
        if len(levels) != tree.n_steps:
            raise LevelError(f"a marked process needs {tree.n_steps} levels, got {len(levels)}")
        self._tree = tree
        self._levels = tuple(
            _level_array(tree, k, values, (tree.n_marks,)) for k, values in enumerate(levels)
        )

    @classmethod
    def zeros(cls, tree: ScenarioTree) -> MarkedProcess:
        return cls.constant(tree, 0.0)

    @classmethod
    def constant(cls, tree: ScenarioTree, value: float) -> MarkedProcess:
        return cls(
            tree,
            [
                np.full((tree.level_size(k), tree.n_marks), float(value))
                for k in range(tree.n_steps)
            ],
        )

    @classmethod
    def random(
        cls, tree: ScenarioTree, rng: np.random.Generator, scale: float = 1.0
    ) -> MarkedProcess:
        return cls(
            tree,
            [
                scale * rng.standard_normal((tree.level_size(k), tree.n_marks))
                for k in range(tree.n_steps)
            ],
        )

    @classmethod
    def from_vector(cls, tree: ScenarioTree, vector: np.ndarray) -> MarkedProcess:
        vector = np.asarray(vector, dtype=float)
        m = tree.n_marks
        sizes = [tree.level_size(k) * m for k in range(tree.n_steps)]
        if vector.shape != (sum(sizes),):
            raise LevelError(
                f"vector of shape {vector.shape} does not fit {sum(sizes)} marked slots"
            )
        parts = np.split(vector, np.cumsum(sizes)[:-1])
        return cls(tree, [p.reshape(-1, m) for p in parts])

    @property
    def tree(self) -> ScenarioTree:
        return self._tree

    @property
    def levels(self) -> tuple:
        return self._levels

    @property
    def n_steps(self) -> int:
        return self._tree.n_steps

    def __getitem__(self, k: int) -> np.ndarray:
        return self._levels[k]

    def mark(self, i: int) -> Process:
        """The scalar process of mark i."""
        return Process(self._tree, [v[:, i] for v in self._levels])

    def to_vector(self) -> np.ndarray:
        """Row-major (atom, mark) levels concatenated; aligned with `marked_pairing_weights`."""
        return np.concatenate([v.ravel() for v in self._levels])

    def max_abs_difference(self, other: MarkedProcess) -> float:
        self._tree.require_same(other.tree)
        return float(max(np.max(np.abs(a - b)) for a, b in zip(self._levels, other.levels)))

    def allclose(self, other: MarkedProcess, atol: float = 1e-12) -> bool:
        return self.max_abs_difference(other) <= atol

    def _combine(self, other: Union[MarkedProcess, Number], op: Callable) -> MarkedProcess:
        if isinstance(other, MarkedProcess):
            self._tree.require_same(other.tree)
            return MarkedProcess(self._tree, [op(a, b) for a, b in zip(self._levels, other.levels)])
        return MarkedProcess(self._tree, [op(a, other) for a in self._levels])

    def __add__(self, other: Union[MarkedProcess, Number]) -> MarkedProcess:
        return self._combine(other, np.add)

    def __sub__(self, other: Union[MarkedProcess, Number]) -> MarkedProcess:
        return self._combine(other, np.subtract)

    def __mul__(self, other: Union[MarkedProcess, Number]) -> MarkedProcess:
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"MarkedProcess({self._tree!r})"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "marked_process",
            "space": space_descriptor(self._tree),
            "marks": self._tree.marks.labels,
            "levels": [v.tolist() for v in self._levels],
        }

    @classmethod
    def from_dict(cls, tree: ScenarioTree, data: Dict[str, Any]) -> MarkedProcess:
        _check_descriptor(tree, data)
        return cls(
            tree, [np.asarray(v, dtype=float).reshape(-1, tree.n_marks) for v in data["levels"]]
        )

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns level, t, atom, mark, value."""
        frames = []
        for i, label in enumerate(self._tree.marks.labels):
            frame = pd.concat(
                [_frame_rows(self._tree, k, v[:, i]) for k, v in enumerate(self._levels)],
                ignore_index=True,
            )
            frame.insert(3, "mark", label)
            frames.append(frame)
        if not frames:
            return pd.DataFrame(columns=["level", "t", "atom", "mark", "value"])
        frame = pd.concat(frames, ignore_index=True)
        return frame.sort_values(["level", "atom", "mark"], kind="stable")

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\r\n")
        logger.info(f"Wrote marked process table to {path}")


def _level_array(tree: ScenarioTree, k: int, values: Any, trailing: tuple) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    expected = (tree.level_size(k),) + trailing
    if array.shape != expected:
        raise LevelError(f"level {k} needs shape {expected}, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ParameterError(f"level {k} contains non-finite values")
    return array


def _frame_rows(tree: ScenarioTree, k: int, values: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "level": k,
            "t": tree.grid.t(k),
            "atom": np.arange(values.shape[0]),
            "value": values,
        }
    )


def _require_wiener(tree: ScenarioTree) -> None:
    if not tree.has_wiener:
        raise ModelError(f"{tree!r} carries no Wiener driver")


def _check_p(p: float, minimum: float, strict: bool = False) -> None:
    if not np.isfinite(p) or p < minimum or (strict and p == minimum):
        bound = f"> {minimum:g}" if strict else f">= {minimum:g}"
        raise ParameterError(f"exponent p must be {bound}, got {p}")


def pairing_weights(tree: ScenarioTree) -> np.ndarray:
    """Gram weights prob * dt of every process slot; they sum to 1."""
    return np.concatenate([tree.probabilities(k) * tree.dt for k in range(tree.n_steps)])


def marked_pairing_weights(tree: ScenarioTree) -> np.ndarray:
    """Gram weights prob * dt * pi_i of every marked slot; they sum to the total intensity."""
    pi = tree.marks.intensities
    return np.concatenate(
        [np.outer(tree.probabilities(k) * tree.dt, pi).ravel() for k in range(tree.n_steps)]
    )


def norm_Lp(f: Process, p: float) -> float:
    """(sum_k dt E|f(t_k)|^p)^(1/p)."""
    _check_p(p, 1.0)
    tree = f.tree
    total = sum(tree.expectation(np.abs(v) ** p, k) * tree.dt for k, v in enumerate(f.levels))
    return float(total ** (1.0 / p))


def _pathwise_square_integral(f: Process) -> np.ndarray:
    """sum_k f(t_k)^2 dt along every path, as a level n-1 array."""
    tree = f.tree
    acc = f[0] ** 2 * tree.dt
    for k in range(1, f.n_steps):
        acc = tree.lift(acc, k - 1, k) + f[k] ** 2 * tree.dt
    return acc


def norm_Np(f: Process, p: float) -> float:
    """(E (sum_k f(t_k)^2 dt)^(p/2))^(1/p), the path integral taken per path."""
    _check_p(p, 1.0, strict=True)
    tree = f.tree
    square = _pathwise_square_integral(f)
    return float(tree.expectation(square ** (p / 2.0), f.n_steps - 1) ** (1.0 / p))


def norm_Hp(f: Process, p: float) -> float:
    """max_k (E|f(t_k)|^p)^(1/p)."""
    _check_p(p, 1.0)
    tree = f.tree
    return float(
        max(tree.expectation(np.abs(v) ** p, k) ** (1.0 / p) for k, v in enumerate(f.levels))
    )


def running_max(f: Process, include_terminal: bool = False) -> np.ndarray:
    """max_k |f(t_k)| along every path, at the last level used."""
    tree = f.tree
    acc = np.abs(f[0])
    last = f.n_steps if include_terminal and f.terminal is not None else f.n_steps - 1
    for k in range(1, last + 1):
        acc = np.maximum(tree.lift(acc, k - 1, k), np.abs(f[k]))
    return acc


def norm_DHp(f: Process, p: float) -> float:
    """(E max_k |f(t_k)|^p)^(1/p) over the grid indices 0..n-1."""
    _check_p(p, 1.0)
    tree = f.tree
    return float(tree.expectation(running_max(f) ** p, f.n_steps - 1) ** (1.0 / p))


def norm_LpPi(a: MarkedProcess, p: float) -> float:
    """
    (sum_k dt E[sum_i pi_i |a|^p + (sum_i pi_i a^2)^(p/2)])^(1/p).

    Both terms are homogeneous of degree p in a, so the functional is the l^p
    combination of two norms and itself a norm.
    """
    _check_p(p, 2.0)
    tree = a.tree
    pi = tree.marks.intensities
    total = 0.0
    for k, v in enumerate(a.levels):
        inner = np.abs(v) ** p @ pi + (v**2 @ pi) ** (p / 2.0)
        total += tree.expectation(inner, k) * tree.dt
    return float(total ** (1.0 / p))


def pair_L2(f: Process, g: Process) -> float:
    """sum_k dt E[f(t_k) g(t_k)].

    Raises:
        SpaceMismatchError: If f and g live on different trees
    """
    f.tree.require_same(g.tree)
    tree = f.tree
    return float(
        sum(
            tree.expectation(a * b, k) * tree.dt
            for k, (a, b) in enumerate(zip(f.levels, g.levels))
        )
    )


def pair_L2Pi(a: MarkedProcess, b: MarkedProcess) -> float:
    """sum_k dt E[sum_i pi_i a b]."""
    a.tree.require_same(b.tree)
    tree = a.tree
    pi = tree.marks.intensities
    return float(
        sum(
            tree.expectation((x * y) @ pi, k) * tree.dt
            for k, (x, y) in enumerate(zip(a.levels, b.levels))
        )
    )
