"""
Shared plumbing of the suite checks: cached trees, entry construction, seeding.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

import numpy as np

from stochadjoint.checks.report import CheckEntry, Kind, Mode, make_entry
from stochadjoint.core.base import BaseCheck
from stochadjoint.core.settings import DEFAULT_MAX_ATOMS
from stochadjoint.spaces.tree import MarkSet, Model, ScenarioTree, build_tree

logger = logging.getLogger(__name__)

# default tolerance of convergence entries: the finest measured gap must not exceed it
CONVERGENCE_TOLERANCE = 0.1
# absolute floor added to Monte-Carlo gates so that zero-variance estimators still compare
GATE_FLOOR = 1e-12

MarkKey = Tuple[Tuple[str, float], ...]


@lru_cache(maxsize=64)
def cached_tree(
    model: str, n_steps: int, marks: MarkKey = (), max_atoms: int = DEFAULT_MAX_ATOMS
) -> ScenarioTree:
    """
    Exact tree shared by all checks of a process.

    Trees are immutable and cache their level arrays behind a lock, so sharing
    them between worker threads is safe.
    """
    mark_set = MarkSet.of(marks) if Model(model).has_marks else None
    return build_tree(model, n_steps, mark_set, max_atoms=max_atoms)


class SuiteCheck(BaseCheck):
    """BaseCheck with the helpers every registered check uses."""

    def marks_key(self, limit: Optional[int] = None) -> MarkKey:
        marks = tuple((m.label, float(m.pi)) for m in self.config.marks)
        return marks[:limit] if limit is not None else marks

    def tree(self, model: str, n_steps: int, marks: Optional[MarkKey] = None) -> ScenarioTree:
        if model == Model.WIENER.value:
            key: MarkKey = ()
        else:
            key = marks if marks is not None else self.marks_key()
        return cached_tree(model, n_steps, key, self.config.max_atoms)

    def wiener_tree(self, n_steps: Optional[int] = None) -> ScenarioTree:
        return self.tree(Model.WIENER.value, n_steps or self.config.n_steps)

    def primary_tree(self) -> ScenarioTree:
        return self.tree(self.config.model, self.config.n_steps)

    def marked_tree(
        self, model: str = Model.JOINT.value, n_steps: Optional[int] = None
    ) -> ScenarioTree:
        return self.tree(model, n_steps or self.config.joint_n_steps)

    def entry(
        self,
        name: str,
        lhs: float,
        rhs: float,
        kind: Kind = Kind.EQUALITY,
        tolerance: Optional[float] = None,
        constant: float = math.nan,
        mode: Mode = Mode.EXACT,
        details: Optional[Dict[str, Any]] = None,
    ) -> CheckEntry:
        """Entry named `<check_id>.<name>` with the configured tolerance and hard-fail class."""
        default_hard = kind not in (Kind.RATIO, Kind.REPORT)
        return make_entry(
            f"{self.check_id}.{name}",
            self.reference,
            lhs,
            rhs,
            kind,
            self.tolerance(tolerance),
            constant=constant,
            mode=mode,
            hard=self.is_hard(default_hard),
            details=details,
        )

    def adopt(self, entry: CheckEntry) -> CheckEntry:
        """Apply the configured hard-fail class to an entry built elsewhere."""
        entry.hard = self.is_hard(entry.hard)
        return entry

    def deviation(
        self, name: str, value: float, tolerance: Optional[float] = None, **details: Any
    ) -> CheckEntry:
        """Equality entry `value = 0` for a measured maximal deviation."""
        return self.entry(name, value, 0.0, Kind.EQUALITY, tolerance, details=details or None)

    def gate(self, name: str, samples: np.ndarray, exact: float, **details: Any) -> CheckEntry:
        """
        Monte-Carlo gate: the sample mean must lie within `mc_sigmas` standard errors of `exact`.
        """
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        mean = float(samples.mean())
        stderr = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        sigmas = self.config.tolerances.mc_sigmas
        return self.entry(
            name,
            mean,
            exact,
            Kind.GATE,
            sigmas * stderr + GATE_FLOOR,
            mode=Mode.MC,
            details={"paths": n, "standard_error": stderr, "sigmas": sigmas, **details},
        )

    @staticmethod
    def admissible(marks: MarkKey, n_steps: int) -> bool:
        """Whether every pi * dt of the marks is below 1 at this resolution."""
        return all(pi / n_steps < 1.0 for _, pi in marks)

    @property
    def mc_enabled(self) -> bool:
        return self.config.mc_paths >= 2

    @property
    def inputs(self) -> int:
        return self.config.random_inputs
