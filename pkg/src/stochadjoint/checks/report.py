"""
Check entries and the report that collects them.

An entry records the two sides of one identity or inequality, the constant and
tolerance it was judged with, and whether it passed. The pass flag is always
derived from the values by `judge`, so a report read back from disk can be
re-verified.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

ORDER_RANGE = (0.8, 1.2)
HALVING_RANGE = (1.7, 2.3)


class Kind(str, Enum):
    """How lhs and rhs are compared."""

    EQUALITY = "equality"  # |lhs - rhs| <= tol (1 + |rhs|)
    INEQUALITY = "inequality"  # lhs <= rhs + tol (1 + |rhs|)
    RATIO = "ratio"  # report only; finite and positive
    GATE = "gate"  # |lhs - rhs| <= tol, tol in absolute units
    CONVERGENCE = "convergence"  # lhs = measured order; finest gap <= tol
    REPORT = "report"  # report only; finite


class Mode(str, Enum):
    EXACT = "exact"
    MC = "mc"


@dataclass
class CheckEntry:
    """
    One measured statement.

    Attributes:
        id: Unique entry id, prefixed by the check id
        reference: Name of the property the entry tests, or "plumbing"
        lhs: Measured left side
        rhs: Right side (target, bound or expected order)
        constant: Constant used in the statement (NaN when none applies)
        tolerance: Tolerance the entry was judged with
        mode: exact or mc
        kind: Comparison semantics
        hard: Whether a failure fails the run
        passed: Outcome
        details: Extra JSON-ready facts (sweep sizes, worst input, gaps)
        runtime: Seconds spent in the owning check; kept out of entry serialization
    """

    id: str
    reference: str
    lhs: float
    rhs: float
    constant: float = math.nan
    tolerance: float = 0.0
    mode: Mode = Mode.EXACT
    kind: Kind = Kind.EQUALITY
    hard: bool = True
    passed: bool = False
    details: Dict[str, Any] = field(default_factory=dict)
    runtime: float = field(default=0.0, compare=False)

    def judge(self) -> bool:
        """Recompute the pass flag from the stored values."""
        lhs, rhs, tol = self.lhs, self.rhs, self.tolerance
        if self.kind is Kind.EQUALITY:
            return _finite(lhs, rhs) and abs(lhs - rhs) <= tol * (1.0 + abs(rhs))
        if self.kind is Kind.INEQUALITY:
            return _finite(lhs, rhs) and lhs <= rhs + tol * (1.0 + abs(rhs))
        if self.kind is Kind.RATIO:
            return _finite(lhs, rhs) and lhs > 0 and rhs > 0
        if self.kind is Kind.GATE:
            return _finite(lhs, rhs) and abs(lhs - rhs) <= tol
        if self.kind is Kind.CONVERGENCE:
            gap = float(self.details.get("finest_gap", math.inf))
            ratios = self.details.get("halving_ratios", [])
            # sampled gaps widen each ratio range by its own standard errors
            margins = self.details.get("ratio_margins") or [0.0] * len(ratios)
            in_range = all(
                HALVING_RANGE[0] - m <= r <= HALVING_RANGE[1] + m for r, m in zip(ratios, margins)
            )
            return (
                _finite(lhs)
                and ORDER_RANGE[0] <= lhs <= ORDER_RANGE[1]
                and in_range
                and gap <= tol
            )
        return _finite(lhs, rhs)

    @property
    def is_consistent(self) -> bool:
        return self.passed == self.judge()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "reference": self.reference,
            "lhs": _json_float(self.lhs),
            "rhs": _json_float(self.rhs),
            "constant": _json_float(self.constant),
            "tolerance": _json_float(self.tolerance),
            "mode": self.mode.value,
            "kind": self.kind.value,
            "hard": self.hard,
            "passed": self.passed,
            "details": _json_ready(self.details),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> CheckEntry:
        return cls(
            id=data["id"],
            reference=data["reference"],
            lhs=_from_json_float(data["lhs"]),
            rhs=_from_json_float(data["rhs"]),
            constant=_from_json_float(data.get("constant")),
            tolerance=_from_json_float(data.get("tolerance", 0.0)),
            mode=Mode(data.get("mode", "exact")),
            kind=Kind(data.get("kind", "equality")),
            hard=bool(data.get("hard", True)),
            passed=bool(data["passed"]),
            details=dict(data.get("details", {})),
        )


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def _json_float(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


def _from_json_float(value: Optional[float]) -> float:
    return math.nan if value is None else float(value)


def _json_ready(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _json_float(float(value))
    return value


def make_entry(
    entry_id: str,
    reference: str,
    lhs: float,
    rhs: float,
    kind: Kind,
    tolerance: float,
    constant: float = math.nan,
    mode: Mode = Mode.EXACT,
    hard: Optional[bool] = None,
    details: Optional[Dict[str, Any]] = None,
) -> CheckEntry:
    """
    Build an entry and judge it.

    Ratio and report entries default to soft, everything else to hard.
    """
    if hard is None:
        hard = kind not in (Kind.RATIO, Kind.REPORT)
    entry = CheckEntry(
        id=entry_id,
        reference=reference,
        lhs=float(lhs),
        rhs=float(rhs),
        constant=float(constant),
        tolerance=float(tolerance),
        mode=mode,
        kind=kind,
        hard=hard,
        details=dict(details or {}),
    )
    entry.passed = entry.judge()
    return entry


def error_entry(check_id: str, reference: str, error: Exception, hard: bool = True) -> CheckEntry:
    """Failed entry standing in for a check that raised."""
    return CheckEntry(
        id=f"{check_id}.error",
        reference=reference,
        lhs=math.nan,
        rhs=math.nan,
        kind=Kind.REPORT,
        hard=hard,
        passed=False,
        details={"error": str(error), "type": type(error).__name__},
    )


def worst_of(
    entry_id: str, entries: List[CheckEntry], details: Optional[Dict[str, Any]] = None
) -> CheckEntry:
    """
    Collapse a sweep into one entry: the failing or tightest member, with sweep counts.

    Tightness is the distance to the pass boundary relative to the tolerance scale.
    """
    if not entries:
        raise ValueError("cannot summarise an empty sweep")

    def slack(e: CheckEntry) -> float:
        if not e.passed:
            return -math.inf
        if e.kind is Kind.INEQUALITY:
            return (e.rhs - e.lhs) / (1.0 + abs(e.rhs))
        if e.kind in (Kind.EQUALITY, Kind.GATE):
            return -abs(e.lhs - e.rhs) / (1.0 + abs(e.rhs))
        return 0.0

    worst = min(entries, key=slack)
    failures = sum(1 for e in entries if not e.passed)
    summary = make_entry(
        entry_id,
        worst.reference,
        worst.lhs,
        worst.rhs,
        worst.kind,
        worst.tolerance,
        constant=worst.constant,
        mode=worst.mode,
        hard=worst.hard,
        details={
            **worst.details,
            **(details or {}),
            "inputs": len(entries),
            "violations": failures,
        },
    )
    if failures:
        summary.passed = False
    return summary


@dataclass
class CheckReport:
    """
    Result of a verification run.

    Attributes:
        entries: Entries sorted by id
        config: The configuration the run used
        metadata: Timestamp and per-check runtimes; the only run-dependent values
    """

    entries: List[CheckEntry] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.entries = sorted(self.entries, key=lambda e: e.id)

    @classmethod
    def collect(
        cls,
        entries: Iterable[CheckEntry],
        config: Dict[str, Any],
        runtimes: Optional[Dict[str, float]] = None,
    ) -> CheckReport:
        metadata = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "runtimes": {k: round(v, 6) for k, v in sorted((runtimes or {}).items())},
        }
        return cls(list(entries), config, metadata)

    @property
    def failures(self) -> List[CheckEntry]:
        return [e for e in self.entries if not e.passed]

    @property
    def hard_failures(self) -> List[CheckEntry]:
        return [e for e in self.entries if e.hard and not e.passed]

    @property
    def exit_code(self) -> int:
        return 1 if self.hard_failures else 0

    def entry(self, entry_id: str) -> CheckEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metadata": self.metadata,
            "config": _json_ready(self.config),
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
        logger.info(f"Wrote report JSON to {path}")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> CheckReport:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        return cls(
            [CheckEntry.from_dict(e) for e in data.get("entries", [])],
            data.get("config", {}),
            data.get("metadata", {}),
        )

    def to_frame(self) -> pd.DataFrame:
        columns = [
            "id",
            "reference",
            "lhs",
            "rhs",
            "constant",
            "tolerance",
            "mode",
            "kind",
            "hard",
            "passed",
        ]
        rows = [{k: v for k, v in e.to_dict().items() if k in columns} for e in self.entries]
        return pd.DataFrame(rows, columns=columns)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\r\n")
        logger.info(f"Wrote report CSV to {path}")

    def summary(self) -> str:
        """Human-readable outcome, one line per failed entry."""
        total = len(self.entries)
        lines = [
            f"{total} entries, {total - len(self.failures)} passed, "
            f"{len(self.failures)} failed ({len(self.hard_failures)} hard)"
        ]
        for e in self.failures:
            tag = "FAIL" if e.hard else "soft"
            lines.append(f"  [{tag}] {e.id}: lhs={e.lhs:.6g} rhs={e.rhs:.6g} tol={e.tolerance:.1e}")
        return "\n".join(lines)
