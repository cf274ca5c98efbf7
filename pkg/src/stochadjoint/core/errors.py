"""
Exception hierarchy for the workbench.

Every error raised on purpose by the package derives from WorkbenchError so the
command line can map it to a validation exit code.
"""

from __future__ import annotations

from typing import Optional


class WorkbenchError(Exception):
    """Base class for all expected workbench failures."""


class ParameterError(WorkbenchError, ValueError):
    """A numeric parameter (p, r, n_steps, ...) is outside its domain."""


class TreeSizeError(WorkbenchError):
    """An exact-mode tree or level would exceed the atom cap."""

    def __init__(self, atoms: int, limit: int) -> None:
        self.atoms = atoms
        self.limit = limit
        super().__init__(
            f"exact mode needs {atoms} atoms but the cap is {limit} atoms; "
            "use sampling mode or raise max_atoms"
        )


class IntensityError(WorkbenchError, ValueError):
    """A per-step jump probability is not strictly inside (0, 1)."""

    def __init__(self, label: str, probability: float) -> None:
        self.label = label
        self.probability = probability
        if probability <= 0.0:
            hint = "mark weights must be positive"
        else:
            hint = "increase n_steps so that pi * dt < 1"
        super().__init__(f"mark '{label}': per-step jump probability {probability:.6g}; {hint}")


class LevelError(WorkbenchError, ValueError):
    """A time level is out of range or in the wrong order."""


class ModelError(WorkbenchError):
    """The tree does not carry the driver an operation needs."""


class SpaceMismatchError(WorkbenchError, ValueError):
    """Two objects live on different scenario trees or mark sets."""


class MartingaleDefectError(WorkbenchError):
    """A process that must be a martingale is not one."""

    def __init__(self, defect: float, tolerance: float) -> None:
        self.defect = defect
        self.tolerance = tolerance
        super().__init__(
            f"input is not a martingale: max defect {defect:.3e} exceeds {tolerance:.1e}"
        )


class ConfigError(WorkbenchError):
    """A configuration value failed validation."""

    def __init__(self, field_path: str, message: str, cause: Optional[Exception] = None) -> None:
        self.field_path = field_path
        self.cause = cause
        super().__init__(f"{field_path}: {message}")
