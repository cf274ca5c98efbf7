"""
Run configuration.

A single JSON document describes a run: which space to build, which checks to run,
tolerances, seeds and output paths. Command-line flags override individual fields.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from stochadjoint.core.errors import ConfigError

logger = logging.getLogger(__name__)

MODELS = ("wiener", "poisson", "joint")
DEFAULT_MAX_ATOMS = 2**20


@dataclass
class MarkSpec:
    """One mark of the finite mark set: label and intensity pi."""

    label: str
    pi: float


@dataclass
class Tolerances:
    """
    Tolerance settings.

    Attributes:
        exact: Relative tolerance of exact-mode equalities
        mc_sigmas: Width of Monte-Carlo gates in standard errors
        overrides: Per-check tolerance replacing the check's default
    """

    exact: float = 1e-10
    mc_sigmas: float = 4.0
    overrides: Dict[str, float] = field(default_factory=dict)


@dataclass
class OutputPaths:
    """Where `check` writes its report; None means do not write."""

    json_path: Optional[str] = None
    csv_path: Optional[str] = None


def _default_marks() -> List[MarkSpec]:
    return [MarkSpec("y1", 1.0), MarkSpec("y2", 0.5)]


@dataclass
class SuiteConfig:
    """
    Configuration of a workbench run with sensible defaults.

    Attributes:
        model: Driver of the primary tree: wiener, poisson or joint
        n_steps: Time steps of the primary tree
        marks: Finite mark set used by poisson and joint trees
        seed: Root seed; every check derives its own stream from it
        mc_paths: Paths drawn by Monte-Carlo checks (0 disables them)
        p_values: Exponents used by the inequality checks
        tolerances: Exact and Monte-Carlo tolerances
        checks: Check ids to run; None runs every registered check
        output: Report destinations
        max_atoms: Exact-mode cap on the number of terminal atoms
        workers: Threads used for checks and path sampling
        random_inputs: Random inputs drawn per sweep
        joint_n_steps: Time steps of the marked trees used by the suite
        poisson_convergence_n: Resolutions of the Poisson isometry convergence check
        diagonal_convergence_n: Resolutions of the diagonal identity convergence check
        hard_fail: Per-check override of the hard-fail classification
    """

    model: str = "wiener"
    n_steps: int = 4
    marks: List[MarkSpec] = field(default_factory=_default_marks)
    seed: int = 0
    mc_paths: int = 100_000
    p_values: List[float] = field(default_factory=lambda: [2.0, 4.0])
    tolerances: Tolerances = field(default_factory=Tolerances)
    checks: Optional[List[str]] = None
    output: OutputPaths = field(default_factory=OutputPaths)
    max_atoms: int = DEFAULT_MAX_ATOMS
    workers: int = 1
    random_inputs: int = 100
    joint_n_steps: int = 3
    poisson_convergence_n: List[int] = field(default_factory=lambda: [8, 16, 32])
    diagonal_convergence_n: List[int] = field(default_factory=lambda: [8, 16, 32])
    hard_fail: Dict[str, bool] = field(default_factory=dict)

    # Internal state (not persisted)
    _config_file: Optional[Path] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], config_file: Optional[Path] = None) -> SuiteConfig:
        """
        Build a configuration from parsed JSON.

        Raises:
            ConfigError: On unknown keys or values of the wrong shape, naming the field path
        """
        if not isinstance(data, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")

        known = {f.name for f in fields(cls) if not f.name.startswith("_")}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown setting")

        nested = ("marks", "tolerances", "output")
        kwargs: Dict[str, Any] = {k: v for k, v in data.items() if k not in nested}

        if "marks" in data:
            if not isinstance(data["marks"], list):
                raise ConfigError("marks", "must be a list of {label, pi} objects")
            marks = []
            for i, item in enumerate(data["marks"]):
                if not isinstance(item, dict) or set(item) != {"label", "pi"}:
                    raise ConfigError(f"marks[{i}]", "must be an object with keys label and pi")
                marks.append(MarkSpec(str(item["label"]), _as_float(item["pi"], f"marks[{i}].pi")))
            kwargs["marks"] = marks

        if "tolerances" in data:
            tol = data["tolerances"]
            if not isinstance(tol, dict):
                raise ConfigError("tolerances", "must be an object")
            for key in tol:
                if key not in ("exact", "mc_sigmas", "overrides"):
                    raise ConfigError(f"tolerances.{key}", "unknown setting")
            overrides = tol.get("overrides", {})
            if not isinstance(overrides, dict):
                raise ConfigError("tolerances.overrides", "must be an object")
            kwargs["tolerances"] = Tolerances(
                exact=_as_float(tol.get("exact", 1e-10), "tolerances.exact"),
                mc_sigmas=_as_float(tol.get("mc_sigmas", 4.0), "tolerances.mc_sigmas"),
                overrides={
                    k: _as_float(v, f"tolerances.overrides.{k}") for k, v in overrides.items()
                },
            )

        if "output" in data:
            out = data["output"]
            if not isinstance(out, dict) or not set(out) <= {"json_path", "csv_path"}:
                raise ConfigError("output", "must be an object with json_path and/or csv_path")
            kwargs["output"] = OutputPaths(out.get("json_path"), out.get("csv_path"))

        config = cls(**kwargs, _config_file=config_file)
        config.validate()
        return config

    @classmethod
    def load(cls, config_file: Optional[Path] = None) -> SuiteConfig:
        """
        Load a configuration file.

        Args:
            config_file: JSON file; None or a missing file gives the defaults

        Returns:
            Validated configuration

        Raises:
            ConfigError: If the file exists but cannot be parsed or validated
        """
        if config_file is None:
            logger.info("No config file given. Using default configuration.")
            return cls()

        config_path = Path(config_file)
        if not config_path.exists():
            logger.info(f"Config file {config_path} not found. Using default configuration.")
            return cls(_config_file=config_path)

        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError("<root>", f"{config_path} is not valid JSON: {e}", e) from e

        logger.info(f"Loaded configuration from {config_path}")
        return cls.from_dict(data, config_file=config_path)

    def to_dict(self) -> Dict[str, Any]:
        """Plain JSON-ready representation, excluding internal fields."""
        return {k: v for k, v in asdict(self).items() if not k.startswith("_")}

    def save(self, config_file: Optional[Path] = None) -> None:
        """Write the configuration as JSON to `config_file` or the file it was loaded from."""
        target = Path(config_file) if config_file is not None else self._config_file
        if target is None:
            raise ConfigError("<root>", "no file to save the configuration to")

        with open(target, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=4)
        self._config_file = target
        logger.info(f"Saved configuration to {target}")

    def update(self, **kwargs: Any) -> None:
        """
        Override fields, e.g. from command-line flags, and re-validate.

        Args:
            **kwargs: Field names and new values; None values are skipped
        """
        for key, value in kwargs.items():
            if value is None:
                continue
            if hasattr(self, key) and not key.startswith("_"):
                setattr(self, key, value)
            else:
                logger.warning(f"Unknown setting: {key}")
        self.validate()

    def validate(self, known_checks: Optional[Iterable[str]] = None) -> None:
        """
        Check every field; the first problem raises.

        Args:
            known_checks: Registered check ids; when given, `checks`, `hard_fail` and
                tolerance overrides must only reference these

        Raises:
            ConfigError: Naming the offending field path
        """
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {', '.join(MODELS)}")
        _require_int(self.n_steps, "n_steps", minimum=1)
        _require_int(self.seed, "seed", minimum=0)
        _require_int(self.mc_paths, "mc_paths", minimum=0)
        _require_int(self.max_atoms, "max_atoms", minimum=1)
        _require_int(self.workers, "workers", minimum=1)
        _require_int(self.random_inputs, "random_inputs", minimum=1)
        _require_int(self.joint_n_steps, "joint_n_steps", minimum=1)

        labels = set()
        for i, mark in enumerate(self.marks):
            if not mark.pi > 0:
                raise ConfigError(f"marks[{i}].pi", "must be positive")
            if mark.label in labels:
                raise ConfigError(f"marks[{i}].label", f"duplicate label '{mark.label}'")
            labels.add(mark.label)
        if self.model != "wiener" and not self.marks:
            raise ConfigError("marks", f"model '{self.model}' needs at least one mark")

        for i, p in enumerate(self.p_values):
            if _as_float(p, f"p_values[{i}]") < 1:
                raise ConfigError(f"p_values[{i}]", "must be at least 1")
        for name in ("poisson_convergence_n", "diagonal_convergence_n"):
            values = getattr(self, name)
            if len(values) < 2:
                raise ConfigError(name, "needs at least two resolutions")
            for i, n in enumerate(values):
                _require_int(n, f"{name}[{i}]", minimum=1)

        if self.tolerances.exact < 0:
            raise ConfigError("tolerances.exact", "must be non-negative")
        if self.tolerances.mc_sigmas < 0:
            raise ConfigError("tolerances.mc_sigmas", "must be non-negative")
        for key, value in self.tolerances.overrides.items():
            if value < 0:
                raise ConfigError(f"tolerances.overrides.{key}", "must be non-negative")

        if known_checks is not None:
            known = set(known_checks)
            for i, check_id in enumerate(self.checks or []):
                if check_id not in known:
                    raise ConfigError(f"checks[{i}]", f"unknown check id '{check_id}'")
            for key in self.hard_fail:
                if key not in known:
                    raise ConfigError(f"hard_fail.{key}", f"unknown check id '{key}'")
            for key in self.tolerances.overrides:
                if key not in known:
                    raise ConfigError(f"tolerances.overrides.{key}", f"unknown check id '{key}'")

    def tolerance_for(self, check_id: str, default: float) -> float:
        """Tolerance of a check: the override if configured, else the check's default."""
        return self.tolerances.overrides.get(check_id, default)

    def is_hard(self, check_id: str, default: bool) -> bool:
        """Hard-fail classification of a check."""
        return self.hard_fail.get(check_id, default)


def _as_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number, got {value!r}")
    return float(value)


def _require_int(value: Any, path: str, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be at least {minimum}")
