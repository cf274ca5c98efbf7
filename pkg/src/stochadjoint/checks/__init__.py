"""Checks module - property checks, registered suite checks and the report."""

from stochadjoint.checks.common import SuiteCheck
from stochadjoint.checks.properties import (
    check_bdg,
    check_decompositions,
    check_doob,
    check_marked_norm,
    check_norms,
    check_operator_bounds,
    check_poisson_isometry,
    check_polarization,
)
from stochadjoint.checks.report import CheckEntry, CheckReport, Kind, Mode
from stochadjoint.checks.suite import REGISTRY, known_checks, run_suite

__all__ = [
    "CheckEntry",
    "CheckReport",
    "Kind",
    "Mode",
    "REGISTRY",
    "SuiteCheck",
    "check_bdg",
    "check_decompositions",
    "check_doob",
    "check_marked_norm",
    "check_norms",
    "check_operator_bounds",
    "check_poisson_isometry",
    "check_polarization",
    "known_checks",
    "run_suite",
]
