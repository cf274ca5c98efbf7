"""
Registry of checks and the suite runner.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Type

from stochadjoint.checks.common import SuiteCheck
from stochadjoint.checks.convergence import (
    DiagonalConvergenceCheck,
    McAgreementCheck,
    PoissonConvergenceCheck,
)
from stochadjoint.checks.identities import (
    AdjointBoundsCheck,
    AdjointCheck,
    ClarkCheck,
    ExamplesCheck,
    LemmasCheck,
    ThetaCheck,
)
from stochadjoint.checks.inequalities import (
    BdgCheck,
    DecompositionsCheck,
    DoobCheck,
    NormsCheck,
    OperatorBoundsCheck,
    PoissonIsometryCheck,
    PolarizationCheck,
)
from stochadjoint.checks.report import CheckEntry, CheckReport
from stochadjoint.core.events import Event, EventBus, EventType
from stochadjoint.core.settings import SuiteConfig

logger = logging.getLogger(__name__)

REGISTRY: Dict[str, Type[SuiteCheck]] = {
    cls.check_id: cls
    for cls in (
        AdjointCheck,
        AdjointBoundsCheck,
        ClarkCheck,
        ExamplesCheck,
        LemmasCheck,
        ThetaCheck,
        DoobCheck,
        BdgCheck,
        PoissonIsometryCheck,
        OperatorBoundsCheck,
        PolarizationCheck,
        DecompositionsCheck,
        NormsCheck,
        PoissonConvergenceCheck,
        DiagonalConvergenceCheck,
        McAgreementCheck,
    )
}


def known_checks() -> List[str]:
    return sorted(REGISTRY)


def run_suite(config: SuiteConfig, event_bus: Optional[EventBus] = None) -> CheckReport:
    """
    Run the configured checks and collect their entries.

    Checks run concurrently on `config.workers` threads. Entry values never
    depend on the scheduling; only the runtimes in the metadata do.

    Args:
        config: Run configuration; `checks` None selects every registered check
        event_bus: Event bus for lifecycle events (uses singleton if not provided)

    Returns:
        Report with entries sorted by id

    Raises:
        ConfigError: If the configuration names an unknown check
    """
    config.validate(known_checks())
    bus = event_bus or EventBus()
    selected = known_checks() if config.checks is None else list(dict.fromkeys(config.checks))
    checks = [REGISTRY[check_id](config, bus) for check_id in selected]

    bus.emit(Event(EventType.SUITE_STARTED, data={"checks": selected}, source="suite"))
    logger.info(f"Running {len(checks)} checks with {config.workers} workers")

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda c: c.execute(), checks))

    entries: List[CheckEntry] = []
    runtimes: Dict[str, float] = {}
    for check, produced in zip(checks, results):
        runtimes[check.check_id] = check.runtime
        for entry in produced:
            entry.runtime = check.runtime
        entries.extend(produced)

    report = CheckReport.collect(entries, config.to_dict(), runtimes)
    bus.emit(
        Event(
            EventType.SUITE_FINISHED,
            data={
                "entries": len(report.entries),
                "failed": len(report.failures),
                "hard_failed": len(report.hard_failures),
            },
            source="suite",
        )
    )
    logger.info(report.summary().splitlines()[0])
    return report
