"""
Base class for verification checks.

Every check of the suite derives from BaseCheck and implements `_run`, which
returns the entries it measured. `execute` wraps it with timing, lifecycle events
and error handling so one broken check never takes the suite down.
"""

from __future__ import annotations

import logging
import time
import zlib
from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, List, Optional

import numpy as np

from stochadjoint.core.events import Event, EventBus, EventType
from stochadjoint.core.settings import SuiteConfig

if TYPE_CHECKING:
    from stochadjoint.checks.report import CheckEntry

logger = logging.getLogger(__name__)


class BaseCheck(ABC):
    """
    A group of related entries sharing one id, reference and seed stream.

    Subclasses set the class attributes and implement `_run`.

    Attributes:
        check_id: Registry key; prefixes the ids of all produced entries
        reference: Human-readable name of the property under test
        description: One line shown by the command line
    """

    check_id: str = ""
    reference: str = "plumbing"
    description: str = ""

    def __init__(self, config: SuiteConfig, event_bus: Optional[EventBus] = None) -> None:
        """
        Initialize the check.

        Args:
            config: Run configuration
            event_bus: Event bus for lifecycle events (uses singleton if not provided)
        """
        self._config = config
        self._event_bus = event_bus or EventBus()
        self.runtime = 0.0

    @property
    def name(self) -> str:
        """Get the check name for logging."""
        return self.check_id or self.__class__.__name__

    @property
    def config(self) -> SuiteConfig:
        return self._config

    def tolerance(self, default: Optional[float] = None) -> float:
        """
        Tolerance of an entry of this check.

        A per-check override in the configuration wins; otherwise `default`, and
        without a default the configured exact tolerance.
        """
        fallback = self._config.tolerances.exact if default is None else default
        return self._config.tolerance_for(self.check_id, fallback)

    def is_hard(self, default: bool = True) -> bool:
        return self._config.is_hard(self.check_id, default)

    def input_rng(self, salt: str = "") -> np.random.Generator:
        """
        Generator for random test inputs of exact-mode sweeps.

        Seeded by the check id only, so exact-mode values do not move when the
        run seed changes.
        """
        key = zlib.crc32(f"{self.check_id}:{salt}".encode("utf-8"))
        return np.random.default_rng(key)

    def sample_seed(self, salt: str = "") -> int:
        """Seed for Monte-Carlo sampling, derived from the run seed and the check id."""
        key = zlib.crc32(f"{self.check_id}:{salt}".encode("utf-8"))
        return int(np.random.SeedSequence([self._config.seed, key]).generate_state(1)[0])

    def execute(self) -> List[CheckEntry]:
        """
        Run the check and report its outcome on the event bus.

        Returns:
            Entries produced by the check; a single failed entry if it raised
        """
        self._event_bus.emit(
            Event(EventType.CHECK_STARTED, check_id=self.check_id, source=self.name)
        )
        start = time.perf_counter()
        try:
            entries = self._run()
        except Exception as e:
            logger.error(f"{self.name} error: {e}")
            from stochadjoint.checks.report import error_entry

            entries = [error_entry(self.check_id, self.reference, e, hard=self.is_hard(True))]
            self._event_bus.emit(
                Event(
                    EventType.CHECK_ERROR,
                    check_id=self.check_id,
                    data={"error": str(e), "type": type(e).__name__},
                    source=self.name,
                )
            )
        finally:
            self.runtime = time.perf_counter() - start

        failed = [e.id for e in entries if not e.passed]
        event_type = EventType.CHECK_FAILED if failed else EventType.CHECK_PASSED
        self._event_bus.emit(
            Event(
                event_type,
                check_id=self.check_id,
                data={"entries": len(entries), "failed": failed, "runtime": self.runtime},
                source=self.name,
            )
        )
        logger.debug(f"{self.name} finished in {self.runtime:.3f}s with {len(entries)} entries")
        return entries

    @abstractmethod
    def _run(self) -> List[CheckEntry]:
        """Measure and return the entries of this check."""
