"""
Suite lifecycle events.

A small pub/sub bus: the check runner announces what it starts and finishes, the
command line subscribes to turn that into progress logging, and the bus keeps a
short history so a finished run can be summarised without re-reading the report.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, auto
from threading import Lock
from typing import Any, Callable, Deque, Dict, List, Optional

logger = logging.getLogger(__name__)

HISTORY_LIMIT = 1000


class EventType(Enum):
    """Lifecycle points of a verification run."""

    SUITE_STARTED = auto()
    SUITE_FINISHED = auto()

    CHECK_STARTED = auto()
    CHECK_PASSED = auto()
    CHECK_FAILED = auto()
    CHECK_ERROR = auto()  # the check raised instead of producing entries

    REPORT_WRITTEN = auto()


@dataclass
class Event:
    """
    One lifecycle notification.

    Attributes:
        type: What happened
        check_id: Check the event refers to ("" for suite-level events)
        data: Optional payload (entry counts, error text, output paths)
        timestamp: Wall-clock time of emission; never written to reports
        source: Component that emitted the event
    """

    type: EventType
    check_id: str = ""
    data: Optional[Dict[str, Any]] = None
    timestamp: datetime = field(default_factory=datetime.now)
    source: str = "unknown"

    def __str__(self) -> str:
        target = f" {self.check_id}" if self.check_id else ""
        return f"Event({self.type.name}{target}, source={self.source})"


EventHandler = Callable[[Event], None]


class EventBus:
    """
    Process-wide event bus.

    Thread-safe singleton: checks run on worker threads and emit concurrently.

    Example:
        >>> bus = EventBus()
        >>> bus.subscribe(EventType.CHECK_FAILED, lambda e: print(e.check_id))
        >>> bus.emit(Event(EventType.CHECK_FAILED, check_id="doob", source="suite"))
    """

    _instance: Optional[EventBus] = None
    _lock: Lock = Lock()

    def __new__(cls) -> EventBus:
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self) -> None:
        if self._initialized:
            return

        self._subscribers: Dict[EventType, List[EventHandler]] = {}
        self._global_subscribers: List[EventHandler] = []
        self._history: Deque[Event] = deque(maxlen=HISTORY_LIMIT)
        self._handler_lock = Lock()
        self._initialized = True

        logger.debug("EventBus initialized")

    def subscribe(self, event_type: EventType, handler: EventHandler) -> Callable[[], None]:
        """
        Register a handler for one event type.

        Returns:
            Function removing the subscription again
        """
        with self._handler_lock:
            self._subscribers.setdefault(event_type, []).append(handler)

        logger.debug(f"Subscribed to {event_type.name}")
        return lambda: self.unsubscribe(event_type, handler)

    def subscribe_all(self, handler: EventHandler) -> Callable[[], None]:
        """Register a handler for every event type."""
        with self._handler_lock:
            self._global_subscribers.append(handler)

        def unsubscribe() -> None:
            with self._handler_lock:
                if handler in self._global_subscribers:
                    self._global_subscribers.remove(handler)

        return unsubscribe

    def unsubscribe(self, event_type: EventType, handler: EventHandler) -> None:
        """Remove a handler; unknown handlers are ignored."""
        with self._handler_lock:
            handlers = self._subscribers.get(event_type, [])
            if handler in handlers:
                handlers.remove(handler)

    def emit(self, event: Event) -> None:
        """
        Record the event and deliver it to every matching handler.

        A failing handler is logged and does not stop delivery to the others.
        """
        logger.debug(f"Emitting {event}")

        with self._handler_lock:
            self._history.append(event)
            handlers = list(self._subscribers.get(event.type, []))
            handlers += self._global_subscribers

        for handler in handlers:
            try:
                handler(event)
            except Exception as e:
                logger.error(f"Error in handler for {event.type.name}: {e}")

    def history(self, event_type: Optional[EventType] = None) -> List[Event]:
        """Recent events, optionally filtered by type, oldest first."""
        with self._handler_lock:
            events = list(self._history)
        if event_type is None:
            return events
        return [e for e in events if e.type == event_type]

    def counts(self) -> Dict[str, int]:
        """Number of recorded events per type name."""
        with self._handler_lock:
            return dict(Counter(e.type.name for e in self._history))

    def clear(self) -> None:
        """Drop subscriptions and history."""
        with self._handler_lock:
            self._subscribers.clear()
            self._global_subscribers.clear()
            self._history.clear()

    @classmethod
    def reset_instance(cls) -> None:
        """Forget the singleton so the next EventBus() starts clean. Used by tests."""
        with cls._lock:
            cls._instance = None
