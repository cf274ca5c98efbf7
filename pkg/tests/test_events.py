"""Tests for EventBus."""

from stochadjoint.core.events import Event, EventBus, EventType


class TestEventBus:
    """Test cases for EventBus pub/sub system."""

    def setup_method(self):
        """Reset event bus before each test."""
        EventBus.reset_instance()

    def test_singleton(self):
        """Test that EventBus is a singleton."""
        assert EventBus() is EventBus()

    def test_reset_instance_starts_clean(self):
        """Test that reset_instance drops subscriptions and history."""
        bus = EventBus()
        bus.emit(Event(EventType.SUITE_STARTED, source="test"))
        EventBus.reset_instance()

        fresh = EventBus()
        assert fresh is not bus
        assert fresh.history() == []

    def test_subscribe_and_emit(self):
        """Test basic subscribe and emit."""
        bus = EventBus()
        received = []
        bus.subscribe(EventType.CHECK_FAILED, received.append)

        bus.emit(Event(EventType.CHECK_FAILED, check_id="doob", source="test"))

        assert len(received) == 1
        assert received[0].check_id == "doob"

    def test_handlers_only_see_their_type(self):
        """Test that a handler is not called for other event types."""
        bus = EventBus()
        received = []
        bus.subscribe(EventType.CHECK_PASSED, received.append)

        bus.emit(Event(EventType.CHECK_FAILED, source="test"))

        assert received == []

    def test_unsubscribe(self):
        """Test that the returned callable removes the handler."""
        bus = EventBus()
        received = []
        unsubscribe = bus.subscribe(EventType.CHECK_ERROR, received.append)

        bus.emit(Event(EventType.CHECK_ERROR, source="test"))
        unsubscribe()
        bus.emit(Event(EventType.CHECK_ERROR, source="test"))

        assert len(received) == 1

    def test_subscribe_all(self):
        """Test subscribing to all events."""
        bus = EventBus()
        received = []
        unsubscribe = bus.subscribe_all(received.append)

        bus.emit(Event(EventType.SUITE_STARTED, source="test"))
        bus.emit(Event(EventType.REPORT_WRITTEN, source="test"))
        unsubscribe()
        bus.emit(Event(EventType.SUITE_FINISHED, source="test"))

        assert [e.type for e in received] == [EventType.SUITE_STARTED, EventType.REPORT_WRITTEN]

    def test_handler_error_isolation(self):
        """Test that one handler error doesn't affect others."""
        bus = EventBus()
        received = []

        def failing_handler(event: Event):
            raise RuntimeError("Handler error")

        bus.subscribe(EventType.CHECK_STARTED, failing_handler)
        bus.subscribe(EventType.CHECK_STARTED, received.append)

        bus.emit(Event(EventType.CHECK_STARTED, source="test"))

        assert len(received) == 1

    def test_history_and_counts(self):
        """Test that emitted events are recorded in order and counted per type."""
        bus = EventBus()
        bus.emit(Event(EventType.CHECK_STARTED, check_id="a", source="test"))
        bus.emit(Event(EventType.CHECK_PASSED, check_id="a", source="test"))
        bus.emit(Event(EventType.CHECK_STARTED, check_id="b", source="test"))

        assert [e.check_id for e in bus.history(EventType.CHECK_STARTED)] == ["a", "b"]
        assert bus.counts() == {"CHECK_STARTED": 2, "CHECK_PASSED": 1}

        bus.clear()
        assert bus.history() == []

    def test_event_str(self):
        """Test the readable form of an event."""
        event = Event(EventType.CHECK_FAILED, check_id="bdg", source="suite")

        assert str(event) == "Event(CHECK_FAILED bdg, source=suite)"
