"""Core module - settings, events, errors and the check base class."""

from stochadjoint.core.base import BaseCheck
from stochadjoint.core.errors import (
    ConfigError,
    IntensityError,
    LevelError,
    MartingaleDefectError,
    ModelError,
    ParameterError,
    SpaceMismatchError,
    TreeSizeError,
    WorkbenchError,
)
from stochadjoint.core.events import Event, EventBus, EventType
from stochadjoint.core.settings import MarkSpec, SuiteConfig

__all__ = [
    "BaseCheck",
    "ConfigError",
    "Event",
    "EventBus",
    "EventType",
    "IntensityError",
    "LevelError",
    "MarkSpec",
    "MartingaleDefectError",
    "ModelError",
    "ParameterError",
    "SpaceMismatchError",
    "SuiteConfig",
    "TreeSizeError",
    "WorkbenchError",
]
