from __future__ import annotations

from typing import List, Optional


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class LoadError(ToolkitError, ValueError):
    pass


class MalformedHeaderError(LoadError):
    pass


class TruncatedPayloadError(LoadError):
    pass


class TrailingDataError(LoadError):
    pass


class DimensionMismatchError(ToolkitError, ValueError):
    pass


class DegenerateInputError(ToolkitError, ValueError):
    pass


class ConfigurationError(ToolkitError, ValueError):
    pass


class OrderMismatchError(ToolkitError, ValueError):
    pass


class FrameOrderError(ToolkitError, ValueError):
    pass


class ScenarioError(ToolkitError, ValueError):
    pass


class MetricUnavailableError(ToolkitError, ValueError):
    pass


class UnknownTemplateError(ToolkitError, KeyError):
    pass


class MissingTemplateError(ToolkitError, ValueError):
    """Raised when a template flagged missing is asked for a pooled vector."""

    def __init__(self, template_id: str):
        super().__init__(f"Template {template_id!r} is missing")
        self.template_id = template_id


class TrainingDivergenceError(ToolkitError, ArithmeticError):
    def __init__(self, message: str, trace: Optional[List[float]] = None):
        super().__init__(message)
        self.trace = list(trace or [])


class SingularSystemError(ToolkitError, ArithmeticError):
    pass
