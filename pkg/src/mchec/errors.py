"""Exception hierarchy shared by every mchec module."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from mchec.solver import CalibrationResult


class MchecError(Exception):
    """Base class for all errors raised by mchec."""


class _LocatedError(MchecError):
    """Error tied to a file, optionally to a line inside it."""

    def __init__(self, message: str, path: Path | str | None = None, line: int | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = f"{self.path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class FormatError(_LocatedError):
    """A file is malformed (syntax, wrong corner count, missing keys)."""


class ValidationError(_LocatedError):
    """Data parsed fine but violates a dataset rule."""


class ConfigError(MchecError):
    """Invalid configuration or option value."""


class UnknownPreset(ConfigError):
    pass


class PointBehindCamera(MchecError):
    pass


class DegenerateConfiguration(MchecError):
    """A linear system is rank deficient (e.g. collinear board corners)."""


class InsufficientMotion(MchecError):
    """Robot motions do not excite enough rotation to solve AX=XB."""

    def __init__(self, message: str, camera: int | None = None) -> None:
        self.camera = camera
        if camera is not None:
            message = f"camera {camera}: {message}"
        super().__init__(message)


class NumericalFailure(MchecError):
    """The damped normal equations could not be solved."""

    def __init__(self, message: str, last_result: CalibrationResult | Any | None = None) -> None:
        self.last_result = last_result
        super().__init__(message)


class DimensionMismatch(MchecError):
    pass


class MissingBoardPose(MchecError):
    pass
