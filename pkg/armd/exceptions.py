"""Exception hierarchy.

Every error derives from ``ValueError`` so callers that only guard against
bad input keep working; the CLI maps the whole family to exit code 1.
"""
from typing import Optional


class ArmdError(ValueError):
    """Base class for toolkit errors."""


class InvalidInputError(ArmdError):
    """Numerically invalid input (non-finite pulse, non-Hermitian operator, bad shape)."""


class ConfigurationError(ArmdError):
    """Gate configuration that cannot be simulated as given."""


class PresetNotFoundError(ArmdError):
    """Unknown preset name."""


class NotApplicableError(ArmdError):
    """Operation does not apply to this kind of value."""


class UndefinedPhaseError(ArmdError):
    """A phase was requested from an amplitude too small to carry one."""


class DecompositionUndefinedError(ArmdError):
    """Phase decomposition requested for a state that does not return."""


class PulseFileError(ArmdError):
    """Malformed pulse or problem document."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
