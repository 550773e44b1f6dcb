"""Exception types shared across the package."""


class StochfgError(Exception):
    """Base class for package errors."""


class ArgumentError(StochfgError, ValueError):
    """Invalid argument value or shape."""


class DomainError(StochfgError):
    """Operation undefined for the given object (e.g. non-observable graph)."""


class CapabilityError(StochfgError):
    """Requested exact computation exceeds the supported size cap."""


class ConfigurationError(StochfgError):
    """Inconsistent experiment or algorithm configuration."""


class ProtocolError(StochfgError):
    """Environment/learner interaction violated the feedback protocol."""


class StateError(StochfgError):
    """Learner state is invalid (non-finite values, wrong phase)."""
