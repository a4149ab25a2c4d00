"""Exception types shared across the package."""


class LevyFilterError(Exception):
    """Base class for package errors."""


class ConfigError(LevyFilterError):
    """Scenario configuration is malformed or inconsistent."""


class ModelViolationError(LevyFilterError):
    """A model assumption failed at runtime (intensity out of range, floor breach, ...)."""


class InvertibilityError(ModelViolationError):
    """A matrix that must be invertible is singular or ill conditioned."""


class NumericOverflowError(LevyFilterError):
    """A named term evaluated to a non-finite value."""


class DivergenceError(LevyFilterError):
    """A simulated state left the configured safety ball."""


class DegeneracyError(LevyFilterError):
    """All particle weights collapsed."""


class ReplayMismatchError(LevyFilterError):
    """A replayed run did not reproduce the recorded outputs."""
