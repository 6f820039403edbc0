"""Exception types shared across the package."""


class JetflowError(Exception):
    """Base class for all jetflow errors."""


class InvalidInputError(JetflowError, ValueError):
    """Malformed argument: wrong shape, out-of-range order, bad value."""


class SingularJetError(JetflowError):
    """Jet matrix is singular (|det| below the invertibility threshold)."""


class UnsupportedOrderError(JetflowError):
    """Operation not defined for the particle order it was called with."""


class DivergenceError(JetflowError):
    """Integration produced a non-finite state."""

    def __init__(self, step: int, time: float, detail: str = ""):
        self.step = step
        self.time = time
        msg = f"non-finite state at step {step} (t={time:.6g})"
        if detail:
            msg = f"{msg} {detail}"
        super().__init__(msg)


class ConfigError(JetflowError):
    """Configuration file failed validation."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
