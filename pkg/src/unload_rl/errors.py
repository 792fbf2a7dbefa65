"""Exception hierarchy shared across the package."""


class UnloadError(Exception):
    """Base class for all package errors."""


class ConfigError(UnloadError, ValueError):
    """Invalid configuration values or config file."""


class InputError(UnloadError, ValueError):
    """An argument is malformed (bad shape, pixel out of bounds, ...)."""


class ProtocolError(UnloadError, RuntimeError):
    """An operation was called in a state that does not allow it."""


class NoActionError(UnloadError, RuntimeError):
    """No valid action exists (e.g. the stack is empty)."""


class NumericalError(UnloadError, ArithmeticError):
    """Non-finite values appeared during a forward or backward pass."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"
