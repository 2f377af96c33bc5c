"""Exception hierarchy shared by all spinbath modules."""


class SpinBathError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SpinBathError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(SpinBathError, ValueError):
    """Operands are incompatible (basis mismatch, unnormalized input, ...)."""


class CapacityError(SpinBathError):
    """A dense solve was requested beyond the configured dimension cap."""


class PropagationError(SpinBathError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ConfigError(SpinBathError, ValueError):
    """Malformed or inconsistent configuration."""


class OutputError(SpinBathError, OSError):
    """Writing a result file failed; ``path`` names the file."""

    def __init__(self, path, cause):
        super().__init__(f"cannot write {path}: {cause}")
        self.path = str(path)
