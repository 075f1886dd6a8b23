"""Exception hierarchy shared across the package."""


class DarcygrainError(Exception):
    """Base class for all package errors."""


class ValidationError(DarcygrainError):
    """Invalid parameters or inconsistent inputs."""


class ConfigError(DarcygrainError):
    """Run configuration failed validation (field-level message)."""


class BudgetExceededError(DarcygrainError):
    """A rejection-sampling budget ran out before the request was met."""


class SolverError(DarcygrainError):
    """A linear or saddle-point solve failed to converge."""

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)
        self.residual = residual


class DisconnectedPoreError(DarcygrainError):
    """Pore space is not a single 4-connected component."""


class StaleCacheError(DarcygrainError):
    """Posterior moment caches do not match the current latent parameters."""


class DataFormatError(DarcygrainError):
    """On-disk dataset files are malformed or mutually inconsistent."""


class TrainingDivergedError(DarcygrainError):
    """The training objective became non-finite."""
