"""Exception types shared across the package."""


class NdlsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(NdlsError, ValueError):
    """Invalid configuration value or parameter outside its domain."""


class DataError(NdlsError, ValueError):
    """Malformed input data: parse failures, bounds or shape mismatches."""


class NumericalError(NdlsError, RuntimeError):
    """Numerical failure (divergence, non-convergence).

    ``residual`` carries the last iteration residual for convergence
    failures; ``epoch`` carries the epoch index for training divergence.
    """

    def __init__(self, message: str, *, residual: float | None = None,
                 epoch: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.epoch = epoch
