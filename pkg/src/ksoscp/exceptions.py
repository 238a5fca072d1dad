"""Exception types raised across the package."""


class KsosError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(KsosError):
    """Cholesky factorization failed even after the jitter cap was reached.

    Usually caused by duplicated or nearly coincident inputs.
    """


class SingularSystem(KsosError):
    """The linear system ``C(Gamma, theta) gamma = Diag(Gamma_a) Y`` is singular."""

    def __init__(self, message, fold=None):
        super().__init__(message)
        self.fold = fold


class NotConverged(KsosError):
    """The dual solver hit ``max_iter`` before its convergence tests passed.

    Only raised in strict mode; otherwise the solver returns its best
    iterate together with diagnostics.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitFailed(KsosError):
    """Every Gaussian-process likelihood start failed to factorize."""


class TuneFailed(KsosError):
    """Every candidate lengthscale evaluation failed during HSIC tuning."""


class ConfigError(KsosError):
    """Malformed configuration file or unsupported option."""
