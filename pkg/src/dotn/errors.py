"""Exception and warning types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class MarginalError(ValueError):
    """A histogram or pair of marginals is not a valid transport instance."""


class CouplingError(ValueError):
    """A transport plan violates its marginal constraints."""


class StateError(RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""


class DataError(ValueError):
    """A signal or dataset argument is unusable (empty, zero power, too short)."""


class ConfigError(ValueError):
    """An experiment or corpus configuration is invalid.

    The message starts with the dotted path of the offending field, e.g.
    ``corpus.snr_grid_db: must not be empty``.
    """


class SinkhornConvergenceWarning(UserWarning):
    """Sinkhorn stopped at max_iters before reaching the requested tolerance.

    Carries the achieved marginal violation in ``violation``.
    """

    def __init__(self, message: str, violation: float):
        super().__init__(message)
        self.violation = violation
