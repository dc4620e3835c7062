"""Exception taxonomy shared across the package."""


class SingmixError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGridError(SingmixError):
    """Grid too coarse for the requested domain (too few interior nodes)."""


class UnderResolvedMollifierError(SingmixError):
    """Mollifier width below twice the grid spacing; refine the grid."""


class CoefficientBoundsError(SingmixError):
    """Sampled ellipticity/boundedness check failed for a coefficient."""


class KernelBoundsError(SingmixError):
    """Sampled two-sided kernel bound or symmetry check failed."""


class TailQuadratureError(SingmixError):
    """Exterior-tail quadrature did not converge at some node."""


class NonConvergenceError(SingmixError):
    """Iterative solve exceeded its iteration cap.

    Carries the residual history so callers can inspect stagnation.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class PositivityViolationError(SingmixError):
    """A test function's support touches nodes where the solution is <= 0."""


class IncompleteTableError(SingmixError):
    """A conformance claim needs norms that were never computed."""


class ConfigError(SingmixError):
    """Experiment configuration does not validate against the schema."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
