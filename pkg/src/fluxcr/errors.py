"""Exception types shared across the toolkit."""


class FluxcrError(Exception):
    """Base class for toolkit-specific failures."""


class ConvergenceError(FluxcrError):
    """A numerical procedure failed to reach its accuracy target."""


class NoDoubleWellError(FluxcrError):
    """Well geometry requested outside the double-well regime (E_L >= E_J)."""


class LabelingError(FluxcrError):
    """Floquet branch labeling became ambiguous along an amplitude sweep."""


class HybridizationError(FluxcrError):
    """A dressed state could not be matched to a bare product state."""


class BudgetUnreachableError(FluxcrError):
    """The requested residual-ZZ budget has no solution in the search bracket."""


class NoOptimumError(FluxcrError):
    """Optimal-amplitude search had no feasible grid point."""


class AliasingError(FluxcrError):
    """Fourier coefficients did not decay below threshold at the cutoff."""


class PoleProximityError(FluxcrError):
    """Spectral density requested too close to an excluded pole."""


class DimensionError(FluxcrError):
    """Inclusion-exclusion refused: too many collision events."""
