"""Exception types shared across the package."""


class KRFlowError(Exception):
    """Base class for all package errors."""


class NonKaehler(KRFlowError):
    """A constructed coefficient pair has a nonpositive entry."""


class GridTooCoarse(KRFlowError):
    """Fewer grid points than the finite-difference stencils require."""


class GridNotPositive(KRFlowError):
    """Grid must be strictly positive for this model family."""


class RegimeMismatch(KRFlowError):
    """Base geometry is incompatible with the requested model family."""


class OutOfRange(KRFlowError):
    """Requested point or window lies outside the sampled grid."""


class TooCloseToBoundary(KRFlowError):
    """Evaluation point is inside the untrusted boundary margin."""


class InterpolationRangeExceeded(KRFlowError):
    """Tabulated function does not cover the required argument range."""


class WindowOutsideGrid(KRFlowError):
    """Rescaled window maps outside the trajectory grid."""


class HorizonExceeded(KRFlowError):
    """Trajectory does not cover the requested (rescaled) times."""


class LatticeMismatch(KRFlowError):
    """Sample arrays do not share a common lattice."""


class WindowTooSmall(KRFlowError):
    """Fit window contains too few samples."""


class StabilityViolation(KRFlowError):
    """Explicit time step exceeds the parabolic stability bound."""


class NoConvergence(KRFlowError):
    """Inner iteration failed to reach tolerance within the cap."""


class OddWeightConstant(KRFlowError):
    """Free constants of odd weight must vanish in the invariant reduction."""


class ConfigInvalid(KRFlowError):
    """Experiment configuration failed validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SingularityKind:
    PSI_COLLAPSE = "PsiCollapse"
    PHI_COLLAPSE = "PhiCollapse"
    GRADIENT_BLOWUP = "GradientBlowup"


class Singularity(KRFlowError):
    """First-singularity detection: a coefficient floor was crossed."""

    def __init__(self, time: float, location: float, kind: str):
        self.time = time
        self.location = location
        self.kind = kind
        super().__init__(f"{kind} at t={time:.6g}, rho={location:.6g}")
