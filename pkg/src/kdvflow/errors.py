"""Exception types shared across the package."""


class KdvFlowError(Exception):
    """Base class for all kdvflow errors."""


class PoleHit(KdvFlowError):
    """Evaluation point coincides with a pole."""


class DegenerateMeasure(KdvFlowError):
    """Two atoms share the same squared position."""


class ConstraintViolated(KdvFlowError):
    """The (1-xi^2)^-1 weighted mass bound fails."""


class NonRealGroupElement(KdvFlowError):
    """Group element is not real on the real axis."""


class QuadratureUnderResolved(KdvFlowError):
    """Doubling the node count moved the result too much."""


class OrderMismatch(KdvFlowError):
    """Operands carry different truncation orders."""


class NearSingular(KdvFlowError):
    """2x2 matrix determinant below the invertibility gate."""


class NearSingularPi(NearSingular):
    """Pi sample too close to singular."""


class ReconstructionFailed(KdvFlowError):
    """Coordinate reconstruction residual exceeded the gate."""


class NoConvergence(KdvFlowError):
    """Determinant did not stabilize under order doubling."""


class TauVanishes(KdvFlowError):
    """Tau function vanished: the subspace leaves the chart."""


class PositivityViolated(KdvFlowError):
    """A quantity required to be positive (semi)definite is not."""


class NearZeroOnCircle(KdvFlowError):
    """Sampled function is too close to zero on the unit circle."""


class NonOddH(KdvFlowError):
    """Flow direction polynomial must be odd with real coefficients."""


class NotUpperHalfPlaneMap(KdvFlowError):
    """Matrix does not map the upper half plane into itself."""


class PoleNotIsolated(KdvFlowError):
    """Pole scan could not isolate a simple pole."""


class BoundaryPoint(KdvFlowError):
    """Point lies on or below the real axis."""


class BlowUp(KdvFlowError):
    """ODE solution exceeded the overflow guard."""


class PhiPole(KdvFlowError):
    """1 + Phi vanishes at the evaluation point."""


class GridTooCoarse(KdvFlowError):
    """Grid has too few points for the requested stencil."""
