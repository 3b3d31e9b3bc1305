"""Exception types raised across the package."""


class GuidedReconError(ValueError):
    """Base class for all library errors."""


class DimensionMismatch(GuidedReconError):
    """Operands live in spaces of different dimensions."""


class RankDeficient(GuidedReconError):
    """A spanning set has zero numerical rank."""


class EmptySubspace(GuidedReconError):
    """A nonempty subspace was required."""


class NoObliqueProjection(GuidedReconError):
    """The oblique projection system is singular or inconsistent for this input."""


class NumericalBreakdown(GuidedReconError):
    """Non-finite values appeared during an iterative solve."""


class DivergentBound(GuidedReconError):
    """A convergence bound is undefined because cos(theta_max) = 0."""


class MissingFrame(GuidedReconError):
    """The guiding projector exposes no synthesis/analysis frame."""


class MissingPrerequisite(GuidedReconError):
    """A required earlier result was not supplied."""


class NotComplementary(GuidedReconError):
    """The restriction subspace is not complementary to the solution nullspace."""


class HypothesisViolated(GuidedReconError):
    """A theorem hypothesis required by this check does not hold."""


class IsolatedNode(GuidedReconError):
    """The graph has a node of degree zero."""


class BlockMismatch(GuidedReconError):
    """The block factor does not divide the image side length."""


class OutOfRange(GuidedReconError):
    """A scalar parameter lies outside its admissible interval."""


class IllPosedWarning(UserWarning):
    """cos(theta_max) vanishes; the reconstruction may not exist for all inputs."""
