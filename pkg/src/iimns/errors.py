"""Exception types raised across the package."""


class IIMError(Exception):
    """Base class for all package errors."""


class NotMeanZero(IIMError):
    """Input to an inverse Laplacian has a nonzero mean."""


class NotInRange(IIMError):
    """Input to the wide-Laplacian inverse has content on its null modes."""


class GeometryDegenerate(IIMError):
    """Interface self-intersects or comes too close to its periodic images."""


class RootNotBracketed(IIMError):
    """Signed distance has no sign change on a segment flagged as crossing."""


class MultipleCrossings(IIMError):
    """A node changes side more than once within one time step."""


class MissingTangentialDerivative(IIMError):
    """The surface divergence of the tangential force cannot be evaluated."""


class MissingJumps(IIMError):
    """A JumpSet lacks entries needed by a correction builder."""


class ConstructionInvalid(IIMError):
    """A manufactured case failed its self-validation."""


class Diverged(IIMError):
    """The time integration produced non-finite or exploding values."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class ConfigError(IIMError):
    """Invalid or unparseable configuration."""
