"""Exception hierarchy shared by all modules."""


class BilliardError(Exception):
    """Base class for every error raised by billiard_zeta."""


class ConfigError(BilliardError):
    """Malformed scene/run configuration (CLI exit code 3)."""


class GeometryError(BilliardError):
    """Overlapping obstacles or otherwise invalid geometry."""


class BoundaryError(GeometryError):
    """A point expected on an obstacle boundary is not on it."""


class DomainError(GeometryError):
    """A ray starts strictly inside an obstacle."""


class FrameError(BilliardError):
    """A transverse frame is not orthonormal / not transverse."""


class EscapeError(BilliardError):
    """A ray leaves the scene without hitting an obstacle."""


class GrazingError(BilliardError):
    """Reflection too close to tangential incidence."""


class AlphabetError(BilliardError):
    """Word symbol outside ``1..r``."""


class AdmissibilityError(BilliardError):
    """Word violates the cyclic adjacency rule."""


class ConvergenceError(BilliardError):
    """Iterative solver failed; ``best`` carries the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CertificationError(ConvergenceError):
    """Solver finished but the residual is above tolerance."""


class DegeneracyError(BilliardError):
    """Singular Hessian / Jacobian during Newton refinement."""


class ContractionError(BilliardError):
    """Fixed-point iteration of the unstable-plane map did not converge."""


class HyperbolicityError(BilliardError):
    """An expanding multiplier has modulus <= 1."""


class InputError(BilliardError):
    """Empty or otherwise unusable input data."""


class UnsupportedDimensionError(BilliardError):
    """Operation only implemented in a specific dimension."""


class CoverageError(BilliardError):
    """Orbit database does not cover a requested length window."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ProvenanceError(BilliardError):
    """Database and scene/config hashes disagree (CLI exit code 5)."""
