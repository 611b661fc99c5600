"""Exception hierarchy for mfeit.

Every error carries the process exit code the command line reports for it:
2 for configuration problems, 3 for solver failures, 4 for I/O and 5 for detection.
"""


class MfeitError(Exception):
    """Base class of all mfeit errors."""

    exit_code = 1


# Configuration family (exit 2)
class ConfigError(MfeitError, ValueError):
    """Invalid configuration or input parameters."""

    exit_code = 2


class InvalidGeometry(ConfigError):
    """Geometry violates a structural invariant (degenerate segment, thick strip, ...)."""


class SeparationViolation(ConfigError):
    """Two inclusions, or an inclusion and the boundary, are closer than d0."""


class OutOfDomain(ConfigError):
    """A point or an inclusion lies outside the domain disk."""


class InvalidMaterials(ConfigError):
    """Material parameters outside the insulating/conductive regime."""


class DegenerateContrast(ConfigError):
    """A contrast ratio has a vanishing denominator or numerator where division is needed."""


class BadIndex(ConfigError):
    """Electrode or injection index out of range."""


class SegmentNotFound(ConfigError):
    """Unknown segment id."""


class DimensionMismatch(ConfigError):
    """Arrays defined on different pixelations or electrode counts."""


class TooFewFrequencies(ConfigError):
    """Fewer frequencies than an operation needs."""


# Solver family (exit 3)
class SolverError(MfeitError):
    """Numerical failure inside a solver."""

    exit_code = 3


class SolveFailure(SolverError):
    """Linear system could not be solved to the required residual."""


class MeshFailure(SolverError):
    """Triangulation failed or violated quality checks after all retries."""


class DegenerateCoupling(SolverError):
    """Interface coupling removed a path to the boundary, leaving a floating region."""


class SingularSystem(SolverError):
    """Unregularized inversion of a rank-deficient sensitivity matrix."""


class NumericalFailure(SolverError):
    """Dense factorization did not converge or returned non-finite values."""


class IllConditioned(SolverError):
    """Integral equation resolvent evaluated too close to its spectrum."""


class PoleEvaluation(SolverError, ValueError):
    """Meromorphic function evaluated at (or within tolerance of) a pole."""


# I/O family (exit 4)
class IOFailure(MfeitError):
    """Unreadable, unwritable or corrupted artifact."""

    exit_code = 4


# Detection family (exit 5)
class DetectionFailure(MfeitError):
    """Geometry could not be identified from boundary data."""

    exit_code = 5


class ModelOrderFailure(DetectionFailure):
    """No pole model up to the allowed order fits the samples."""


class PoleCollision(DetectionFailure):
    """Recovered poles closer than the resolvable separation."""
