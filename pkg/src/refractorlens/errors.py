"""Exception types shared across the package."""


class RefractorError(Exception):
    """Base class for all package errors."""


class DomainViolation(RefractorError):
    """A query direction lies outside the refracting cap of an ellipsoid."""


class TotalInternalReflection(RefractorError):
    """Incidence angle too shallow: the ray is not transmitted."""


class TotalReflectionRisk(RefractorError):
    """A lattice pair violates the no-total-reflection condition."""


class DegenerateAxes(RefractorError):
    """Two ellipsoid axes coincide; the dominance disk is undefined."""


class StaleCache(RefractorError):
    """An assignment cache does not match the coefficient vector it is used with."""


class NoFeasibleStep(RefractorError):
    """The discrete measure skips the target window; the grid is too coarse."""

    def __init__(self, msg, recommended_grid_size=None):
        super().__init__(msg)
        self.recommended_grid_size = recommended_grid_size


class SweepCapExceeded(RefractorError):
    """The sweep loop hit its safety cap before stabilizing."""


class DegenerateStart(RefractorError):
    """Quasi-Newton refinement started inside a flat (degenerate) region."""


class DimensionMismatch(RefractorError):
    """Coefficient vector length does not match its lattice."""


class UnsupportedFormat(RefractorError):
    """Unknown mesh or image format."""


class AllDark(RefractorError):
    """Every pixel of the target image is zero."""


class ConfigError(RefractorError):
    """Inconsistent solver or pipeline configuration."""


class StageError(RefractorError):
    """Failure inside one stage of a multiresolution schedule."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
