"""Far-field freeform lens design by supporting semi-ellipsoids.

Given a point source illuminating a patch of the unit sphere and a finite set
of prescribed output directions with intensities, the package constructs the
refracting surface as a minimum of semi-ellipsoids, matches the traced
intensities by monotone coordinate descent with optional quasi-Newton
refinement, verifies the result by forward ray tracing, and exports the lens
as a triangulated mesh.
"""

from .errors import (AllDark, ConfigError, DegenerateAxes, DegenerateStart,
                     DimensionMismatch, DomainViolation, NoFeasibleStep,
                     RefractorError, StageError, StaleCache, SweepCapExceeded,
                     TotalInternalReflection, TotalReflectionRisk,
                     UnsupportedFormat)
from .estimator import FarFieldRefractor
from .geometry import (DiskRegion, RefractionConstant, RefractionEvent,
                       check_no_total_reflection, classify_dominance_disk,
                       geodesic_distance, normalize, polar_radius, refract,
                       second_focus)
from .pgm import IntensityImage, read_pgm, write_pgm
from .pipeline import (SourceLattice, TargetLattice, build_lattices,
                       export_mesh, forward_render, image_to_targets,
                       surface_vertices)
from .refine import (RefineConfig, ResidualSystem, interpolate_coefficients,
                     multires_schedule, quasi_newton_solve)
from .refractor import (Assignment, SourceGrid, TargetSpec,
                        degenerate_region_membership, measure,
                        refractor_radius, trace_all, update_component)
from .solver import (SolveReport, SolverConfig, adjust_component,
                     initial_admissible, iteration_bound, lipschitz_probe,
                     solve, sweep)

__version__ = "0.1.0"

__all__ = [
    "AllDark", "Assignment", "ConfigError", "DegenerateAxes",
    "DegenerateStart", "DimensionMismatch", "DiskRegion", "DomainViolation",
    "FarFieldRefractor", "IntensityImage", "NoFeasibleStep",
    "RefineConfig", "RefractionConstant", "RefractionEvent", "RefractorError",
    "ResidualSystem", "SolveReport", "SolverConfig", "SourceGrid",
    "SourceLattice", "StageError", "StaleCache", "SweepCapExceeded",
    "TargetLattice", "TargetSpec", "TotalInternalReflection",
    "TotalReflectionRisk", "UnsupportedFormat",
    "adjust_component", "build_lattices", "check_no_total_reflection",
    "classify_dominance_disk", "degenerate_region_membership", "export_mesh",
    "forward_render", "geodesic_distance", "image_to_targets",
    "initial_admissible", "interpolate_coefficients", "iteration_bound",
    "lipschitz_probe", "measure", "multires_schedule", "normalize",
    "polar_radius", "quasi_newton_solve", "read_pgm", "refract",
    "refractor_radius", "second_focus", "solve", "surface_vertices", "sweep",
    "trace_all", "update_component", "write_pgm",
]
