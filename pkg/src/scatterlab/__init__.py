"""scatterlab: boundary scattering energy of convex domains on surfaces.

The energy is half the double boundary integral of the squared mismatch
between the outward normal at one point and the chord-reflected,
parallel-transported normal from another.  The package computes it
directly, cross-checks it through interior and chord-fan identities,
verifies the curvature-weighted isoperimetric bound and a Sobolev chain,
and extends the identity checks to constant-curvature model spaces of any
dimension.
"""

from .boundary import (
    BoundaryCurve,
    build_boundary,
    circle_points,
    ellipse_points,
    fourier_points,
    geodesic_circle,
    geodesic_curvature,
    interior_quadrature,
    outward_normal,
)
from .chords import (
    ChordFan,
    ChordField,
    SymmetryDiagnostics,
    boundary_map_checks,
    boundary_pair_grids,
    build_chords,
    chord_field,
    curvature_from_chords,
    energy_via_chords,
    santalo_check,
    symmetry_diagnostics,
)
from .config import RunConfig, emit, load, make_domain, make_metric, parse, save
from .energy import (
    EnergyReport,
    bol_check,
    boundary_residual_grid,
    deficit_identity_rhs,
    mixed_identity_rhs,
    scattering_energy_direct,
)
from .errors import (
    ConfigError,
    ConjugatePointError,
    DomainShapeError,
    HypothesisError,
    NonConvergenceError,
    ScatterlabError,
    WorkingRegionError,
)
from .geodesics import (
    GeodesicSolution,
    Tangent,
    connect,
    parallel_transport,
    reflect_transport,
    shoot,
)
from .highdim import (
    HDDomain,
    ModelSpace,
    divergence_radial_fd,
    divergence_reflection_fd,
    energy_p_direct,
    energy_p_identity,
    interior_radial_integral,
    reflect_hd,
    unit_sphere_area,
    unit_sphere_grid,
)
from .jacobi import (
    JacobiData,
    curvature_sandwich,
    jacobi_along,
    jacobi_batch,
    point_source_flux,
    reflection_divergence_check,
    reflection_divergence_weight,
)
from .metrics import (
    ConformalChart,
    ConstantCurvature,
    Metric,
    SurfaceOfRevolution,
    comparison_fns,
    cs,
    ct,
    gauss_curvature,
    sn,
)
from .report import RunReport, convergence_study, emit_artifacts, run_tasks
from .sobolev import (
    TestFunction,
    chain_check,
    crossterm_double_integral,
    function_norms,
    make_cone,
    make_gaussian,
    make_tensor_bump,
    sobolev_sides,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # metrics
    "Metric", "ConformalChart", "ConstantCurvature", "SurfaceOfRevolution",
    "sn", "cs", "ct", "comparison_fns", "gauss_curvature",
    # geodesics
    "Tangent", "GeodesicSolution", "shoot", "connect",
    "parallel_transport", "reflect_transport",
    # jacobi
    "JacobiData", "jacobi_along", "jacobi_batch",
    "reflection_divergence_weight", "reflection_divergence_check",
    "curvature_sandwich", "point_source_flux",
    # boundary
    "BoundaryCurve", "build_boundary", "circle_points", "ellipse_points",
    "fourier_points", "geodesic_circle", "outward_normal",
    "geodesic_curvature", "interior_quadrature",
    # energy
    "EnergyReport", "scattering_energy_direct", "boundary_residual_grid",
    "deficit_identity_rhs", "mixed_identity_rhs", "bol_check",
    # chords
    "ChordFan", "ChordField", "SymmetryDiagnostics", "build_chords",
    "chord_field", "boundary_pair_grids", "santalo_check",
    "energy_via_chords", "boundary_map_checks", "curvature_from_chords",
    "symmetry_diagnostics",
    # sobolev
    "TestFunction", "make_cone", "make_gaussian", "make_tensor_bump",
    "function_norms", "sobolev_sides", "crossterm_double_integral",
    "chain_check",
    # highdim
    "ModelSpace", "HDDomain", "unit_sphere_area", "unit_sphere_grid",
    "reflect_hd", "energy_p_direct", "energy_p_identity",
    "interior_radial_integral", "divergence_reflection_fd",
    "divergence_radial_fd",
    # config / report
    "RunConfig", "parse", "emit", "load", "save", "make_metric",
    "make_domain", "RunReport", "run_tasks", "convergence_study",
    "emit_artifacts",
    # errors
    "ScatterlabError", "ConfigError", "NonConvergenceError",
    "ConjugatePointError", "WorkingRegionError", "HypothesisError",
    "DomainShapeError",
]
