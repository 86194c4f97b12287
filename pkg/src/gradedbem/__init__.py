"""Graded triangle remeshing and Burton-Miller BEM for exterior acoustics."""

from .waves import Medium
from .mesh import (
    TriangleMesh,
    MeshError,
    MeshStats,
    make_sphere_mesh,
    mesh_stats,
    require_valid,
    tag_faces_near,
    validate_mesh,
)
from .meshio import load_mesh, save_mesh
from .projection import SurfaceProjector
from .grading import (
    GradedMeshReport,
    GradingSpec,
    edge_relative_distance,
    grading_value,
    patch_centroid,
    remesh,
    target_edge_length,
)
from .grids import EvalGrid, make_ari_grid, make_eqa_grid
from .fields import PressureField
from .analytic import SphereScene, reference_field
from .bem import (
    BemProblem,
    BoundarySolution,
    PointSource,
    SolverError,
    VibratingPatch,
    assemble,
    calc_hrtf_reciprocal,
    evaluate_exterior,
    solve,
    solve_system,
)
from .metrics import (
    ErrorReport,
    StudyScene,
    StudyTable,
    StudyVariant,
    compare_fields,
    error_study,
    normalized_point_source_field,
    relative_error,
)

__version__ = "0.1.0"

__all__ = [
    "Medium",
    "TriangleMesh",
    "MeshError",
    "MeshStats",
    "make_sphere_mesh",
    "mesh_stats",
    "require_valid",
    "tag_faces_near",
    "validate_mesh",
    "load_mesh",
    "save_mesh",
    "SurfaceProjector",
    "GradingSpec",
    "GradedMeshReport",
    "grading_value",
    "target_edge_length",
    "edge_relative_distance",
    "patch_centroid",
    "remesh",
    "EvalGrid",
    "make_ari_grid",
    "make_eqa_grid",
    "PressureField",
    "SphereScene",
    "reference_field",
    "BemProblem",
    "BoundarySolution",
    "PointSource",
    "SolverError",
    "VibratingPatch",
    "assemble",
    "calc_hrtf_reciprocal",
    "evaluate_exterior",
    "solve",
    "solve_system",
    "ErrorReport",
    "StudyScene",
    "StudyTable",
    "StudyVariant",
    "compare_fields",
    "error_study",
    "normalized_point_source_field",
    "relative_error",
    "__version__",
]
