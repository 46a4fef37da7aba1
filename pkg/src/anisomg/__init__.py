"""Two-level multigrid for rotated anisotropic diffusion on P1 triangles.

The package builds rotated uniform meshes and their regular refinements,
assembles the fine and coarse problems, and measures the energy-norm
contraction of a two-level cycle with point or line Gauss-Seidel smoothing.
"""
from .assembly import DofMap, ProblemConfig, assemble_mass, assemble_stiffness
from .mesh import (Hierarchy, Mesh, MeshError, MeshFormatError, MeshSpec, OrientationError,
                   build_rotated_uniform, jitter_interior, load_mesh, refine_regular,
                   refine_times, save_mesh)
from .smoothers import Smoother, SmootherConfig, SmootherError
from .strips import StripDecomposition, build_strips
from .transfer import CoarseCorrection, injection, prolongation
from .twolevel import (DivergenceError, RateReport, TwoLevelOperator, build_case,
                       estimate_rate, solve)

__version__ = "0.1.0"

__all__ = [
    "CoarseCorrection", "DivergenceError", "DofMap", "Hierarchy", "Mesh", "MeshError",
    "MeshFormatError", "MeshSpec", "OrientationError", "ProblemConfig", "RateReport",
    "Smoother", "SmootherConfig", "SmootherError", "StripDecomposition", "TwoLevelOperator",
    "assemble_mass", "assemble_stiffness", "build_case", "build_rotated_uniform",
    "build_strips", "estimate_rate", "injection", "jitter_interior", "load_mesh",
    "prolongation", "refine_regular", "refine_times", "save_mesh", "solve",
]
