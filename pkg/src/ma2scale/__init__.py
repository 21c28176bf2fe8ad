"""Two-scale method for the Dirichlet Monge-Ampère equation ``det D^2 u = f``."""
from .directions import DirectionSet, build_direction_set, nearest_pair
from .errors import (
    AssemblyError,
    ConstructionError,
    GeometryError,
    InvalidArgument,
    InvalidData,
    LinearSolverError,
    MA2ScaleError,
    NonConvergenceError,
    OutOfDomainError,
)
from .fem import (
    NodalField,
    assemble_p1_poisson,
    evaluate,
    interpolate,
    linf_node_error,
    lumped_l2_norm,
    lumped_masses,
)
from .mesh import (
    BarycentricHit,
    TriangleMesh,
    build_polygon_mesh,
    build_unit_square_mesh,
    refine_uniform,
)
from .operator import (
    OperatorEval,
    StencilTable,
    TwoScaleParams,
    apply_operator,
    build_stencils,
    is_discretely_convex,
    second_difference,
    truncation_error_map,
)
from .problems import Benchmark, ProblemSpec, builtin, exact_error, parse_expression
from .solvers import (
    NewtonReport,
    assemble_jacobian,
    hull_subsolution,
    newton_solve,
    perron_solve,
    poisson_initial_guess,
)
from .sparse import solve_sparse, spmv

__version__ = "0.1.0"
