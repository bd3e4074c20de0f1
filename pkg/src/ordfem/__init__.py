"""Mixed finite elements on Kuhn-split cube meshes for order-reduced fourth-order problems."""
from .assembly import BlockSystem, Norm, ProblemKind, ProblemSpec, assemble_gram, assemble_load, assemble_operator
from .errors import OrdfemError
from .fe_spaces import BC, SpaceKind, make_space
from .manufactured import manufactured_problem, manufactured_solution
from .mesh import Mesh, build_structured_cube
from .solver import solve_direct, solve_minres

__version__ = "0.1.0"

__all__ = [
    "BC",
    "BlockSystem",
    "Mesh",
    "Norm",
    "OrdfemError",
    "ProblemKind",
    "ProblemSpec",
    "SpaceKind",
    "assemble_gram",
    "assemble_load",
    "assemble_operator",
    "build_structured_cube",
    "make_space",
    "manufactured_problem",
    "manufactured_solution",
    "solve_direct",
    "solve_minres",
]
