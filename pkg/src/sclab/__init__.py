"""Numerical laboratory for Dirichlet forms and resistance scaling on the
Sierpinski carpet and its graph approximations."""

__version__ = "0.1.0"

from .errors import (CapacityError, InvalidInputError, SCLabError, SingularSystemError,
                     SolverError)
from .geometry import cell_graph, vertex_graph, vinfty_ball, vinfty_member
from .solver import effective_resistance, green_function, solve_dirichlet

__all__ = [
    "__version__", "SCLabError", "InvalidInputError", "CapacityError", "SolverError",
    "SingularSystemError", "vertex_graph", "cell_graph", "vinfty_ball", "vinfty_member",
    "solve_dirichlet", "effective_resistance", "green_function",
]
