"""Bernstein DG solver with monolithic convex limiting for hyperbolic conservation laws."""
from .law import Advection, Burgers, ConservationLaw, Euler, InvariantViolation, ShallowWater
from .limiter import SemiDiscretization, limited_rhs
from .mesh import Mesh, MeshError, build_structured_line_mesh, build_structured_quad_mesh, read_unstructured_tri_mesh
from .space import DGSpace

__all__ = [
    "Advection", "Burgers", "ConservationLaw", "Euler", "InvariantViolation", "ShallowWater",
    "SemiDiscretization", "limited_rhs", "Mesh", "MeshError", "build_structured_line_mesh",
    "build_structured_quad_mesh", "read_unstructured_tri_mesh", "DGSpace",
]
__version__ = "0.1.0"
