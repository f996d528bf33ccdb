"""Locking-free Reissner-Mindlin plate solver on convex quadrilateral meshes.

Continuous Q2 displacements are paired with element-wise discontinuous
rotations in Q_{1,2} x Q_{2,1}, mapped covariantly so that the gradient of
every discrete displacement is itself a discrete rotation.  A symmetric
interior-penalty form handles the discontinuities.
"""

from .analysis import ExactSolution, convergence_rates, verify_manufactured_residual
from .assembly import MaterialParams, SparseSystem, assemble
from .mapping import RotationVariant
from .mesh import (
    QuadMesh,
    generate_perturbed_mesh,
    generate_trapezoid_sequence,
    read_mesh,
    uniform_mesh,
    write_mesh,
)
from .solver import NotPositiveDefiniteError, Solution, SolverError, solve_spd
from .spaces import DofMap, build_dof_map

__all__ = [
    "DofMap",
    "ExactSolution",
    "MaterialParams",
    "NotPositiveDefiniteError",
    "QuadMesh",
    "RotationVariant",
    "Solution",
    "SolverError",
    "SparseSystem",
    "assemble",
    "build_dof_map",
    "convergence_rates",
    "generate_perturbed_mesh",
    "generate_trapezoid_sequence",
    "read_mesh",
    "solve_spd",
    "uniform_mesh",
    "verify_manufactured_residual",
    "write_mesh",
]
