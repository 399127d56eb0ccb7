"""Equilibrium pore-shape solver for charged nanochannels in an elastomer.

A 2D finite-element study of the lateral interface between a
proton-conducting water channel and the surrounding elastic material:
linear elasticity in the solid, a nonlinear equilibrium potential in the
fluid, and two outer drivers (force-balance fixed point and free-energy
descent) moving the interface.
"""

from .params import (PhysicalParams, RunConfig, Scales, DimensionlessGroups,
                     ConfigError, load_config, nondimensionalize, debye_length)
from .geometry import BoundaryTag, build_reference_domain, InterfaceCollapseError
from .mesh import (Mesh, MeshParams, MeshQuality, FLUID, SOLID, triangulate,
                   deform, remesh, FieldTransfer)
from .elasticity import SolidModel, DisplacementSolution, piola_stress, traction
from .poisson_boltzmann import (PotentialSolution, solve_potential, gen_residual,
                                secondary_fields, slab_profile_oracle, radial_oracle,
                                PBConvergenceError)
from .interface import (InterfaceState, gamma_layout, extend_normal,
                        smoothed_curvature, effective_terms,
                        project_compatibility, extend_displacement)
from .energy import EnergyBreakdown, total_energy, shape_gradient, fd_gradient_check
from .equilibrium import (Status, EquilibriumResult, IterationRecord,
                          run_fixed_point, run_variational, compare_laws,
                          build_context)
from .diagnostics import YLDiscrepancy, yl_discrepancy, yl_band

__version__ = "0.1.0"

__all__ = [
    "PhysicalParams", "RunConfig", "Scales", "DimensionlessGroups", "ConfigError",
    "load_config", "nondimensionalize", "debye_length",
    "BoundaryTag", "build_reference_domain", "InterfaceCollapseError",
    "Mesh", "MeshParams", "MeshQuality", "FLUID", "SOLID", "triangulate",
    "deform", "remesh", "FieldTransfer",
    "SolidModel", "DisplacementSolution", "piola_stress", "traction",
    "PotentialSolution", "solve_potential", "gen_residual", "secondary_fields",
    "slab_profile_oracle", "radial_oracle", "PBConvergenceError",
    "InterfaceState", "gamma_layout", "extend_normal", "smoothed_curvature",
    "effective_terms", "project_compatibility", "extend_displacement",
    "EnergyBreakdown", "total_energy", "shape_gradient", "fd_gradient_check",
    "Status", "EquilibriumResult", "IterationRecord",
    "run_fixed_point", "run_variational", "compare_laws", "build_context",
    "YLDiscrepancy", "yl_discrepancy", "yl_band",
]
