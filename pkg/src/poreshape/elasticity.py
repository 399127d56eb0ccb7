"""Solid displacement problem and its interface operators.

The solid is clamped on the outer box walls and driven by a prescribed
displacement on the interface (Dirichlet form) or by a prescribed traction
there (Neumann form, the inverse of the interface-to-traction map used by
the fixed-point driver). Everything operates on the dimensionless groups;
the reference solid pressure enters only loads, stresses and energies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import BoundaryTag
from .mesh import Mesh, SOLID
from .params import DimensionlessGroups
from . import fem


@dataclass(frozen=True)
class DisplacementSolution:
    """Nodal displacement on the solid with its interface bookkeeping."""

    U: np.ndarray                 # (n, 2), zero off the solid region
    reactions: np.ndarray         # (n, 2) K U - F, supported on constrained dofs
    gamma_nodes: np.ndarray       # nodes carrying interface data
    energy_mech: float            # 0.5 b(U,U) - int p_S0 div U (dimensionless)

    def trace(self) -> np.ndarray:
        """Interface displacement (len(gamma_nodes), 2)."""
        return self.U[self.gamma_nodes]


class StressField:
    """Per-solid-triangle first Piola-Kirchhoff stress."""

    def __init__(self, tris: np.ndarray, sigma: np.ndarray, p_S0: float):
        self.tris = tris            # (m, 3) node triples of the solid triangles
        self.sigma = sigma          # (m, 2, 2)
        self.p_S0 = p_S0

    def strain_part(self) -> np.ndarray:
        """sigma + p_S0 * I, the symmetric strain-dependent part."""
        out = self.sigma.copy()
        out[:, 0, 0] += self.p_S0
        out[:, 1, 1] += self.p_S0
        return out


class SolidModel:
    """Assembled elasticity operator on a fixed reference mesh."""

    def __init__(self, mesh: Mesh, nd: DimensionlessGroups,
                 gamma_nodes: np.ndarray | None = None,
                 convention: str = fem.DIAGONAL):
        self.mesh = mesh
        self.nd = nd
        self.convention = convention
        self.K = fem.assemble_elasticity(mesh, SOLID, nd.k_S, nd.G_S, convention)
        self.F = fem.assemble_div_load(mesh, SOLID, nd.p_S0)
        solid_nodes = mesh.region_nodes(SOLID)
        if len(solid_nodes) == 0:
            raise ValueError("mesh has no solid region")
        self.active = fem.vector_dofs(solid_nodes)
        clamped_nodes = np.unique(np.concatenate([
            mesh.nodes_of_tag(BoundaryTag.Z0),
            mesh.nodes_of_tag(BoundaryTag.SIGMA),
            mesh.nodes_of_tag(BoundaryTag.PI),
        ]))
        self.clamped_nodes = clamped_nodes
        # interface node order is the caller's contract (defaults to sorted)
        self.gamma_nodes = (mesh.nodes_of_tag(BoundaryTag.GAMMA)
                            if gamma_nodes is None else np.asarray(gamma_nodes))
        self.gamma_edges = mesh.edges_of_tag(BoundaryTag.GAMMA)

    # -- Dirichlet form ----------------------------------------------------

    def solve_displacement(self, lam: np.ndarray, tol: float = 1e-11) -> DisplacementSolution:
        """Solve with U = lam on the interface, U = 0 on the clamped walls.

        ``lam`` has shape (len(gamma_nodes), 2); it must vanish where the
        interface meets the outer boundary (compatibility).
        """
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (len(self.gamma_nodes), 2):
            raise ValueError("lam must be nodal data on the interface nodes")
        fixed_nodes = np.concatenate([self.clamped_nodes, self.gamma_nodes])
        fixed_vals = np.vstack([np.zeros((len(self.clamped_nodes), 2)), lam])
        sys = fem.DirichletSystem(
            self.K, np.zeros(self.K.shape[0]) + self.F,
            fem.vector_dofs(fixed_nodes), fixed_vals.reshape(-1), self.active,
        )
        u_vec = sys.solve(tol)
        U = fem.deinterleave(u_vec)
        if not np.all(np.isfinite(U)):
            raise fem.SolverError("displacement solve produced non-finite values")
        reactions = fem.deinterleave(self.K @ u_vec - self.F)
        e_mech = 0.5 * float(u_vec @ (self.K @ u_vec)) - float(self.F @ u_vec)
        return DisplacementSolution(U, reactions, self.gamma_nodes, e_mech)

    # -- Neumann form (inverse interface-to-traction map) -------------------

    def dtn_inverse(self, traction: np.ndarray | None = None,
                    load: np.ndarray | None = None, tol: float = 1e-11) -> np.ndarray:
        """Interface displacement produced by a prescribed interface traction.

        ``traction`` is nodal stress-vector data on the interface (exterior
        normal of the fluid), integrated against the trace basis over the
        reference interface; alternatively a pre-assembled interleaved dual
        vector ``load`` is used directly (the convention matches the
        reaction vector of the Dirichlet form: load = K U - F).
        """
        rhs = self.F.copy()
        if load is not None:
            rhs = rhs + load
        if traction is not None:
            rhs = rhs - boundary_vector_functional(self.mesh, self.gamma_edges, traction)
        sys = fem.DirichletSystem(
            self.K, rhs, fem.vector_dofs(self.clamped_nodes),
            np.zeros(2 * len(self.clamped_nodes)), self.active,
        )
        U = fem.deinterleave(sys.solve(tol))
        return U[self.gamma_nodes]

    def dtn_forward(self, lam: np.ndarray) -> np.ndarray:
        """Discrete interface traction functional of a displacement datum.

        Returns the interleaved reaction vector (dual to interface test
        functions); feeding it back through ``dtn_inverse(load=...)``
        reproduces ``lam`` to solver accuracy.
        """
        sol = self.solve_displacement(lam)
        out = np.zeros(self.K.shape[0])
        gdofs = fem.vector_dofs(self.gamma_nodes)
        out[gdofs] = fem.interleave(sol.reactions)[gdofs]
        return out


def boundary_vector_functional(mesh: Mesh, edges: np.ndarray, nodal: np.ndarray) -> np.ndarray:
    """Interleaved vector of int_edges (P1 trace of nodal field) . W."""
    n = mesh.n_nodes
    out = np.zeros(2 * n)
    if len(edges) == 0:
        return out
    p0, p1 = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    L = np.hypot(*(p1 - p0).T)
    f0, f1 = nodal[edges[:, 0]], nodal[edges[:, 1]]
    v0 = L[:, None] * (f0 / 3.0 + f1 / 6.0)
    v1 = L[:, None] * (f0 / 6.0 + f1 / 3.0)
    np.add.at(out, 2 * edges[:, 0], v0[:, 0])
    np.add.at(out, 2 * edges[:, 0] + 1, v0[:, 1])
    np.add.at(out, 2 * edges[:, 1], v1[:, 0])
    np.add.at(out, 2 * edges[:, 1] + 1, v1[:, 1])
    return out


def piola_stress(mesh: Mesh, U: np.ndarray, nd: DimensionlessGroups,
                 convention: str = fem.DIAGONAL) -> StressField:
    """Elementwise stress -p_S0 I + bulk part + g (grad U + grad U^T).

    The bulk part is (k - 2g/3) diag(dU_x/dx, dU_y/dy) under the
    ``diagonal`` convention (the model's literal form) or
    (k - 2g/3) (div U) I under the standard ``trace`` convention.
    """
    tris, _, grad = fem.tri_geometry(mesh, SOLID)
    gu = np.einsum("tik,tid->tkd", grad, U[tris])   # gu[t, k, d] = d U_d / d x_k
    gradU = np.transpose(gu, (0, 2, 1))             # gradU[t, i, j] = d U_i / d x_j
    sigma = nd.G_S * (gradU + np.transpose(gradU, (0, 2, 1)))
    lam_coef = nd.k_S - 2.0 * nd.G_S / 3.0
    if convention == fem.TRACE:
        div = gradU[:, 0, 0] + gradU[:, 1, 1]
        sigma[:, 0, 0] += lam_coef * div - nd.p_S0
        sigma[:, 1, 1] += lam_coef * div - nd.p_S0
    else:
        sigma[:, 0, 0] += lam_coef * gradU[:, 0, 0] - nd.p_S0
        sigma[:, 1, 1] += lam_coef * gradU[:, 1, 1] - nd.p_S0
    return StressField(tris, sigma, nd.p_S0)


REFERENCE = "reference"
CURRENT = "current"


def traction(mesh: Mesh, U: np.ndarray, nd: DimensionlessGroups,
             configuration: str = REFERENCE, convention: str = fem.DIAGONAL):
    """Per-interface-edge traction vectors from the elementwise stress.

    REFERENCE returns sigma0 . nu0 with nu0 the exterior normal of the
    fluid; CURRENT pushes forward to the Cauchy traction on the deformed
    edge. Returns (edges, traction (k,2), measure (k,)) where measure is
    the edge length in the respective configuration.
    """
    edges = mesh.edges_of_tag(BoundaryTag.GAMMA)
    stress = piola_stress(mesh, U, nd, convention)
    edge_tri = _edge_to_region_triangle(mesh, edges, SOLID)
    tvec = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
    L0 = np.hypot(*tvec.T)
    nu0 = np.stack([tvec[:, 1], -tvec[:, 0]], axis=1) / L0[:, None]
    sig = stress.sigma[edge_tri]
    if configuration == REFERENCE:
        return edges, np.einsum("kij,kj->ki", sig, nu0), L0
    if configuration != CURRENT:
        raise ValueError("configuration must be 'reference' or 'current'")
    tris, _, grad = fem.tri_geometry(mesh, SOLID)
    gu = np.einsum("tik,tid->tdk", grad, U[tris])   # dU_d/dx_k
    Fg = gu[edge_tri]
    Fg[:, 0, 0] += 1.0
    Fg[:, 1, 1] += 1.0
    detF = Fg[:, 0, 0] * Fg[:, 1, 1] - Fg[:, 0, 1] * Fg[:, 1, 0]
    if np.any(detF <= 0):
        raise fem.SolverError("non-invertible deformation gradient on an interface element")
    # Cauchy stress sigma = sigma0 F^T / det F; current edge vector = F t
    cauchy = np.einsum("kij,klj->kil", sig, Fg) / detF[:, None, None]
    tcur = np.einsum("kij,kj->ki", Fg, tvec)
    Lc = np.hypot(*tcur.T)
    nuc = np.stack([tcur[:, 1], -tcur[:, 0]], axis=1) / Lc[:, None]
    return edges, np.einsum("kij,kj->ki", cauchy, nuc), Lc


def _edge_to_region_triangle(mesh: Mesh, edges: np.ndarray, region: int) -> np.ndarray:
    """Index (into the region's triangle list) of the triangle on each edge."""
    tris = mesh.triangles_of(region)
    lookup = {}
    for t, (a, b, c) in enumerate(tris):
        for e in ((a, b), (b, c), (c, a)):
            lookup[tuple(sorted((int(e[0]), int(e[1]))))] = t
    out = np.empty(len(edges), dtype=np.int64)
    for k, (i, j) in enumerate(edges):
        key = tuple(sorted((int(i), int(j))))
        if key not in lookup:
            raise ValueError("interface edge not adjacent to the region")
        out[k] = lookup[key]
    return out
