"""P1 (linear triangle) finite element kernels on tagged meshes.

Conventions:

* scalar fields: one dof per node, global numbering = node index;
* vector fields: interleaved dofs, ``dof = 2*node + component``;
* quadrature: 3-point edge-midpoint rule on triangles (exact for P1*P1
  products), 2-point Gauss on boundary edges; nonlinear ``exp(u)`` terms
  evaluate the P1 interpolant of u at the triangle quadrature points.

Matrices are assembled over the full node set but carry entries only for
the requested region; callers restrict solves to the active dofs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BoundaryTag
from .mesh import ALL, Mesh


class SolverError(RuntimeError):
    """Linear solve failed (singular or indefinite system)."""


def tri_geometry(mesh: Mesh, region: int = ALL):
    """Areas and P1 gradient coefficients of the region's triangles.

    Returns ``(tris, area, grad)`` with ``grad[t, i, :]`` the gradient of
    the barycentric basis of local node ``i``.
    """
    tris = mesh.triangles_of(region)
    p = mesh.nodes[tris]
    x, y = p[..., 0], p[..., 1]
    area2 = ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
             - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grad = np.stack([b, c], axis=2) / area2[:, None, None]
    return tris, 0.5 * area2, grad


_MIDPOINT_W = np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
# basis values at the three edge midpoints
_MIDPOINT_PHI = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])


def _coef_at_centroids(coef, mesh, tris):
    if callable(coef):
        cent = mesh.nodes[tris].mean(axis=1)
        return np.asarray(coef(cent), dtype=float)
    return np.full(len(tris), float(coef))


def assemble_scalar(mesh: Mesh, region: int, a=1.0, r=0.0, f=0.0):
    """Stiffness + mass matrix and load vector of -div(a grad u) + r u = f.

    ``a``, ``r``, ``f`` are constants or callables of position (evaluated
    at centroids for a and r, at the triangle quadrature points for f).
    """
    n = mesh.n_nodes
    tris, area, grad = tri_geometry(mesh, region)
    av = _coef_at_centroids(a, mesh, tris)
    rv = _coef_at_centroids(r, mesh, tris)

    kloc = np.einsum("t,tik,tjk->tij", av * area, grad, grad)
    mpat = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    mloc = (rv * area)[:, None, None] * mpat[None, :, :]
    loc = kloc + mloc

    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    K = sp.coo_matrix((loc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()

    load = np.zeros(n)
    if callable(f) or f != 0.0:
        qp = mesh.nodes[tris][:, [[0, 1], [1, 2], [2, 0]], :].mean(axis=2)
        fv = (np.asarray(f(qp.reshape(-1, 2)), dtype=float).reshape(len(tris), 3)
              if callable(f) else np.full((len(tris), 3), float(f)))
        floc = np.einsum("tq,q,qi,t->ti", fv, _MIDPOINT_W, _MIDPOINT_PHI, area)
        np.add.at(load, tris.reshape(-1), floc.reshape(-1))
    return K, load


def assemble_exp_term(mesh: Mesh, region: int, u: np.ndarray, u0: float):
    """Vector of u0*exp(u)*v and its Jacobian matrix u0*exp(u)*w*v.

    Uses the edge-midpoint rule on the P1 interpolant of u; exponents are
    clipped at 700 to avoid overflow (solutions beyond that are rejected
    by the caller's physical bound check).
    """
    n = mesh.n_nodes
    tris, area, _ = tri_geometry(mesh, region)
    uq = u[tris] @ _MIDPOINT_PHI.T          # u at midpoints, (t, q)
    eq = u0 * np.exp(np.clip(uq, -np.inf, 700.0))
    vec = np.zeros(n)
    vloc = np.einsum("tq,q,qi,t->ti", eq, _MIDPOINT_W, _MIDPOINT_PHI, area)
    np.add.at(vec, tris.reshape(-1), vloc.reshape(-1))
    jloc = np.einsum("tq,q,qi,qj,t->tij", eq, _MIDPOINT_W, _MIDPOINT_PHI, _MIDPOINT_PHI, area)
    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    J = sp.coo_matrix((jloc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return vec, J


def region_integral(mesh: Mesh, region: int, nodal: np.ndarray) -> float:
    """Integral of the P1 interpolant of a nodal field over a region."""
    tris, area, _ = tri_geometry(mesh, region)
    return float(np.sum(area * nodal[tris].mean(axis=1)))


def region_integral_exp(mesh: Mesh, region: int, u: np.ndarray) -> float:
    """Integral of exp(P1 interpolant of u), consistent with the solver rule."""
    tris, area, _ = tri_geometry(mesh, region)
    uq = u[tris] @ _MIDPOINT_PHI.T
    return float(np.sum(area * (np.exp(np.clip(uq, -np.inf, 700.0)) @ _MIDPOINT_W)))


def region_integral_exp_times_u(mesh: Mesh, region: int, u: np.ndarray) -> float:
    """Integral of u*exp(u) on P1 interpolants with the solver's rule."""
    tris, area, _ = tri_geometry(mesh, region)
    uq = u[tris] @ _MIDPOINT_PHI.T
    return float(np.sum(area * ((uq * np.exp(np.clip(uq, -np.inf, 700.0))) @ _MIDPOINT_W)))


DIAGONAL = "diagonal"
TRACE = "trace"


def assemble_elasticity(mesh: Mesh, region: int, k_mod: float, g_mod: float,
                        convention: str = DIAGONAL):
    """Matrix of the small-strain form with a bulk and a shear part.

    The shear part is (g/2) sum_ij (dV_i/dx_j + dV_j/dx_i)(dW_i/dx_j +
    dW_j/dx_i). The bulk part multiplies (k - 2g/3) by, per convention:

    * ``diagonal``: sum_i (dV_i/dx_i)(dW_i/dx_i), the form as written in
      the source model — it penalizes each diagonal strain separately,
      which stiffens volume-preserving shear and keeps the interface
      stable at the reported pressures;
    * ``trace``: (div V)(div W), the standard isotropic law.

    Both are symmetric positive semidefinite with the rigid motions in the
    kernel before boundary conditions are imposed.
    """
    if k_mod <= 0 or g_mod <= 0 or k_mod - 2.0 * g_mod / 3.0 < 0:
        raise ValueError("moduli must satisfy k > 0, g > 0, k - (2/3) g >= 0")
    if convention not in (DIAGONAL, TRACE):
        raise ValueError(f"unknown elastic form convention '{convention}'")
    n = mesh.n_nodes
    tris, area, grad = tri_geometry(mesh, region)
    nt = len(tris)
    # interleaved local dofs: (node0x, node0y, node1x, node1y, node2x, node2y)
    lam_coef = (k_mod - 2.0 * g_mod / 3.0) * area
    if convention == TRACE:
        D = np.zeros((nt, 6))             # divergence row
        D[:, 0::2] = grad[:, :, 0]
        D[:, 1::2] = grad[:, :, 1]
        kdiv = np.einsum("t,ti,tj->tij", lam_coef, D, D)
    else:
        Dx = np.zeros((nt, 6))            # dV_x/dx row
        Dy = np.zeros((nt, 6))            # dV_y/dy row
        Dx[:, 0::2] = grad[:, :, 0]
        Dy[:, 1::2] = grad[:, :, 1]
        kdiv = (np.einsum("t,ti,tj->tij", lam_coef, Dx, Dx)
                + np.einsum("t,ti,tj->tij", lam_coef, Dy, Dy))
    # Voigt rows (exx, eyy, gxy) of each local basis vector field
    B = np.zeros((nt, 3, 6))
    B[:, 0, 0::2] = grad[:, :, 0]
    B[:, 1, 1::2] = grad[:, :, 1]
    B[:, 2, 0::2] = grad[:, :, 1]
    B[:, 2, 1::2] = grad[:, :, 0]
    mvoigt = np.diag([1.0, 1.0, 0.5])
    kshear = 2.0 * g_mod * np.einsum("t,tai,ab,tbj->tij", area, B, mvoigt, B)
    loc = kdiv + kshear

    dofs = np.empty((nt, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * tris
    dofs[:, 1::2] = 2 * tris + 1
    rows = np.repeat(dofs, 6, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, 6)).reshape(-1)
    return sp.coo_matrix((loc.reshape(-1), (rows, cols)), shape=(2 * n, 2 * n)).tocsr()


def assemble_div_load(mesh: Mesh, region: int, coef: float) -> np.ndarray:
    """Vector of coef * div(W) for vector test fields W (interleaved dofs)."""
    n = mesh.n_nodes
    tris, area, grad = tri_geometry(mesh, region)
    out = np.zeros(2 * n)
    np.add.at(out, 2 * tris, coef * area[:, None] * grad[:, :, 0])
    np.add.at(out, 2 * tris + 1, coef * area[:, None] * grad[:, :, 1])
    return out


def assemble_vector_load(mesh: Mesh, region: int, f) -> np.ndarray:
    """Vector of int f . W for a vector-valued body force f(x)."""
    n = mesh.n_nodes
    tris, area, _ = tri_geometry(mesh, region)
    qp = mesh.nodes[tris][:, [[0, 1], [1, 2], [2, 0]], :].mean(axis=2)
    fv = np.asarray(f(qp.reshape(-1, 2)), dtype=float).reshape(len(tris), 3, 2)
    out = np.zeros(2 * n)
    floc = np.einsum("tqk,q,qi,t->tik", fv, _MIDPOINT_W, _MIDPOINT_PHI, area)
    np.add.at(out, 2 * tris, floc[..., 0])
    np.add.at(out, 2 * tris + 1, floc[..., 1])
    return out


_GAUSS2 = (np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]),
           np.array([0.5, 0.5]))


def boundary_functional(mesh: Mesh, tag: BoundaryTag | np.ndarray, density) -> np.ndarray:
    """Vector with entries int_edge density * (P1 trace basis) over tagged edges.

    ``density`` is a constant, a callable of position, or a nodal array
    (interpreted as its P1 trace). ``tag`` may also be an explicit (k, 2)
    edge array.
    """
    edges = mesh.edges_of_tag(tag) if isinstance(tag, BoundaryTag) else np.asarray(tag)
    n = mesh.n_nodes
    out = np.zeros(n)
    if len(edges) == 0:
        return out
    p0, p1 = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    L = np.hypot(*(p1 - p0).T)
    t, w = _GAUSS2
    if isinstance(density, np.ndarray) and density.shape == (n,):
        d0, d1 = density[edges[:, 0]], density[edges[:, 1]]
        val0 = L * (d0 / 3.0 + d1 / 6.0)
        val1 = L * (d0 / 6.0 + d1 / 3.0)
    else:
        if callable(density):
            qp = p0[:, None, :] * (1 - t)[None, :, None] + p1[:, None, :] * t[None, :, None]
            dv = np.asarray(density(qp.reshape(-1, 2)), dtype=float).reshape(len(edges), 2)
        else:
            dv = np.full((len(edges), 2), float(density))
        val0 = L * np.sum(w * dv * (1 - t), axis=1)
        val1 = L * np.sum(w * dv * t, axis=1)
    np.add.at(out, edges[:, 0], val0)
    np.add.at(out, edges[:, 1], val1)
    return out


def lumped_boundary_weights(mesh: Mesh, edges: np.ndarray) -> np.ndarray:
    """Trapezoid weights w_i = sum of half-lengths of incident edges."""
    out = np.zeros(mesh.n_nodes)
    p0, p1 = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    L = np.hypot(*(p1 - p0).T)
    np.add.at(out, edges[:, 0], 0.5 * L)
    np.add.at(out, edges[:, 1], 0.5 * L)
    return out


class DirichletSystem:
    """Symmetric elimination of fixed dofs with reconstruction."""

    def __init__(self, K: sp.spmatrix, rhs: np.ndarray, fixed_dofs: np.ndarray,
                 fixed_values: np.ndarray, active_dofs: np.ndarray | None = None):
        fixed_dofs = np.asarray(fixed_dofs, dtype=np.int64)
        fixed_values = np.asarray(fixed_values, dtype=float)
        order = np.argsort(fixed_dofs, kind="stable")
        fd, fv = fixed_dofs[order], fixed_values[order]
        dup = np.flatnonzero(np.diff(fd) == 0)
        if len(dup):
            scale = max(float(np.abs(fv).max()), 1.0)
            if not np.allclose(fv[dup], fv[dup + 1], rtol=0, atol=1e-10 * scale):
                raise ValueError("conflicting duplicate constraints")
            keep = np.concatenate([[True], np.diff(fd) != 0])
            fd, fv = fd[keep], fv[keep]
        self.n = K.shape[0]
        if active_dofs is None:
            active_dofs = np.arange(self.n)
        self.fixed_dofs, self.fixed_values = fd, fv
        self.free = np.setdiff1d(active_dofs, fd, assume_unique=False)
        K = K.tocsr()
        self.K_ff = K[self.free][:, self.free].tocsc()
        K_fc = K[self.free][:, fd]
        self.rhs_f = rhs[self.free] - K_fc @ fv

    def full(self, x_free: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.free] = x_free
        out[self.fixed_dofs] = self.fixed_values
        return out

    def solve(self, tol: float = 1e-10) -> np.ndarray:
        return self.full(solve_spd(self.K_ff, self.rhs_f, tol))


def solve_spd(A: sp.spmatrix, b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Direct sparse solve with residual verification and a CG fallback.

    Deterministic for fixed inputs. Raises :class:`SolverError` with the
    iteration count when both the factorization and CG fail.
    """
    if A.shape[0] == 0:
        return np.zeros(0)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b)
    x = None
    try:
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
    except RuntimeError:
        x = None
    if x is not None and np.all(np.isfinite(x)):
        res = np.linalg.norm(A @ x - b) / norm_b
        if res <= tol:
            return x
    # CG fallback with Jacobi preconditioning
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("matrix is not positive definite (nonpositive diagonal)")
    M = sp.diags(1.0 / d)
    it = [0]

    def count(_):
        it[0] += 1

    x, info = spla.cg(A, b, rtol=tol, maxiter=20 * A.shape[0], M=M, callback=count)
    if info != 0 or not np.all(np.isfinite(x)):
        raise SolverError(f"linear solve failed (CG info={info} after {it[0]} iterations)")
    res = np.linalg.norm(A @ x - b) / norm_b
    if res > 10 * tol:
        raise SolverError(f"linear solve residual {res:.2e} above tolerance after {it[0]} CG iterations")
    return x


# degree-4 (6-point) rule in barycentric coordinates, for error norms
_D4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_D4_L = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])


def l2_error(mesh: Mesh, region: int, nodal: np.ndarray, exact) -> float:
    """L2 norm of (P1 interpolant - exact function) via a degree-4 rule.

    ``nodal`` may be (n,) or (n, 2); ``exact`` maps (m, 2) points to
    matching values.
    """
    tris, area, _ = tri_geometry(mesh, region)
    qp = np.einsum("ql,tld->tqd", _D4_L, mesh.nodes[tris])
    vh = np.einsum("ql,tl...->tq...", _D4_L, nodal[tris])
    ve = np.asarray(exact(qp.reshape(-1, 2))).reshape(vh.shape)
    diff2 = (vh - ve) ** 2
    if diff2.ndim == 3:
        diff2 = diff2.sum(axis=2)
    return float(np.sqrt(np.sum(area * (diff2 @ _D4_W))))


def is_symmetric(A: sp.spmatrix, tol: float = 1e-12) -> bool:
    d = (A - A.T).tocoo()
    scale = max(abs(A).max(), 1e-300)
    return len(d.data) == 0 or np.max(np.abs(d.data)) <= tol * scale


def interleave(field: np.ndarray) -> np.ndarray:
    """(n,2) nodal vector field -> interleaved (2n,) dof vector."""
    return np.asarray(field, dtype=float).reshape(-1)


def deinterleave(vec: np.ndarray) -> np.ndarray:
    """Interleaved (2n,) dof vector -> (n,2) nodal field."""
    return vec.reshape(-1, 2)


def vector_dofs(nodes: np.ndarray) -> np.ndarray:
    """Interleaved dof indices of the given node indices."""
    nodes = np.asarray(nodes, dtype=np.int64)
    return np.stack([2 * nodes, 2 * nodes + 1], axis=1).reshape(-1)
