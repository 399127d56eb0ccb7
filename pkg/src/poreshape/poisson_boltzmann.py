"""Nonlinear potential problem on the fluid domain.

Dimensionless unknown u = -F*phi/(R*T) solving

    -Lap u + u0 exp(u) = 0   in the fluid,
    du/dnu = g               on the charged interface,
    du/dnu = 0               on the channel mouths,

by damped Newton iteration on the P1 discretization. Secondary fields
(concentration, pressure, potential) follow from the equilibrium closure
c = c0 exp(u), p = R T (c - c0) + p0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.sparse.csgraph import connected_components
import scipy.sparse as sp

from .geometry import BoundaryTag
from .mesh import FLUID, Mesh
from .params import DimensionlessGroups, PhysicalParams, Scales, debye_length
from . import fem

U_PHYSICAL_BOUND = 50.0


class PBConvergenceError(RuntimeError):
    """Newton iteration failed or produced a non-physical state."""


@dataclass(frozen=True)
class PotentialSolution:
    """Converged dimensionless potential state on the fluid region."""

    u: np.ndarray                  # (n,), zero off the fluid region
    charged: bool
    converged: bool
    gen_residual: float
    newton_trace: list = field(default_factory=list)

    def c_hat(self) -> np.ndarray:
        """Concentration over c0 (nodal)."""
        return np.exp(self.u) if self.charged else np.zeros_like(self.u)

    def p_hat(self, nd: DimensionlessGroups) -> np.ndarray:
        """Pressure over R*T*c0 (nodal)."""
        if not self.charged:
            return np.full_like(self.u, nd.p0)
        return (np.exp(self.u) - 1.0) + nd.p0


def uncharged_solution(mesh: Mesh) -> PotentialSolution:
    """Uncharged limit: the potential solve is skipped and c = 0, p = p0."""
    return PotentialSolution(np.zeros(mesh.n_nodes), charged=False,
                             converged=True, gen_residual=0.0, newton_trace=[])


def _check_fluid_connected(mesh: Mesh, fluid_nodes: np.ndarray):
    tris = mesh.triangles_of(FLUID)
    n = mesh.n_nodes
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, labels = connected_components(adj + adj.T, directed=False)
    if len(np.unique(labels[fluid_nodes])) > 1:
        raise PBConvergenceError("disconnected fluid region")


def solve_potential(mesh: Mesh, nd: DimensionlessGroups,
                    initial_guess: np.ndarray | None = None,
                    tol: float = 1e-10, max_iter: int = 50) -> PotentialSolution:
    """Damped Newton solve of the discrete potential problem.

    The residual 2-norm is forced to decrease at every step (backtracking
    by halving); convergence means residual <= tol. A solution with
    max(u) above the physical bound is rejected.
    """
    if nd.g <= 0:
        raise PBConvergenceError("GEN unsatisfiable for sigma_c = 0")
    fluid_nodes = mesh.region_nodes(FLUID)
    if len(fluid_nodes) == 0:
        raise PBConvergenceError("mesh has no fluid region")
    _check_fluid_connected(mesh, fluid_nodes)

    K, _ = fem.assemble_scalar(mesh, FLUID, a=1.0, r=0.0)
    ell = nd.g * fem.boundary_functional(mesh, BoundaryTag.GAMMA, 1.0)
    act = fluid_nodes
    K_a = K[act][:, act].tocsc()
    ell_a = ell[act]

    u = np.zeros(mesh.n_nodes) if initial_guess is None else initial_guess.astype(float).copy()
    u_a = u[act]

    def residual(ua):
        full = np.zeros(mesh.n_nodes)
        full[act] = ua
        vec, J = fem.assemble_exp_term(mesh, FLUID, full, nd.u0)
        return K_a @ ua + vec[act] - ell_a, J

    res, J = residual(u_a)
    rnorm = np.linalg.norm(res)
    trace = [rnorm]
    converged = rnorm <= tol
    it = 0
    while not converged and it < max_iter:
        J_a = (K + J)[act][:, act].tocsc()
        delta = fem.solve_spd(J_a, -res, tol=1e-12)
        alpha = 1.0
        for _ in range(40):
            cand = u_a + alpha * delta
            res_c, J_c = residual(cand)
            rn = np.linalg.norm(res_c)
            if rn < rnorm:
                break
            alpha *= 0.5
        else:
            raise PBConvergenceError(
                f"damping exhausted at iteration {it} (residual {rnorm:.3e})")
        u_a, res, J, rnorm = cand, res_c, J_c, rn
        trace.append(rnorm)
        converged = rnorm <= tol
        it += 1
    if not converged:
        raise PBConvergenceError(
            f"no convergence after {max_iter} Newton iterations (residual {rnorm:.3e})")
    if np.max(u_a) > U_PHYSICAL_BOUND:
        raise PBConvergenceError(
            f"non-physical solution: max u = {np.max(u_a):.2f} exceeds {U_PHYSICAL_BOUND}")
    u = np.zeros(mesh.n_nodes)
    u[act] = u_a
    if not np.all(np.isfinite(u)):
        raise PBConvergenceError("potential solve produced non-finite values")
    gen = gen_residual(mesh, u, nd)
    return PotentialSolution(u, charged=True, converged=True,
                             gen_residual=gen, newton_trace=trace)


def gen_residual(mesh: Mesh, u: np.ndarray, nd: DimensionlessGroups) -> float:
    """Relative global electro-neutrality defect of a potential state.

    |u0 int exp(u) - g |Gamma|| / (g |Gamma|), evaluated with the same
    quadrature as the Newton residual (test function = 1).
    """
    bulk = nd.u0 * fem.region_integral_exp(mesh, FLUID, u)
    wall = nd.g * float(np.sum(fem.boundary_functional(mesh, BoundaryTag.GAMMA, 1.0)))
    return abs(bulk - wall) / wall


@dataclass(frozen=True)
class SecondaryFields:
    phi: np.ndarray        # V
    c: np.ndarray          # mol/m^3
    p: np.ndarray          # N/m^2
    closure_defect: float  # consistency diagnostic of the gradient closure


def secondary_fields(solution: PotentialSolution, params: PhysicalParams,
                     scales: Scales, mesh: Mesh | None = None) -> SecondaryFields:
    """Dimensional potential, concentration and pressure from u.

    The closure defect is the median per-triangle relative residual of
    grad c + (F/(R T)) c grad phi = 0 evaluated on P1 interpolants; it is
    reported as a diagnostic (the identity is exact only nodally).
    """
    u = solution.u
    if np.max(u) > U_PHYSICAL_BOUND:
        raise PBConvergenceError("non-physical potential state (u exceeds bound)")
    if not solution.charged:
        phi = np.zeros_like(u)
        c = np.zeros_like(u)
        p = np.full_like(u, params.p0)
        return SecondaryFields(phi, c, p, 0.0)
    phi = -scales.phi_star * u
    c = params.c0 * np.exp(u)
    p = params.RT * (c - params.c0) + params.p0
    defect = 0.0
    if mesh is not None:
        tris, _, grad = fem.tri_geometry(mesh, FLUID)
        gc = np.einsum("tik,ti->tk", grad, c[tris])
        gphi = np.einsum("tik,ti->tk", grad, phi[tris])
        cbar = c[tris].mean(axis=1)
        resid = gc + (params.F / params.RT) * cbar[:, None] * gphi
        num = np.linalg.norm(resid, axis=1)
        den = np.linalg.norm(gc, axis=1)
        ok = den > 1e-12 * max(float(den.max(initial=0.0)), 1e-300)
        defect = float(np.median(num[ok] / den[ok])) if ok.any() else 0.0
    return SecondaryFields(phi, c, p, defect)


# ---------------------------------------------------------------------------
# independent 1D oracle for the straight-channel (slab) limit


def slab_profile_oracle(half_width: float, u0: float, g: float,
                        rtol: float = 1e-11, atol: float = 1e-13):
    """Shooting solution of -u'' + u0 exp(u) = 0, u'(+-a) = +-g on (-a, a).

    Returns a callable evaluating the symmetric profile u(y). Built on an
    adaptive high-order integrator; independent of the FEM discretization.
    """
    if u0 <= 0 or g <= 0 or half_width <= 0:
        raise ValueError("slab oracle needs u0 > 0, g > 0, half_width > 0")

    def rhs(_, z):
        return [z[1], u0 * np.exp(np.minimum(z[0], 700.0))]

    def shoot(c):
        sol = solve_ivp(rhs, (0.0, half_width), [c, 0.0], method="DOP853",
                        rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            return None
        return sol

    def mismatch(c):
        sol = shoot(c)
        if sol is None:
            return np.inf
        return sol.sol(half_width)[1] - g

    lo = -40.0
    hi = 2.0
    while mismatch(hi) < 0 and hi < 200.0:
        hi += 2.0
    c_star = brentq(mismatch, lo, hi, xtol=1e-13, rtol=8.9e-16)
    sol = shoot(c_star)

    def profile(y):
        y = np.abs(np.asarray(y, dtype=float))
        return sol.sol(np.clip(y, 0.0, half_width))[0]

    return profile


@dataclass(frozen=True)
class RadialOracle:
    """Closed-form wall data of the straight charged channel."""

    debye: float       # m
    lambda_p: float    # (r/d_l)^2
    phi_wall: float    # V


def radial_oracle(r: float, params: PhysicalParams) -> RadialOracle:
    """Analytic wall potential of a straight channel of half-width r.

    phi_wall = (2 R T / F) ln(1 - lambda_p / 8) with lambda_p = r^2/d_l^2,
    valid for lambda_p < 8.
    """
    d_l = debye_length(params)
    lam_p = (r / d_l) ** 2
    if lam_p >= 8.0:
        raise ValueError(f"lambda_p = {lam_p:.3f} outside the formula's domain [0, 8)")
    phi_wall = 2.0 * params.RT / params.F * np.log(1.0 - lam_p / 8.0)
    return RadialOracle(debye=d_l, lambda_p=lam_p, phi_wall=phi_wall)
