"""System free energy, its breakdown, the boundary shape gradient, and the
finite-difference validation of the gradient.

Energy terms (dimensionless; multiply by the energy scale for J/m):

* mechanical, solid: 1/2 int strain-form(U,U) - int p_S0 div U over the
  reference solid,
* mechanical, liquid: - int p over the current fluid domain,
* electrostatic: -(int (eps/2)|grad phi|^2 + int_Gamma sigma_c phi), with
  the equivalent entropy form (eps/2)|grad phi|^2 + R T c ln(c/c0) kept as
  a cross-check (the two agree up to the potential solver's residual),
* surface: gamma * length(Gamma).

The shape gradient pairs the solid reaction forces (the variationally
consistent interface traction) with boundary perturbations and adds the
effective-pressure and effective-tension terms integrated over the current
interface with trapezoid weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryTag
from .mesh import FLUID, Mesh
from .params import DimensionlessGroups
from .state import StateContext, SystemState
from .interface import project_compatibility, nodal_normals, turning_normals
from . import fem


class EnergyGateError(RuntimeError):
    """State rejected: the potential solve does not satisfy neutrality."""


GEN_GATE = 1e-8


@dataclass(frozen=True)
class EnergyBreakdown:
    """Dimensionless energy terms with their configuration bookkeeping.

    ``mech_s`` integrates over the reference solid; ``mech_l``, ``el`` and
    ``st`` over the current configuration. ``el_alt`` is the entropy form
    of the electrostatic term.
    """

    mech_s: float
    mech_l: float
    el: float
    st: float
    el_alt: float
    e_star: float          # J/m per dimensionless unit

    @property
    def total(self) -> float:
        return self.mech_s + self.mech_l + self.el + self.st

    @property
    def total_dimensional(self) -> float:
        return self.total * self.e_star

    def as_dict(self) -> dict:
        return {"mech_s": self.mech_s, "mech_l": self.mech_l, "el": self.el,
                "st": self.st, "total": self.total, "el_alt": self.el_alt}


def _grad_sq_integral(mesh: Mesh, u: np.ndarray) -> float:
    tris, area, grad = fem.tri_geometry(mesh, FLUID)
    g = np.einsum("tik,ti->tk", grad, u[tris])
    return float(np.sum(area * np.sum(g * g, axis=1)))


def total_energy(state: SystemState, nd: DimensionlessGroups, e_star: float,
                 gen_gate: float = GEN_GATE) -> EnergyBreakdown:
    """Quadrature evaluation of the free energy at a converged state."""
    pb = state.pb
    if pb.charged:
        if not pb.converged:
            raise EnergyGateError("potential state not converged")
        if pb.gen_residual > gen_gate:
            raise EnergyGateError(
                f"neutrality residual {pb.gen_residual:.2e} above gate {gen_gate:.0e}")
    cur = state.cur_mesh
    area = cur.fluid_area()
    gamma_len = float(np.sum(fem.boundary_functional(cur, BoundaryTag.GAMMA, 1.0)))

    mech_s = state.disp.energy_mech
    if pb.charged:
        int_exp = fem.region_integral_exp(cur, FLUID, pb.u)
        mech_l = -((int_exp - area) + nd.p0 * area)
        grad2 = _grad_sq_integral(cur, pb.u)
        int_u_gamma = float(np.sum(fem.boundary_functional(cur, BoundaryTag.GAMMA, pb.u)))
        el = -0.5 * nd.eps_hat * grad2 + nd.sigma_hat * int_u_gamma
        el_alt = 0.5 * nd.eps_hat * grad2 + fem.region_integral_exp_times_u(cur, FLUID, pb.u)
    else:
        mech_l = -nd.p0 * area
        el = 0.0
        el_alt = 0.0
    st = nd.gamma * gamma_len
    return EnergyBreakdown(mech_s=mech_s, mech_l=mech_l, el=el, st=st,
                           el_alt=el_alt, e_star=e_star)


@dataclass(frozen=True)
class ShapeGradient:
    """Energy derivative as a functional on reference interface nodes.

    The nodal force vector realizes -sigma.nu - p* nu + gamma* H nu: the
    solid part by the reaction forces (discretely exact for the solid
    energy), the surface part by the polyline's discrete curvature normal
    (exact for the discrete interface length), the effective-pressure part
    by trapezoid weights on the current interface; current-vertex
    contributions are scattered onto the reference basis (the adjoint of
    the arc-length interpolation).
    """

    force: np.ndarray         # (m_ref, 2) functional paired with perturbations
    density: np.ndarray       # (m_ref, 2) force / reference weights
    reactions: np.ndarray     # (m_ref, 2) solid part
    weights: np.ndarray       # (m_ref,)

    def apply(self, mu: np.ndarray) -> float:
        return float(np.sum(self.force * mu))

    def sup_norm(self) -> float:
        return float(np.max(np.hypot(self.density[:, 0], self.density[:, 1])))


def shape_gradient(state: SystemState, nd: DimensionlessGroups,
                   w_ref: np.ndarray | None = None) -> ShapeGradient:
    """Assemble the boundary gradient from the interface state."""
    ifc = state.iface
    if ifc.H is None or ifc.traction is None:
        raise ValueError("interface state lacks curvature or traction")
    R = state.reactions_gamma()
    turning = turning_normals(state.cur_mesh, ifc.layout)
    fluid_loads = (-(ifc.weights * ifc.p_star)[:, None] * ifc.nu
                   + ifc.gamma_star[:, None] * turning)
    force = R + state.gmap.scatter_to_ref(fluid_loads)
    if w_ref is None:
        w_ref = fem.lumped_boundary_weights(
            state.ref_mesh, state.ref_mesh.edges_of_tag(BoundaryTag.GAMMA)
        )[state.gmap.ref_layout.nodes]
    density = force / w_ref[:, None]
    return ShapeGradient(force=force, density=density, reactions=R, weights=w_ref)


# ---------------------------------------------------------------------------
# finite-difference validation


@dataclass(frozen=True)
class GradientCheckRow:
    direction: int
    h: float
    fd_value: float
    analytic: float
    rel_error: float


@dataclass(frozen=True)
class GradientCheckReport:
    rows: list
    best_errors: list          # per direction
    slopes: list               # observed order per direction
    median_best_error: float


def smooth_directions(ctx: StateContext, count: int, seed: int) -> list[np.ndarray]:
    """Random smooth admissible normal-bump perturbations of the interface.

    Profiles are sin^2-enveloped low-frequency waves along each arc, so
    they vanish with zero slope at the arc ends (compatibility); the
    projection is applied anyway and is idempotent on them.
    """
    rng = np.random.default_rng(seed)
    layout = ctx.layout_ref
    nu = nodal_normals(ctx.ref_mesh, layout)
    out = []
    for _ in range(count):
        mu = np.zeros((layout.size, 2))
        for arc in layout.arcs:
            sl = layout.slices[arc.name]
            m = sl.stop - sl.start
            t = np.linspace(0.0, 1.0, m)
            prof = np.zeros(m)
            for mode in range(1, 4):
                amp = rng.normal() / mode
                phase = rng.uniform(0, 2 * math.pi)
                prof += amp * np.sin(mode * math.pi * t + phase)
            prof *= np.sin(math.pi * t) ** 2
            mu[sl] = prof[:, None] * nu[sl]
        norm = np.max(np.hypot(mu[:, 0], mu[:, 1]))
        if norm > 0:
            mu /= norm
        out.append(project_compatibility(ctx.ref_mesh, layout, mu, nu))
    return out


def fd_gradient_check(ctx: StateContext, nd: DimensionlessGroups, e_star: float,
                      lam0: np.ndarray | None = None, directions: int = 3,
                      h_factors=(1e-2, 1e-3, 1e-4), seed: int = 0) -> GradientCheckReport:
    """Central finite differences of the energy against the analytic pairing.

    Every perturbed energy is a full re-solve on the smoothly deformed
    mesh (same connectivity both sides, no remeshing). Directions that
    fail to converge are skipped and reported with NaN.
    """
    if lam0 is None:
        lam0 = np.zeros((ctx.layout_ref.size, 2))
    state0 = ctx.evaluate(lam0)
    grad = shape_gradient(state0, nd)
    h_gamma = state0.iface.h_gamma()

    rows, best_errors, slopes = [], [], []
    for d, mu in enumerate(smooth_directions(ctx, directions, seed)):
        analytic = grad.apply(mu)
        fd_vals = []
        for hf in h_factors:
            h = hf * h_gamma
            try:
                e_plus = total_energy(ctx.evaluate(lam0 + h * mu), nd, e_star).total
                e_minus = total_energy(ctx.evaluate(lam0 - h * mu), nd, e_star).total
                fd = (e_plus - e_minus) / (2 * h)
            except Exception:
                fd = math.nan
            fd_vals.append(fd)
            rel = abs(fd - analytic) / max(abs(analytic), 1e-300)
            rows.append(GradientCheckRow(d, h, fd, analytic, rel))
        finite = [abs(v - analytic) / max(abs(analytic), 1e-300)
                  for v in fd_vals if math.isfinite(v)]
        best_errors.append(min(finite) if finite else math.nan)
        slope = math.nan
        if len(fd_vals) >= 3 and all(math.isfinite(v) for v in fd_vals[:3]):
            d12 = abs(fd_vals[0] - fd_vals[1])
            d23 = abs(fd_vals[1] - fd_vals[2])
            if d23 > 0 and d12 > 0:
                slope = math.log(d12 / d23) / math.log(h_factors[0] / h_factors[1])
        slopes.append(slope)
    finite_best = [e for e in best_errors if math.isfinite(e)]
    med = float(np.median(finite_best)) if finite_best else math.nan
    return GradientCheckReport(rows=rows, best_errors=best_errors,
                               slopes=slopes, median_best_error=med)
