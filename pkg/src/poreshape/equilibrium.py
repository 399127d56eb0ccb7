"""Outer-loop drivers for the equilibrium interface.

Two algorithms act on the interface displacement:

* the fixed-point iteration maps the current force imbalance through the
  inverse interface-to-traction operator of the solid (with optional
  under-relaxation),
* the variational method descends the free energy along the boundary
  gradient with normal-projected steps and energy backtracking.

Both support the classical force balance (plain pressure and tension) and
the electrostatically corrected one, plus the uncharged limit in which
they coincide.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .elasticity import boundary_vector_functional
from .energy import EnergyBreakdown, shape_gradient, total_energy
from .geometry import (BoundaryTag, InterfaceCollapseError, build_reference_domain,
                       hausdorff_distance, l2_polyline_distance)
from .interface import (admissible_normal_mask, gamma_layout, nodal_normals,
                        project_compatibility, smooth_along_gamma)
from .mesh import Mesh, MeshParams, triangulate
from .params import DimensionlessGroups, PhysicalParams, RunConfig, Scales, nondimensionalize
from .poisson_boltzmann import PBConvergenceError
from .state import StateContext, SystemState
from . import fem


class Status(Enum):
    CONVERGED = 0
    PORE_CLOSED = 2
    MAX_ITER = 3
    DIVERGED = 4


@dataclass(frozen=True)
class IterationRecord:
    n: int
    sup_lam: float            # dimensionless
    stop_value: float         # configured stopping metric at this iteration
    energy: EnergyBreakdown
    gen_residual: float
    residual_norm: float      # fixed-point: ||lam - B(lam)||; descent: max|g| h
    fluid_area: float         # dimensionless
    remeshed: bool
    wall_clock: float


@dataclass
class EquilibriumResult:
    status: Status
    records: list
    final_state: SystemState | None
    config: RunConfig
    scales: Scales
    nd: DimensionlessGroups
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED

    def final_interface(self) -> dict[str, np.ndarray]:
        """Final interface polylines (dimensionless coordinates) per arc."""
        st = self.final_state
        out = {}
        layout = st.iface.layout
        for arc in layout.arcs:
            out[arc.name] = st.cur_mesh.nodes[arc.nodes]
        return out


def build_context(config: RunConfig, params: PhysicalParams,
                  ref_mesh: Mesh | None = None):
    """Reference mesh + evaluation context from a dimensional configuration."""
    scales, nd = nondimensionalize(params)
    L = scales.L_star
    if ref_mesh is None:
        geom = build_reference_domain(
            d=config.d / L, l=config.l / L, s=config.s / L,
            thickness=config.thickness_eff / L,
            fillet=config.fillet / L,
        )
        ref_mesh = triangulate(geom, MeshParams(
            h=config.h / L, refine_interface=config.refine_interface,
            min_angle=config.min_angle, seed=config.seed))
    ctx = StateContext(ref_mesh, nd, scales, config)
    return ctx, scales, nd


def _yl_nodal_load(state: SystemState, nd: DimensionlessGroups, law: str) -> np.ndarray:
    """(m, 2) nodal force-balance datum (gamma_eff H - p_eff) nu, current config."""
    ifc = state.iface
    if law == "modified":
        return ((ifc.gamma_star * ifc.H - ifc.p_star)[:, None]) * ifc.nu
    return ((nd.gamma * ifc.H - ifc.p)[:, None]) * ifc.nu


def _ref_load_from_current(ctx: StateContext, state: SystemState,
                           q_nodal: np.ndarray) -> np.ndarray:
    """Assemble -int q . W over the current interface as a reference-dof load.

    The current-configuration integral realizes the pulled-back traction
    datum; current-vertex contributions are scattered onto the reference
    trace basis through the arc-length correspondence.
    """
    cur = state.cur_mesh
    layout_cur = state.iface.layout
    qfull = np.zeros((cur.n_nodes, 2))
    qfull[layout_cur.nodes] = q_nodal
    vec = boundary_vector_functional(cur, cur.edges_of_tag(BoundaryTag.GAMMA), qfull)
    pairs = state.gmap.scatter_to_ref(fem.deinterleave(vec)[layout_cur.nodes])
    ref_load = np.zeros(2 * ctx.ref_mesh.n_nodes)
    ref_load[fem.vector_dofs(ctx.layout_ref.nodes)] = -pairs.reshape(-1)
    return ref_load


def _divergence_guard(ctx: StateContext, lam: np.ndarray) -> bool:
    box = ctx.ref_mesh.nodes
    span = min(float(np.ptp(box[:, 0])), float(np.ptp(box[:, 1])))
    return len(lam) > 0 and float(np.max(np.abs(lam))) > 0.45 * span


def run_fixed_point(config: RunConfig, params: PhysicalParams,
                    ref_mesh: Mesh | None = None,
                    initial_lam: np.ndarray | None = None) -> EquilibriumResult:
    """Fixed-point iteration on the interface force balance."""
    ctx, scales, nd = build_context(config, params, ref_mesh)
    layout = ctx.layout_ref
    nu_ref = nodal_normals(ctx.ref_mesh, layout)
    w_ref = fem.lumped_boundary_weights(
        ctx.ref_mesh, ctx.ref_mesh.edges_of_tag(BoundaryTag.GAMMA))[layout.nodes]
    lam = np.zeros((layout.size, 2)) if initial_lam is None else initial_lam.copy()
    max_step = config.max_step_eff / scales.L_star

    records: list[IterationRecord] = []
    status, message = Status.MAX_ITER, ""
    prev_sup = float(np.max(np.hypot(lam[:, 0], lam[:, 1]))) if len(lam) else 0.0
    state = None
    for n in range(1, config.max_iter + 1):
        t0 = time.perf_counter()
        try:
            remeshed = ctx.maybe_rebase(lam)
            state = ctx.evaluate(lam, remember=True)
            energy = total_energy(state, nd, scales.E_star)
            q = _yl_nodal_load(state, nd, config.law)
            B = ctx.solid.dtn_inverse(load=_ref_load_from_current(ctx, state, q))
        except InterfaceCollapseError as exc:
            status, message = Status.PORE_CLOSED, str(exc)
            break
        except (PBConvergenceError, fem.SolverError, RuntimeError) as exc:
            status, message = Status.DIVERGED, str(exc)
            break
        diff = lam - B
        native = math.sqrt(float(np.sum(w_ref * np.sum(diff * diff, axis=1))))
        # smooth the increment along the interface: node-scale content in
        # the elastic trace response seeds polyline folds at the corners
        # once displacements accumulate
        step = config.omega * (B - lam)
        eps_s = state.iface.eps_s
        step = np.stack([
            smooth_along_gamma(ctx.ref_mesh, layout, step[:, 0], eps_s),
            smooth_along_gamma(ctx.ref_mesh, layout, step[:, 1], eps_s),
        ], axis=1)
        new_lam = project_compatibility(ctx.ref_mesh, layout, lam + step, nu_ref)
        step_max = float(np.max(np.abs(new_lam - lam))) if len(lam) else 0.0
        if math.isfinite(max_step) and step_max > max_step:
            new_lam = lam + (new_lam - lam) * (max_step / step_max)
        sup_new = float(np.max(np.hypot(new_lam[:, 0], new_lam[:, 1])))
        sup_metric = abs(sup_new - prev_sup)
        stop_value = sup_metric if config.stop_metric == "sup" else native
        records.append(IterationRecord(
            n=n, sup_lam=sup_new, stop_value=stop_value, energy=energy,
            gen_residual=state.pb.gen_residual, residual_norm=native,
            fluid_area=state.fluid_area(), remeshed=remeshed,
            wall_clock=time.perf_counter() - t0))
        lam, prev_sup = new_lam, sup_new
        if _divergence_guard(ctx, lam):
            status, message = Status.DIVERGED, "interface displacement left the domain scale"
            break
        if stop_value <= config.err:
            status = Status.CONVERGED
            break
    final_state = _safe_final_state(ctx, lam, state)
    return EquilibriumResult(status=status, records=records, final_state=final_state,
                             config=config, scales=scales, nd=nd, message=message)


def run_variational(config: RunConfig, params: PhysicalParams,
                    ref_mesh: Mesh | None = None,
                    initial_lam: np.ndarray | None = None) -> EquilibriumResult:
    """Energy descent along the boundary gradient with backtracking."""
    ctx, scales, nd = build_context(config, params, ref_mesh)
    layout = ctx.layout_ref
    nu_ref = nodal_normals(ctx.ref_mesh, layout)
    lam = np.zeros((layout.size, 2)) if initial_lam is None else initial_lam.copy()

    records: list[IterationRecord] = []
    status, message = Status.MAX_ITER, ""
    try:
        state = ctx.evaluate(lam, remember=True)
        energy = total_energy(state, nd, scales.E_star)
    except InterfaceCollapseError as exc:
        return EquilibriumResult(Status.PORE_CLOSED, records, None, config, scales, nd, str(exc))
    except (PBConvergenceError, fem.SolverError, RuntimeError) as exc:
        return EquilibriumResult(Status.DIVERGED, records, None, config, scales, nd, str(exc))
    prev_sup = float(np.max(np.hypot(lam[:, 0], lam[:, 1]))) if len(lam) else 0.0
    k_last = config.k
    adm_mask = admissible_normal_mask(layout)
    for n in range(1, config.max_iter + 1):
        t0 = time.perf_counter()
        grad = shape_gradient(state, nd)
        h_gamma = state.iface.h_gamma()
        # derivative restricted to admissible perturbations
        g_adm = project_compatibility(ctx.ref_mesh, layout, grad.density, nu_ref)
        native = float(np.max(np.hypot(g_adm[:, 0], g_adm[:, 1]))) * h_gamma
        if config.stop_metric == "native" and native <= config.err:
            records.append(IterationRecord(
                n=n, sup_lam=prev_sup, stop_value=native, energy=energy,
                gen_residual=state.pb.gen_residual, residual_norm=native,
                fluid_area=state.fluid_area(), remeshed=False,
                wall_clock=time.perf_counter() - t0))
            status = Status.CONVERGED
            break
        # Full-vector step: the solid energy depends on the whole boundary
        # map, so tangential gradient components must relax too. Explicit
        # steps along the raw density are unstable at mesh scale (elastic
        # response grows like stiffness * wavenumber); each component is
        # smoothed along the interface with a radius tied to the step size
        # (k * k_S / (2 sqrt(eps)) < 2 bounds the amplification).
        eps_dir = max(state.iface.eps_s, (config.k * nd.k_S / 4.0) ** 2)
        direction = -np.stack([
            smooth_along_gamma(ctx.ref_mesh, layout, grad.density[:, 0], eps_dir),
            smooth_along_gamma(ctx.ref_mesh, layout, grad.density[:, 1], eps_dir),
        ], axis=1)
        direction = project_compatibility(ctx.ref_mesh, layout, direction, nu_ref)
        dmax = float(np.max(np.abs(direction))) if len(direction) else 0.0
        max_step = config.max_step_eff / scales.L_star
        if dmax > 0 and config.k * dmax > max_step:
            direction *= max_step / (config.k * dmax)
        k_try = min(config.k, 2.0 * k_last)
        accepted = None
        for _ in range(30):
            if k_try < 1e-9 * config.k:
                break
            cand = project_compatibility(
                ctx.ref_mesh, layout, lam + k_try * direction, nu_ref)
            try:
                st = ctx.evaluate(cand)
                en = total_energy(st, nd, scales.E_star)
            except InterfaceCollapseError as exc:
                status, message = Status.PORE_CLOSED, str(exc)
                accepted = "collapse"
                break
            except (PBConvergenceError, fem.SolverError, RuntimeError):
                k_try *= 0.5
                continue
            if en.total < energy.total:
                accepted = (cand, st, en)
                break
            k_try *= 0.5
        if accepted == "collapse":
            break
        if accepted is None:
            status, message = Status.DIVERGED, "backtracking failed to decrease the energy"
            break
        lam, state, energy = accepted
        ctx.commit(state)
        k_last = k_try
        sup_new = float(np.max(np.hypot(lam[:, 0], lam[:, 1])))
        sup_metric = abs(sup_new - prev_sup)
        stop_value = sup_metric if config.stop_metric == "sup" else native
        remeshed = False
        try:
            remeshed = ctx.maybe_rebase(lam)
            if remeshed:
                state = ctx.evaluate(lam, remember=True)
                energy = total_energy(state, nd, scales.E_star)
        except InterfaceCollapseError as exc:
            status, message = Status.PORE_CLOSED, str(exc)
            records.append(IterationRecord(
                n=n, sup_lam=sup_new, stop_value=stop_value, energy=energy,
                gen_residual=state.pb.gen_residual, residual_norm=native,
                fluid_area=state.fluid_area(), remeshed=True,
                wall_clock=time.perf_counter() - t0))
            break
        records.append(IterationRecord(
            n=n, sup_lam=sup_new, stop_value=stop_value, energy=energy,
            gen_residual=state.pb.gen_residual, residual_norm=native,
            fluid_area=state.fluid_area(), remeshed=remeshed,
            wall_clock=time.perf_counter() - t0))
        prev_sup = sup_new
        if config.stop_metric == "sup" and stop_value <= config.err:
            status = Status.CONVERGED
            break
    final_state = _safe_final_state(ctx, lam, state if isinstance(state, SystemState) else None)
    return EquilibriumResult(status=status, records=records, final_state=final_state,
                             config=config, scales=scales, nd=nd, message=message)


def _safe_final_state(ctx: StateContext, lam: np.ndarray,
                      fallback: SystemState | None) -> SystemState | None:
    try:
        return ctx.evaluate(lam, remember=True)
    except Exception:
        return fallback


@dataclass(frozen=True)
class ComparisonReport:
    """Paired classical/modified runs with interface distance metrics."""

    classical: EquilibriumResult
    modified: EquilibriumResult
    hausdorff: float            # dimensionless, max over arcs
    l2: float                   # dimensionless, summed over arcs
    delta_yl: np.ndarray        # per-node |p*-p-(gamma*-gamma)H| (dimensionless)
    partial: bool               # either run failed to converge


def compare_laws(config: RunConfig, params: PhysicalParams) -> ComparisonReport:
    """Run the classical fixed point against the variational modified law."""
    res_c = run_fixed_point(config.with_(algorithm="fixed_point", law="classical"), params)
    res_m = run_variational(config.with_(algorithm="variational", law="modified"), params)
    partial = not (res_c.converged and res_m.converged)
    hd, l2 = math.nan, math.nan
    delta = np.zeros(0)
    if res_c.final_state is not None and res_m.final_state is not None:
        pc = res_c.final_interface()
        pm = res_m.final_interface()
        names = sorted(set(pc) & set(pm))
        if names:
            hd = max(hausdorff_distance(pc[nm], pm[nm]) for nm in names)
            l2 = sum(l2_polyline_distance(pc[nm], pm[nm]) for nm in names)
        ifc = res_m.final_state.iface
        nd = res_m.nd
        delta = np.abs(ifc.p_star - ifc.p - (ifc.gamma_star - nd.gamma) * ifc.H)
    return ComparisonReport(classical=res_c, modified=res_m, hausdorff=hd,
                            l2=l2, delta_yl=delta, partial=partial)
