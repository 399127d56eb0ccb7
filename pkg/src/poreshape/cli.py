"""Command-line entry point.

Modes: fixed-point, variational, compare, radial-oracle, gradient-check,
yl-band. Every run writes delimited outputs (CSV), a legacy VTK export
where fields exist, rendered PNG figures, and a regenerable run report.
Exit codes: 0 converged/completed, 2 pore closed, 3 iteration cap,
4 diverged, 64 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import plots
from .diagnostics import RunReport, yl_band, yl_discrepancy
from .energy import fd_gradient_check, total_energy
from .equilibrium import (ComparisonReport, EquilibriumResult, Status,
                          build_context, compare_laws, run_fixed_point,
                          run_variational)
from .geometry import BoundaryTag
from .interface import extend_displacement, gamma_layout
from .mesh import FLUID, SOLID, FieldTransfer, deform
from .params import ConfigError, PhysicalParams, RunConfig, load_config
from .poisson_boltzmann import radial_oracle, slab_profile_oracle, solve_potential
from . import fem, io

MODES = ("fixed-point", "variational", "compare", "radial-oracle",
         "gradient-check", "yl-band")

EXIT_OK = 0
EXIT_PORE_CLOSED = 2
EXIT_MAX_ITER = 3
EXIT_DIVERGED = 4
EXIT_CONFIG = 64

_STATUS_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.PORE_CLOSED: EXIT_PORE_CLOSED,
    Status.MAX_ITER: EXIT_MAX_ITER,
    Status.DIVERGED: EXIT_DIVERGED,
}


def export_fields(result: EquilibriumResult, params: PhysicalParams, out: Path,
                  basename: str = "state") -> None:
    """Write the deformed-configuration grid file and the interface CSV.

    The reference mesh is warped by the elastic displacement on the solid
    and by the harmonic interface extension on the fluid; potential,
    concentration and pressure are sampled at the warped fluid nodes, the
    electric field is attached per cell.
    """
    state = result.final_state
    if state is None:
        return
    scales = result.scales
    ref = state.ref_mesh
    layout = gamma_layout(ref)
    warp = extend_displacement(ref, layout, state.lam)
    solid_nodes = ref.region_nodes(SOLID)
    warp[solid_nodes] = state.disp.U[solid_nodes]
    plot_mesh = deform(ref, warp)

    transfer = FieldTransfer(state.cur_mesh, plot_mesh)
    u_plot = transfer(state.pb.u, FLUID) if state.pb.charged else np.zeros(ref.n_nodes)
    phi = -scales.phi_star * u_plot
    c = params.c0 * np.exp(u_plot) if state.pb.charged else np.zeros(ref.n_nodes)
    fluid_mask = np.zeros(ref.n_nodes, dtype=bool)
    fluid_mask[ref.region_nodes(FLUID)] = True
    c[~fluid_mask] = 0.0
    phi[~fluid_mask] = 0.0
    p = np.where(fluid_mask, params.RT * (c - params.c0) + params.p0, 0.0)
    if not state.pb.charged:
        p = np.where(fluid_mask, params.p0, 0.0)

    tris, _, grad = fem.tri_geometry(plot_mesh, FLUID)
    e_field = np.zeros((plot_mesh.n_triangles, 2))
    gphi = -np.einsum("tik,ti->tk", grad, phi[tris])
    e_field[plot_mesh.tri_region == FLUID] = gphi

    umag = np.hypot(warp[:, 0], warp[:, 1]) * scales.L_star
    point_data = {
        "U_mag": umag,
        "U_2": warp[:, 1] * scales.L_star,
        "phi": phi,
        "c": c,
        "p": p,
    }
    io.write_vtk(plot_mesh, out / f"{basename}.vtk", point_data=point_data,
                 cell_data={"minus_grad_phi": e_field / scales.L_star},
                 scale=scales.L_star)
    io.write_interface_csv(state, scales, out / "interface.csv")
    plots.plot_fields(plot_mesh, point_data, out / "fields.png", grad_field=e_field)


def _initial_interface(result: EquilibriumResult) -> dict:
    st = result.final_state
    layout = gamma_layout(st.ref_mesh)
    return {a.name: st.ref_mesh.nodes[a.nodes] for a in layout.arcs}


def _write_run_outputs(result: EquilibriumResult, params: PhysicalParams,
                       out: Path, mode: str) -> RunReport:
    io.write_iteration_log(result.records, out / "iterations.csv")
    io.write_mesh_txt(result.final_state.cur_mesh, out / "mesh.txt") \
        if result.final_state is not None else None
    export_fields(result, params, out)
    if result.final_state is not None:
        plots.plot_interface_evolution(_initial_interface(result),
                                       result.final_interface(),
                                       out / "interface_evolution.png")
    plots.plot_history(result.records, out / "history.png")
    report = RunReport(
        mode=mode,
        config={k: getattr(result.config, k) for k in
                ("d", "l", "s", "h", "refine_interface", "algorithm", "law",
                 "sigma_skip", "k", "omega", "err", "stop_metric", "max_iter", "seed")},
        physics={k: getattr(params, k) for k in
                 ("T", "gamma", "k_S", "G_S", "eps_r", "sigma_c", "p_S0", "p0", "c0")},
        status=result.status.name,
        exit_code=_STATUS_EXIT[result.status],
        message=result.message,
        energy_history=[r.energy.total for r in result.records],
        gen_history=[r.gen_residual for r in result.records],
    )
    report.add_check("terminated", result.status in _STATUS_EXIT,
                     detail=result.status.name)
    if result.records:
        gens = [r.gen_residual for r in result.records]
        report.add_check("neutrality residual <= 1e-8", max(gens) <= 1e-8,
                         detail=f"max {max(gens):.2e}")
    return report


def _checkpoints(result: EquilibriumResult, out: Path) -> None:
    every = result.config.checkpoint_every
    if every <= 0 or result.final_state is None:
        return
    st = result.final_state
    ck = out / "checkpoints"
    ck.mkdir(exist_ok=True)
    io.save_checkpoint(
        ck / "final.npz", st.cur_mesh,
        {"u": st.pb.u, "lam": st.lam, "U": st.disp.U},
        {"status": result.status.name, "iterations": len(result.records)})


def _mode_run(args, config: RunConfig, params: PhysicalParams, out: Path) -> int:
    if args.mode == "fixed-point":
        config = config.with_(algorithm="fixed_point")
        result = run_fixed_point(config, params)
    else:
        config = config.with_(algorithm="variational")
        result = run_variational(config, params)
    report = _write_run_outputs(result, params, out, args.mode)
    _checkpoints(result, out)
    io.write_report(report, out, stamp=time.strftime("%Y-%m-%d %H:%M:%S"))
    return _STATUS_EXIT[result.status]


def _mode_compare(args, config: RunConfig, params: PhysicalParams, out: Path) -> int:
    cmp = compare_laws(config, params)
    for name, res in (("classical", cmp.classical), ("modified", cmp.modified)):
        sub = out / name
        sub.mkdir(exist_ok=True)
        rep = _write_run_outputs(res, params, sub, f"compare/{name}")
        io.write_report(rep, sub, stamp=time.strftime("%Y-%m-%d %H:%M:%S"))
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric [name]", "value [L_star or 1]"])
        w.writerow(["hausdorff", repr(float(cmp.hausdorff))])
        w.writerow(["l2", repr(float(cmp.l2))])
        w.writerow(["partial", int(cmp.partial)])
    if len(cmp.delta_yl):
        with open(out / "delta_yl.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node [idx]", "delta_yl [N/m^2]"])
            p_scale = cmp.modified.scales.p_scale
            for i, v in enumerate(cmp.delta_yl):
                w.writerow([i, repr(float(v * p_scale))])
    if cmp.classical.final_state is not None and cmp.modified.final_state is not None:
        plots.plot_interface_evolution(
            cmp.classical.final_interface(), cmp.modified.final_interface(),
            out / "compare_interfaces.png")
    if cmp.partial:
        worst = max(_STATUS_EXIT[cmp.classical.status], _STATUS_EXIT[cmp.modified.status])
        return worst
    return EXIT_OK


def _mode_radial_oracle(args, config: RunConfig, params: PhysicalParams, out: Path) -> int:
    config = config.with_(s=0.0)
    ctx, scales, nd = build_context(config, params)
    state = ctx.evaluate(np.zeros((ctx.layout_ref.size, 2)))
    oracle = slab_profile_oracle(config.d / scales.L_star / 2.0, nd.u0, nd.g)
    fluid_nodes = state.cur_mesh.region_nodes(FLUID)
    y = state.cur_mesh.nodes[fluid_nodes, 1]
    u_fem = state.pb.u[fluid_nodes]
    u_ora = oracle(y)
    linf = float(np.abs(u_fem - u_ora).max())
    closed = radial_oracle(config.d / 2.0, params)
    with open(out / "slab_profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y [m]", "u_fem [1]", "u_oracle [1]", "abs_error [1]"])
        for yi, uf, uo in zip(y, u_fem, u_ora):
            w.writerow([repr(float(yi * scales.L_star)), repr(float(uf)),
                        repr(float(uo)), repr(float(abs(uf - uo)))])
    plots.plot_slab_profile(y, u_fem, u_ora, out / "slab_profile.png")
    report = RunReport(mode="radial-oracle", config={"d": config.d, "h": config.h},
                       physics={"sigma_c": params.sigma_c, "c0": params.c0, "T": params.T},
                       status="COMPLETED", exit_code=EXIT_OK)
    report.extras = {
        "linf_error": linf,
        "gen_residual": state.pb.gen_residual,
        "debye_length_m": closed.debye,
        "lambda_p": closed.lambda_p,
        "phi_wall_V": closed.phi_wall,
    }
    report.add_check("slab profile matches 1D oracle (Linf <= 1e-3)",
                     linf <= 1e-3, detail=f"Linf = {linf:.2e}")
    io.write_report(report, out, stamp=time.strftime("%Y-%m-%d %H:%M:%S"))
    return EXIT_OK


def _mode_gradient_check(args, config: RunConfig, params: PhysicalParams, out: Path) -> int:
    ctx, scales, nd = build_context(config, params)
    rep = fd_gradient_check(ctx, nd, scales.E_star, directions=3, seed=config.seed)
    io.write_gradient_check_csv(rep, out / "gradient_check.csv")
    plots.plot_gradient_check(rep, out / "gradient_check.png")
    report = RunReport(mode="gradient-check",
                       config={"h": config.h, "seed": config.seed},
                       physics={"p0": params.p0}, status="COMPLETED",
                       exit_code=EXIT_OK)
    report.extras = {"median_best_error": rep.median_best_error,
                     "best_errors": rep.best_errors, "slopes": rep.slopes}
    report.add_check("median relative error <= 5e-2",
                     rep.median_best_error <= 5e-2,
                     detail=f"median = {rep.median_best_error:.3e}")
    io.write_report(report, out, stamp=time.strftime("%Y-%m-%d %H:%M:%S"))
    return EXIT_OK


def _mode_yl_band(args, config: RunConfig, params: PhysicalParams, out: Path) -> int:
    band = yl_band(params)
    with open(out / "yl_band.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d_l [m]", "lambda_p [1]", "delta [N/m^2]", "relative [1]"])
        for r in band["rows"]:
            w.writerow([repr(float(r.d_l)), repr(float(r.lambda_p)),
                        repr(float(r.delta)), repr(float(r.relative))])
    plots.plot_yl_band(band, out / "yl_band.png")
    report = RunReport(mode="yl-band", config={}, physics={
        "sigma_c": params.sigma_c, "eps_r": params.eps_r, "k_S": params.k_S,
        "T": params.T}, status="COMPLETED", exit_code=EXIT_OK)
    report.extras = {
        "relative_low": band["relative_low"],
        "relative_high": band["relative_high"],
        "lambda_p_high": band["lambda_p_high"],
        "debye_table_m": band["debye_table"],
    }
    io.write_report(report, out, stamp=time.strftime("%Y-%m-%d %H:%M:%S"))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="poreshape",
        description="Equilibrium shape of a charged nanochannel/elastomer interface")
    parser.add_argument("--mode", required=True, choices=MODES)
    parser.add_argument("--config", default=None, help="INI configuration file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        if args.config:
            config, params = load_config(args.config)
        else:
            config, params = RunConfig(), PhysicalParams()
        if args.seed is not None:
            config = config.with_(seed=args.seed)
        if args.out is not None:
            config = config.with_(out_dir=args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    handlers = {
        "fixed-point": _mode_run,
        "variational": _mode_run,
        "compare": _mode_compare,
        "radial-oracle": _mode_radial_oracle,
        "gradient-check": _mode_gradient_check,
        "yl-band": _mode_yl_band,
    }
    return handlers[args.mode](args, config, params, out)


if __name__ == "__main__":
    sys.exit(main())
