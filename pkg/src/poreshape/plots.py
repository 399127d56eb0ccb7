"""Report figures rendered alongside the delimited outputs.

All functions write PNG files and never open interactive windows.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mesh import FLUID, SOLID, Mesh


def _tri(mesh: Mesh, region=None):
    import matplotlib.tri as mtri
    tris = mesh.triangles if region is None else mesh.triangles_of(region)
    return mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], tris)


def plot_interface_evolution(initial: dict, final: dict, path,
                             intermediates: list | None = None):
    """Initial vs final interface polylines (dimensionless coordinates)."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for name, pts in initial.items():
        ax.plot(pts[:, 0], pts[:, 1], "k--", lw=1,
                label="initial" if name == sorted(initial)[0] else None)
    for stage in intermediates or []:
        for pts in stage.values():
            ax.plot(pts[:, 0], pts[:, 1], color="0.6", lw=0.8)
    for name, pts in final.items():
        ax.plot(pts[:, 0], pts[:, 1], "r-", lw=1.5,
                label="final" if name == sorted(final)[0] else None)
    ax.set_xlabel("x [nm]")
    ax.set_ylabel("y [nm]")
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("interface evolution")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_history(records, path):
    """Energy components, interface displacement and fluid area vs iteration."""
    if not records:
        return
    n = [r.n for r in records]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    ax = axes[0, 0]
    ax.plot(n, [r.energy.total for r in records], "o-", ms=3)
    ax.set_ylabel("E total [E*]")
    ax = axes[0, 1]
    for key in ("mech_s", "mech_l", "el", "st"):
        ax.plot(n, [getattr(r.energy, key) for r in records], label=key, lw=1)
    ax.legend(fontsize=7)
    ax.set_ylabel("components [E*]")
    ax = axes[1, 0]
    ax.semilogy(n, [max(r.stop_value, 1e-16) for r in records], "o-", ms=3)
    ax.set_ylabel("stopping metric")
    ax.set_xlabel("iteration")
    ax = axes[1, 1]
    ax.plot(n, [r.fluid_area for r in records], "o-", ms=3)
    for r in records:
        if r.remeshed:
            ax.axvline(r.n, color="0.8", lw=0.5)
    ax.set_ylabel("fluid area [L*^2]")
    ax.set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_fields(mesh: Mesh, point_data: dict, path, grad_field: np.ndarray | None = None):
    """Tripcolor maps of selected nodal fields on the deformed mesh."""
    names = [k for k in ("U_mag", "phi", "c", "p") if k in point_data]
    if not names:
        return
    fig, axes = plt.subplots(len(names), 1, figsize=(8, 2.6 * len(names)),
                             squeeze=False)
    t_all = _tri(mesh)
    for ax, name in zip(axes[:, 0], names):
        vals = np.asarray(point_data[name])
        tc = ax.tripcolor(t_all, vals, shading="gouraud", cmap="viridis")
        fig.colorbar(tc, ax=ax, label=name)
        if name == "phi" and grad_field is not None:
            cent = mesh.nodes[mesh.triangles].mean(axis=1)
            step = max(1, len(cent) // 800)
            g = grad_field[::step]
            ax.quiver(cent[::step, 0], cent[::step, 1], g[:, 0], g[:, 1],
                      color="w", width=2e-3, scale_units="xy", angles="xy")
        ax.set_aspect("equal")
        ax.set_ylabel("y [nm]")
    axes[-1, 0].set_xlabel("x [nm]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_yl_band(band: dict, path):
    """Discrepancy vs screening parameter with the band endpoints marked."""
    rows = band["rows"]
    lam = [r.lambda_p for r in rows]
    rel = [r.relative for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lam, rel, "-")
    ax.axhline(band["relative_low"], color="0.6", ls="--", lw=0.8)
    ax.axhline(band["relative_high"], color="0.6", ls="--", lw=0.8)
    ax.set_xlabel(r"$\lambda_p$")
    ax.set_ylabel("relative discrepancy")
    ax.set_title("classical vs corrected force balance")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_slab_profile(y, u_fem, u_oracle, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    order = np.argsort(y)
    ax1.plot(y[order], u_fem[order], ".", ms=2, label="FEM")
    ax1.plot(y[order], u_oracle[order], "-", lw=1, label="1D oracle")
    ax1.set_xlabel("y [L*]")
    ax1.set_ylabel("u")
    ax1.legend()
    ax2.semilogy(y[order], np.abs(u_fem - u_oracle)[order] + 1e-18, ".", ms=2)
    ax2.set_xlabel("y [L*]")
    ax2.set_ylabel("|error|")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_gradient_check(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    dirs = sorted({r.direction for r in report.rows})
    for d in dirs:
        rows = [r for r in report.rows if r.direction == d]
        ax.loglog([r.h for r in rows], [max(r.rel_error, 1e-18) for r in rows],
                  "o-", label=f"direction {d}")
    ax.set_xlabel("step h [L*]")
    ax.set_ylabel("relative error vs analytic")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
