"""File formats: mesh text, legacy VTK export, CSV tables, checkpoints.

All CSV files start with a header line carrying column units; dimensional
columns are SI. The mesh text format is minimal: node count and ``x y``
lines, triangle count and ``i j k region`` lines, boundary edge count and
``i j tag`` lines.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .geometry import BoundaryTag
from .mesh import Mesh, MeshParams


def _r(x) -> str:
    """repr of a float, numpy-scalar safe (round-trips exactly)."""
    return repr(float(x))


def write_mesh_txt(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{_r(x)} {_r(y)}\n")
        fh.write(f"{mesh.n_triangles}\n")
        for (i, j, k), r in zip(mesh.triangles, mesh.tri_region):
            fh.write(f"{i} {j} {k} {int(r)}\n")
        fh.write(f"{len(mesh.boundary_edges)}\n")
        for (i, j), t in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{i} {j} {int(t)}\n")


def read_mesh_txt(path) -> Mesh:
    """Read the text format; chains are rebuilt from the tagged edges."""
    with open(path) as fh:
        tokens = fh.read().split()
    it = iter(tokens)
    nn = int(next(it))
    nodes = np.array([[float(next(it)), float(next(it))] for _ in range(nn)])
    nt = int(next(it))
    tri = np.zeros((nt, 3), dtype=np.int64)
    reg = np.zeros(nt, dtype=np.int8)
    for t in range(nt):
        tri[t] = (int(next(it)), int(next(it)), int(next(it)))
        reg[t] = int(next(it))
    ne = int(next(it))
    edges = np.zeros((ne, 2), dtype=np.int64)
    tags = np.zeros(ne, dtype=np.int16)
    for e in range(ne):
        edges[e] = (int(next(it)), int(next(it)))
        tags[e] = int(next(it))
    chains = _chains_from_edges(edges, tags)
    return Mesh(nodes=nodes, triangles=tri, tri_region=reg, boundary_edges=edges,
                boundary_tags=tags, chains=chains, loops={}, region_of_loop={},
                params=None)


def _chains_from_edges(edges: np.ndarray, tags: np.ndarray) -> dict:
    """Group tagged edges into maximal oriented chains."""
    chains = {}
    for tag in np.unique(tags):
        sel = edges[tags == tag]
        nxt = {int(i): int(j) for i, j in sel}
        starts = set(nxt) - {int(j) for j in sel[:, 1]}
        pieces = []
        for s in sorted(starts):
            chain = [s]
            while chain[-1] in nxt:
                chain.append(nxt.pop(chain[-1]))
            pieces.append(chain)
        while nxt:  # leftover closed loops
            s = min(nxt)
            chain = [s]
            while chain[-1] in nxt:
                chain.append(nxt.pop(chain[-1]))
            pieces.append(chain)
        for k, piece in enumerate(pieces):
            name = f"{BoundaryTag(int(tag)).name.lower()}_{k}"
            chains[name] = np.asarray(piece, dtype=np.int64)
    return chains


def write_vtk(mesh: Mesh, path, point_data: dict | None = None,
              cell_data: dict | None = None, scale: float = 1.0) -> None:
    """Legacy ASCII unstructured-grid export (triangles).

    ``point_data`` maps names to (n,) or (n, 2) arrays; ``cell_data``
    likewise per triangle. Coordinates are multiplied by ``scale``.
    """
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nporeshape export\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes * scale:
            fh.write(f"{x:.10g} {y:.10g} 0.0\n")
        nt = mesh.n_triangles
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in arr:
                        fh.write(f"{v:.10g}\n")
                else:
                    fh.write(f"VECTORS {name} double\n")
                    for vx, vy in arr:
                        fh.write(f"{vx:.10g} {vy:.10g} 0.0\n")
        if cell_data:
            fh.write(f"CELL_DATA {nt}\n")
            for name, arr in cell_data.items():
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in arr:
                        fh.write(f"{v:.10g}\n")
                else:
                    fh.write(f"VECTORS {name} double\n")
                    for vx, vy in arr:
                        fh.write(f"{vx:.10g} {vy:.10g} 0.0\n")


def write_iteration_log(records, path) -> None:
    """One row per outer iteration; header carries units."""
    cols = [
        ("n", "1"), ("sup_lambda", "L_star"), ("stop_value", "1"),
        ("E_mech_s", "E_star"), ("E_mech_l", "E_star"), ("E_el", "E_star"),
        ("E_st", "E_star"), ("E_total", "E_star"), ("gen_residual", "1"),
        ("residual_norm", "1"), ("fluid_area", "L_star^2"),
        ("remeshed", "bool"), ("wall_clock", "s"),
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{n} [{u}]" for n, u in cols])
        for r in records:
            e = r.energy
            w.writerow([r.n, _r(r.sup_lam), _r(r.stop_value),
                        _r(e.mech_s), _r(e.mech_l), _r(e.el), _r(e.st),
                        _r(e.total), _r(r.gen_residual), _r(r.residual_norm),
                        _r(r.fluid_area), int(r.remeshed), f"{r.wall_clock:.3f}"])


def write_interface_csv(state, scales, path) -> None:
    """Interface polyline with geometry and effective terms, SI units."""
    ifc = state.iface
    layout = ifc.layout
    mesh = state.cur_mesh
    L = scales.L_star
    p_sc = scales.p_scale
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arc [name]", "s [m]", "x [m]", "y [m]", "H [1/m]",
                    "p_star [N/m^2]", "gamma_star [N/m]", "phi [V]",
                    "traction_x [N/m^2]", "traction_y [N/m^2]"])
        from .interface import arc_lengths_of
        for arc in layout.arcs:
            sl = layout.slices[arc.name]
            s = arc_lengths_of(mesh, arc)
            pts = mesh.nodes[arc.nodes]
            for i in range(sl.stop - sl.start):
                gi = sl.start + i
                w.writerow([
                    arc.name, _r(s[i] * L), _r(pts[i, 0] * L), _r(pts[i, 1] * L),
                    _r(ifc.H[gi] / L),
                    _r(ifc.p_star[gi] * p_sc),
                    _r(ifc.gamma_star[gi] * p_sc * L),
                    _r(-ifc.u[gi] * scales.phi_star),
                    _r(ifc.traction[gi, 0] * p_sc),
                    _r(ifc.traction[gi, 1] * p_sc),
                ])


def write_gradient_check_csv(report, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["direction [id]", "h [L_star]", "fd_value [E_star/L_star]",
                    "analytic [E_star/L_star]", "rel_error [1]"])
        for r in report.rows:
            w.writerow([r.direction, _r(r.h), _r(r.fd_value),
                        _r(r.analytic), _r(r.rel_error)])


def write_report(report, out_dir, stamp: str = "") -> None:
    """JSON + plain-text run report; the timestamp stays in the header only."""
    out = Path(out_dir)
    data = report.to_dict()
    with open(out / "report.json", "w") as fh:
        json.dump(data, fh, indent=2, default=float)
    lines = []
    if stamp:
        lines.append(f"# generated {stamp}")
    lines.append(f"mode: {report.mode}")
    lines.append(f"status: {report.status} (exit {report.exit_code})")
    if report.message:
        lines.append(f"message: {report.message}")
    lines.append("")
    if report.checks:
        lines.append("checks:")
        for c in report.checks:
            lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}"
                         + (f": {c['detail']}" if c["detail"] else ""))
    with open(out / "report.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_checkpoint(path, mesh: Mesh, fields: dict, meta: dict | None = None) -> None:
    """Mesh + nodal fields in one npz archive (restartable state)."""
    payload = {
        "nodes": mesh.nodes, "triangles": mesh.triangles,
        "tri_region": mesh.tri_region, "boundary_edges": mesh.boundary_edges,
        "boundary_tags": mesh.boundary_tags,
        "chain_names": np.array(sorted(mesh.chains), dtype=object),
    }
    for name in sorted(mesh.chains):
        payload[f"chain_{name}"] = mesh.chains[name]
    for k, v in fields.items():
        payload[f"field_{k}"] = v
    if meta:
        payload["meta_json"] = np.array(json.dumps(meta, default=float))
    np.savez(path, **payload, allow_pickle=True)


def load_checkpoint(path) -> tuple[Mesh, dict, dict]:
    data = np.load(path, allow_pickle=True)
    chains = {str(n): data[f"chain_{n}"] for n in data["chain_names"]}
    mesh = Mesh(nodes=data["nodes"], triangles=data["triangles"],
                tri_region=data["tri_region"], boundary_edges=data["boundary_edges"],
                boundary_tags=data["boundary_tags"], chains=chains,
                loops={}, region_of_loop={}, params=None)
    fields = {k[6:]: data[k] for k in data.files if k.startswith("field_")}
    meta = json.loads(str(data["meta_json"])) if "meta_json" in data.files else {}
    return mesh, fields, meta
