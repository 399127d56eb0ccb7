"""Triangulation of the two-region domain: build, tag, deform, remesh.

The mesher is Delaunay-based: graded interior seeding plus a clearance rule
that keeps interior points out of the diametral circles of boundary
segments, which forces every boundary segment to appear as a Delaunay edge
(Gabriel condition). Per-region point sets are triangulated independently
and merged along the shared interface discretization, so the fluid/solid
interface is conforming by construction. Quality is raised by Laplacian
smoothing of interior points and circumcenter insertion for low-angle
triangles.

Boundary vertices are never moved, added or removed by ``remesh``; the
interface discretization therefore stays in 1:1 correspondence with the
reference interface across remeshing, which the outer drivers rely on for
displacement bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from matplotlib.path import Path as MplPath
from matplotlib.tri import Triangulation, TrapezoidMapTriFinder
from scipy.spatial import Delaunay, cKDTree

from .geometry import (
    BoundaryTag,
    DomainGeometry,
    GeometryError,
    InterfaceCollapseError,
    Polyline,
    polygon_area,
    polylines_intersect,
    resample_polyline,
)

FLUID = 0
SOLID = 1
ALL = -1


class MeshingError(RuntimeError):
    """Triangulation failed to conform to the prescribed boundary."""


@dataclass(frozen=True)
class MeshParams:
    """Sizing controls; carried on the mesh so remeshing can reuse them."""

    h: float
    refine_interface: float = 4.0
    min_angle: float = 20.0
    grading: float = 0.4
    seed: int = 0

    @property
    def h_fine(self) -> float:
        return self.h / self.refine_interface


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float        # rad
    max_aspect_ratio: float
    min_area: float
    inverted_count: int


@dataclass(frozen=True)
class Mesh:
    """Triangulated two-region domain with tagged, oriented boundary edges.

    Boundary edges are oriented with the adjacent region interior on the
    left (interface edges: fluid on the left). ``chains`` holds the ordered
    node indices of each named boundary polyline; ``loops`` the region
    loops in terms of chain names.
    """

    nodes: np.ndarray             # (n, 2)
    triangles: np.ndarray         # (m, 3) CCW
    tri_region: np.ndarray        # (m,)
    boundary_edges: np.ndarray    # (k, 2)
    boundary_tags: np.ndarray     # (k,)
    chains: dict[str, np.ndarray]
    loops: dict[str, list[tuple[str, bool]]]
    region_of_loop: dict[str, int]
    params: MeshParams | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangles_of(self, region: int) -> np.ndarray:
        if region == ALL:
            return self.triangles
        return self.triangles[self.tri_region == region]

    def region_nodes(self, region: int) -> np.ndarray:
        """Sorted indices of nodes incident to triangles of ``region``."""
        return np.unique(self.triangles_of(region))

    def nodes_of_tag(self, tag: BoundaryTag) -> np.ndarray:
        sel = self.boundary_tags == tag
        return np.unique(self.boundary_edges[sel])

    def edges_of_tag(self, tag: BoundaryTag) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == tag]

    def gamma_chain_names(self) -> list[str]:
        names = [n for n, c in self.chains.items()
                 if len(c) and n in self._chain_tags() and self._chain_tags()[n] == BoundaryTag.GAMMA]
        return sorted(names)

    def _chain_tags(self) -> dict[str, BoundaryTag]:
        out = {}
        edge_tag = {}
        for (i, j), t in zip(self.boundary_edges, self.boundary_tags):
            edge_tag[(int(i), int(j))] = BoundaryTag(int(t))
        for name, chain in self.chains.items():
            key = (int(chain[0]), int(chain[1]))
            out[name] = edge_tag.get(key, edge_tag.get((key[1], key[0])))
        return out

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def fluid_area(self) -> float:
        return float(np.sum(self.signed_areas()[self.tri_region == FLUID]))

    def quality(self) -> MeshQuality:
        return mesh_quality(self)

    def gamma_endpoint_nodes(self) -> np.ndarray:
        """Nodes where the interface meets the outer box boundary."""
        out = []
        tags = self._chain_tags()
        for name, chain in self.chains.items():
            if tags.get(name) == BoundaryTag.GAMMA and chain[0] != chain[-1]:
                out.extend([int(chain[0]), int(chain[-1])])
        return np.unique(np.array(out, dtype=np.int64))


def mesh_quality(mesh: Mesh) -> MeshQuality:
    p = mesh.nodes[mesh.triangles]
    e0 = p[:, 1] - p[:, 0]
    e1 = p[:, 2] - p[:, 1]
    e2 = p[:, 0] - p[:, 2]
    L = np.stack([np.hypot(*e0.T), np.hypot(*e1.T), np.hypot(*e2.T)], axis=1)
    areas = mesh.signed_areas()
    inverted = int(np.sum(areas <= 0.0))
    # law of cosines per corner; clip for roundoff
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        angs = np.stack([
            np.arccos(np.clip((c**2 + a**2 - b**2) / (2 * c * a), -1, 1)),
            np.arccos(np.clip((a**2 + b**2 - c**2) / (2 * a * b), -1, 1)),
            np.arccos(np.clip((b**2 + c**2 - a**2) / (2 * b * c), -1, 1)),
        ], axis=1)
    return MeshQuality(
        min_angle=float(np.nanmin(angs)),
        max_aspect_ratio=float(np.max(L.max(axis=1) / L.min(axis=1))),
        min_area=float(np.min(areas)),
        inverted_count=inverted,
    )


# ---------------------------------------------------------------------------
# triangulation internals


def _size_field(gamma_pts: np.ndarray | None, mp: MeshParams):
    """Local target edge length: fine near the interface, grading outward."""
    if gamma_pts is None or len(gamma_pts) == 0 or mp.refine_interface <= 1.0:
        return lambda x: np.full(len(np.atleast_2d(x)), mp.h)
    tree = cKDTree(gamma_pts)
    resolution = 0.25 * mp.h_fine     # sample spacing bias of the point tree

    def size(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d, _ = tree.query(x)
        d = np.maximum(d - resolution, 0.0)
        return np.clip(mp.h_fine + mp.grading * d, mp.h_fine, mp.h)

    return size


def _densify_chain(pts: np.ndarray, closed: bool) -> tuple[np.ndarray, np.ndarray]:
    """Boundary points + segment midpoints with local segment lengths."""
    seg = np.diff(pts, axis=0)
    if closed:
        seg = np.vstack([seg, pts[0] - pts[-1]])
        nxt = np.vstack([pts[1:], pts[:1]])
        mids = 0.5 * (pts + nxt)
    else:
        mids = 0.5 * (pts[:-1] + pts[1:])
    lens = np.hypot(seg[:, 0], seg[:, 1])
    vlen = np.zeros(len(pts))
    if closed:
        vlen = np.maximum(lens, np.roll(lens, 1))
    else:
        vlen[:-1] = np.maximum(vlen[:-1], lens)
        vlen[1:] = np.maximum(vlen[1:], lens)
    allp = np.vstack([pts, mids])
    alls = np.concatenate([vlen, lens])
    return allp, alls


def _hex_candidates(bbox, pitch, rng) -> np.ndarray:
    x0, y0, x1, y1 = bbox
    dy = pitch * math.sqrt(3.0) / 2.0
    rows = []
    ny = int(math.floor((y1 - y0) / dy)) + 1
    for iy in range(ny):
        y = y0 + (iy + 0.5) * dy
        off = 0.5 * pitch if iy % 2 else 0.0
        xs = np.arange(x0 + off + 0.5 * pitch, x1, pitch)
        if len(xs) == 0:
            continue
        rows.append(np.stack([xs, np.full(len(xs), y)], axis=1))
    if not rows:
        return np.zeros((0, 2))
    pts = np.vstack(rows)
    pts += (rng.random(pts.shape) - 0.5) * 0.18 * pitch
    return pts


def _tri_angles_min(pts, tris) -> np.ndarray:
    p = pts[tris]
    L2 = np.stack([
        np.sum((p[:, 1] - p[:, 0]) ** 2, axis=1),
        np.sum((p[:, 2] - p[:, 1]) ** 2, axis=1),
        np.sum((p[:, 0] - p[:, 2]) ** 2, axis=1),
    ], axis=1)
    L = np.sqrt(L2)
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    angs = np.stack([
        np.arccos(np.clip((c**2 + a**2 - b**2) / (2 * c * a), -1, 1)),
        np.arccos(np.clip((a**2 + b**2 - c**2) / (2 * a * b), -1, 1)),
        np.arccos(np.clip((b**2 + c**2 - a**2) / (2 * b * c), -1, 1)),
    ], axis=1)
    return angs.min(axis=1)


def _circumcenters(pts, tris) -> np.ndarray:
    a, b, c = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    ab, ac = b - a, c - a
    d = 2.0 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (ac[:, 1] * np.sum(ab * ab, axis=1) - ab[:, 1] * np.sum(ac * ac, axis=1)) / d
        uy = (ab[:, 0] * np.sum(ac * ac, axis=1) - ac[:, 0] * np.sum(ab * ab, axis=1)) / d
    return a + np.stack([ux, uy], axis=1)


def _keep_inside(pts, tris, path: MplPath) -> np.ndarray:
    cent = pts[tris].mean(axis=1)
    return tris[path.contains_points(cent)]


def _boundary_edges_of(tris: np.ndarray) -> set[tuple[int, int]]:
    edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return {tuple(e) for e in uniq[counts == 1]}


class _RegionMesher:
    """Quality triangulation of one polygonal region with fixed boundary."""

    def __init__(self, b_pts, segments_local, path, size, clear_tree, clear_len,
                 mp: MeshParams, rng, clearance: float = 0.58):
        self.b_pts = b_pts                      # fixed boundary points (local order)
        self.segments = {tuple(sorted(s)) for s in segments_local}
        self.path = path
        self.size = size
        self.clear_tree = clear_tree
        self.clear_len = clear_len
        self.mp = mp
        self.rng = rng
        self.clearance = clearance

    def _clearance_ok(self, pts, factor=None) -> np.ndarray:
        if len(pts) == 0:
            return np.zeros(0, dtype=bool)
        factor = self.clearance if factor is None else max(factor, self.clearance - 0.06)
        d, idx = self.clear_tree.query(pts)
        local = np.maximum(np.asarray(self.size(pts)), self.clear_len[idx])
        return d >= factor * local

    def _seed_interior(self) -> np.ndarray:
        x0, y0 = self.b_pts.min(axis=0)
        x1, y1 = self.b_pts.max(axis=0)
        cand = _hex_candidates((x0, y0, x1, y1), self.mp.h_fine, self.rng)
        if len(cand) == 0:
            return cand
        accept = self.rng.random(len(cand)) < (self.mp.h_fine / np.asarray(self.size(cand))) ** 2
        cand = cand[accept]
        cand = cand[self.path.contains_points(cand)]
        return cand[self._clearance_ok(cand)]

    def _triangulate(self, pts) -> np.ndarray:
        tris = Delaunay(pts).simplices.astype(np.int64)
        # normalize to CCW
        p = pts[tris]
        area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                 - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        flip = area2 < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        tris = tris[np.abs(area2) > 1e-14 * max(np.abs(area2).max(), 1e-30)]
        return _keep_inside(pts, tris, self.path)

    def _smooth(self, pts, tris, nb, rounds=1):
        for _ in range(rounds):
            edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
            acc = np.zeros_like(pts)
            cnt = np.zeros(len(pts))
            np.add.at(acc, edges[:, 0], pts[edges[:, 1]])
            np.add.at(acc, edges[:, 1], pts[edges[:, 0]])
            np.add.at(cnt, edges[:, 0], 1)
            np.add.at(cnt, edges[:, 1], 1)
            inner = cnt[nb:] > 0
            newp = pts.copy()
            newp[nb:][inner] = acc[nb:][inner] / cnt[nb:][inner, None]
            moved = newp[nb:]
            ok = self._clearance_ok(moved, factor=0.52) & self.path.contains_points(moved)
            newp[nb:][~ok] = pts[nb:][~ok]
            pts = newp
            tris = self._triangulate(pts)
        return pts, tris

    def _polish(self, pts, tris, nb, target, rounds=6):
        """Pattern search on interior vertices of remaining low-angle stars."""
        for _ in range(rounds):
            mins = _tri_angles_min(pts, tris)
            bad = np.where(mins < target)[0]
            if len(bad) == 0:
                break
            verts = np.unique(tris[bad])
            verts = verts[verts >= nb]
            if len(verts) == 0:
                break
            improved = False
            for v in verts:
                inc = np.where((tris == v).any(axis=1))[0]
                star = tris[inc]
                base = _tri_angles_min(pts, star).min()
                step = 0.25 * float(np.asarray(self.size(pts[v:v + 1]))[0])
                best, best_q = None, base
                for _ in range(3):
                    for dx, dy in ((step, 0), (-step, 0), (0, step), (0, -step),
                                   (step, step), (-step, step), (step, -step), (-step, -step)):
                        cand = pts[v] + (dx, dy)
                        if not self.path.contains_points(cand[None, :])[0]:
                            continue
                        if not self._clearance_ok(cand[None, :], factor=0.52)[0]:
                            continue
                        saved = pts[v].copy()
                        pts[v] = cand
                        q = _tri_angles_min(pts, star).min()
                        if q > best_q:
                            best, best_q = cand.copy(), q
                        pts[v] = saved
                    step *= 0.5
                if best is not None:
                    pts[v] = best
                    improved = True
            if not improved:
                break
            tris = self._triangulate(pts)
        return pts, tris

    def run(self) -> tuple[np.ndarray, np.ndarray]:
        nb = len(self.b_pts)
        interior = self._seed_interior()
        pts = np.vstack([self.b_pts, interior]) if len(interior) else self.b_pts.copy()
        tris = self._triangulate(pts)
        pts, tris = self._smooth(pts, tris, nb, rounds=3)
        target = math.radians(self.mp.min_angle)
        for _ in range(10):
            bad = _tri_angles_min(pts, tris) < target
            if not bad.any():
                break
            cc = _circumcenters(pts, tris[bad])
            good = np.isfinite(cc).all(axis=1)
            cc = cc[good]
            if len(cc) == 0:
                break
            cc = cc[self.path.contains_points(cc)]
            if len(cc) == 0:
                break
            cc = cc[self._clearance_ok(cc)]
            if len(cc) == 0:
                break
            # thin out mutually close insertions
            keep = np.ones(len(cc), dtype=bool)
            tree = cKDTree(cc)
            for i, j in tree.query_pairs(0.6 * self.mp.h_fine):
                if keep[i] and keep[j]:
                    keep[j] = False
            cc = cc[keep]
            d, _ = cKDTree(pts).query(cc)
            cc = cc[d >= 0.5 * np.asarray(self.size(cc))]
            if len(cc) == 0:
                break
            pts = np.vstack([pts, cc])
            tris = self._triangulate(pts)
            pts, tris = self._smooth(pts, tris, nb, rounds=1)
        pts, tris = self._polish(pts, tris, nb, target)
        # conformity: region boundary of the kept set == prescribed segments
        got = _boundary_edges_of(tris)
        if got != self.segments:
            missing = self.segments - got
            extra = got - self.segments
            raise MeshingError(
                f"non-conforming triangulation: {len(missing)} missing, "
                f"{len(extra)} extra boundary edges"
            )
        return pts, tris


def triangulate(geom: DomainGeometry, params: MeshParams) -> Mesh:
    """Conforming quality triangulation of a domain geometry.

    Interface polylines are sampled at ``h/refine_interface``, the rest of
    the boundary at ``h`` with grading in between; interior edge lengths
    follow the same size field.
    """
    gamma_names = [n for n, p in geom.polylines.items() if p.tag == BoundaryTag.GAMMA]
    gamma_dense = []
    for n in gamma_names:
        gamma_dense.append(resample_polyline(geom.polylines[n].points, params.h_fine / 2))
    gamma_pts = np.vstack(gamma_dense) if gamma_dense else None
    size = _size_field(gamma_pts, params)

    sampled = {
        name: resample_polyline(pl.points, size)
        for name, pl in geom.polylines.items()
    }
    return _triangulate_sampled(geom, sampled, size, params)


def _triangulate_sampled(geom: DomainGeometry, sampled: dict[str, np.ndarray],
                         size, params: MeshParams) -> Mesh:
    """Triangulate with boundary polylines already reduced to vertex chains."""
    registry: dict[tuple, int] = {}
    points: list[np.ndarray] = []

    def register(p) -> int:
        key = (round(float(p[0]), 12), round(float(p[1]), 12))
        idx = registry.get(key)
        if idx is None:
            idx = len(points)
            registry[key] = idx
            points.append(np.asarray(p, dtype=float))
        return idx

    chain_idx: dict[str, np.ndarray] = {}
    for name, pts in sampled.items():
        chain_idx[name] = np.array([register(p) for p in pts], dtype=np.int64)

    b_coords = np.asarray(points)
    nb_total = len(b_coords)

    # clearance structure over all boundary segments
    dense_pts, dense_len = [], []
    for name, pts in sampled.items():
        closed = chain_idx[name][0] == chain_idx[name][-1]
        dp, dl = _densify_chain(pts if not closed else pts[:-1], closed)
        dense_pts.append(dp)
        dense_len.append(dl)
    clear_tree = cKDTree(np.vstack(dense_pts))
    clear_len = np.concatenate(dense_len)

    loop_chain: dict[str, np.ndarray] = {}
    for lname, parts in geom.loops.items():
        idxs = []
        for pname, fwd in parts:
            c = chain_idx[pname] if fwd else chain_idx[pname][::-1]
            idxs.append(c[:-1])
        loop_chain[lname] = np.concatenate(idxs)

    all_tris, all_regions = [], []
    extra_points: list[np.ndarray] = []
    rng = np.random.default_rng(params.seed)
    for lname, chain in loop_chain.items():
        loop_pts = b_coords[chain]
        if polygon_area(loop_pts) <= 0:
            raise GeometryError(f"loop '{lname}' degenerate or mis-oriented")
        path = MplPath(loop_pts)
        nloc = len(chain)
        seg_local = [(i, (i + 1) % nloc) for i in range(nloc)]
        try:
            mesher = _RegionMesher(loop_pts, seg_local, path, size,
                                   clear_tree, clear_len, params, rng)
            pts_loc, tris_loc = mesher.run()
        except MeshingError:
            # one retry with a safer clearance (fewer interior points)
            mesher = _RegionMesher(loop_pts, seg_local, path, size,
                                   clear_tree, clear_len, params, rng, clearance=0.80)
            pts_loc, tris_loc = mesher.run()
        # map local indices to global: first nloc are the chain nodes
        g_interior = np.arange(len(pts_loc) - nloc, dtype=np.int64) + nb_total + sum(
            len(e) for e in extra_points
        )
        local_to_global = np.concatenate([chain, g_interior])
        extra_points.append(pts_loc[nloc:])
        all_tris.append(local_to_global[tris_loc])
        all_regions.append(np.full(len(tris_loc), geom.region_of_loop[lname], dtype=np.int8))

    nodes = np.vstack([b_coords] + [e for e in extra_points if len(e)])
    triangles = np.vstack(all_tris).astype(np.int64)
    tri_region = np.concatenate(all_regions)

    b_edges, b_tags = [], []
    for name, pl in geom.polylines.items():
        c = chain_idx[name]
        for i, j in zip(c[:-1], c[1:]):
            b_edges.append((int(i), int(j)))
            b_tags.append(int(pl.tag))
    mesh = Mesh(
        nodes=nodes,
        triangles=triangles,
        tri_region=tri_region,
        boundary_edges=np.asarray(b_edges, dtype=np.int64),
        boundary_tags=np.asarray(b_tags, dtype=np.int16),
        chains=chain_idx,
        loops=dict(geom.loops),
        region_of_loop=dict(geom.region_of_loop),
        params=params,
    )
    q = mesh.quality()
    if q.inverted_count:
        raise MeshingError(f"{q.inverted_count} inverted elements after triangulation")
    return mesh


def deform(mesh: Mesh, displacement: np.ndarray) -> Mesh:
    """Translate nodes by a nodal displacement field; tags are preserved.

    Inverted elements are reported through ``quality()``, not rejected;
    the caller decides whether to remesh.
    """
    if displacement.shape != mesh.nodes.shape:
        raise ValueError("displacement must be defined on all nodes")
    return replace(mesh, nodes=mesh.nodes + displacement)


class FieldTransfer:
    """P1 interpolation of nodal fields from an old mesh to a new one."""

    def __init__(self, old: Mesh, new: Mesh):
        self.old = old
        self.new = new
        self._finders: dict[int, tuple] = {}

    def _finder(self, region: int):
        if region not in self._finders:
            tris = self.old.triangles_of(region)
            # drop inverted/degenerate source triangles (a deformed mesh is a
            # legitimate transfer source right before remeshing)
            p = self.old.nodes[tris]
            area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                     - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
            tris = tris[area2 > 0]
            nodes = self.old.region_nodes(region)
            finder = None
            if len(tris):
                try:
                    t = Triangulation(self.old.nodes[:, 0], self.old.nodes[:, 1], tris)
                    finder = TrapezoidMapTriFinder(t)
                except (ValueError, RuntimeError):
                    finder = None
            self._finders[region] = (tris, finder, nodes, cKDTree(self.old.nodes[nodes]))
        return self._finders[region]

    def __call__(self, values: np.ndarray, region: int = ALL) -> np.ndarray:
        tris, finder, onodes, tree = self._finder(region)
        values = np.asarray(values)
        out_shape = (self.new.n_nodes,) + values.shape[1:]
        out = np.zeros(out_shape, dtype=values.dtype)
        q = self.new.region_nodes(region) if region != ALL else np.arange(self.new.n_nodes)
        pts = self.new.nodes[q]
        if finder is None:
            ti = np.full(len(pts), -1, dtype=np.int64)
        else:
            ti = finder(pts[:, 0], pts[:, 1])
        good = ti >= 0
        if good.any():
            tri = tris[ti[good]]
            a, b, c = (self.old.nodes[tri[:, k]] for k in range(3))
            v0, v1 = b - a, c - a
            d = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
            w = pts[good] - a
            l1 = (w[:, 0] * v1[:, 1] - w[:, 1] * v1[:, 0]) / d
            l2 = (v0[:, 0] * w[:, 1] - v0[:, 1] * w[:, 0]) / d
            l0 = 1.0 - l1 - l2
            if values.ndim == 1:
                out[q[good]] = (l0 * values[tri[:, 0]] + l1 * values[tri[:, 1]]
                                + l2 * values[tri[:, 2]])
            else:
                out[q[good]] = (l0[:, None] * values[tri[:, 0]]
                                + l1[:, None] * values[tri[:, 1]]
                                + l2[:, None] * values[tri[:, 2]])
        if (~good).any():
            _, nearest = tree.query(pts[~good])
            out[q[~good]] = values[onodes[nearest]]
        return out


def current_polylines(mesh: Mesh) -> dict[str, np.ndarray]:
    """Boundary polylines of the (possibly deformed) mesh, per chain."""
    return {name: mesh.nodes[c] for name, c in mesh.chains.items()}


def remesh(mesh: Mesh, resample_interface: bool = True
           ) -> tuple[Mesh, FieldTransfer, dict[str, np.ndarray]]:
    """Re-triangulate the current boundary.

    Open interface polylines are resampled at the target spacing in the
    current arc length (their endpoints and the whole outer boundary stay
    fixed); the third return value maps each resampled chain to the
    arc-length coordinates of its new vertices measured along the old
    chain, so displacement bookkeeping can follow the re-discretization.

    Raises :class:`InterfaceCollapseError` when the interface polylines
    intersect themselves or each other (the pore has closed).
    """
    if mesh.params is None:
        raise ValueError("mesh carries no sizing parameters; cannot remesh")
    tags = mesh._chain_tags()
    polys = current_polylines(mesh)
    gamma_names = [n for n, t in tags.items() if t == BoundaryTag.GAMMA]
    gamma = [polys[n] for n in gamma_names]
    if polylines_intersect(gamma):
        raise InterfaceCollapseError("interface collapse")

    params_u: dict[str, np.ndarray] = {}
    if resample_interface:
        from .geometry import refine_coarsen_polyline
        for n in gamma_names:
            closed = mesh.chains[n][0] == mesh.chains[n][-1]
            if closed:
                continue
            pts_new, u = refine_coarsen_polyline(polys[n], mesh.params.h_fine)
            polys[n] = pts_new
            params_u[n] = u

    geom = DomainGeometry(
        polylines={n: Polyline(polys[n], tags[n], n) for n in polys},
        loops=mesh.loops,
        region_of_loop=mesh.region_of_loop,
    )
    gamma_pts = np.vstack([polys[n] for n in gamma_names]) if gamma_names else None
    size = _size_field(gamma_pts, mesh.params)
    try:
        new = _triangulate_sampled(geom, polys, size, mesh.params)
    except (MeshingError, GeometryError) as exc:
        # conformity loss at a pinched interface is a closing pore
        raise InterfaceCollapseError(f"interface collapse ({exc})") from exc
    return new, FieldTransfer(mesh, new), params_u


# ---------------------------------------------------------------------------
# structured helper meshes for tests and 1D-limit studies


def structured_rect_mesh(nx: int, ny: int, x0=0.0, x1=1.0, y0=0.0, y1=1.0,
                         region: int = FLUID,
                         tags=(BoundaryTag.I0, BoundaryTag.O0,
                               BoundaryTag.GAMMA, BoundaryTag.GAMMA)) -> Mesh:
    """Uniform right-triangle mesh of a rectangle.

    ``tags`` order: left, right, bottom, top. Chains are oriented with the
    interior on the left.
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.asarray(tris, dtype=np.int64)

    left_tag, right_tag, bottom_tag, top_tag = tags
    chains = {
        "bottom": np.array([nid(i, 0) for i in range(nx + 1)]),
        "right": np.array([nid(nx, j) for j in range(ny + 1)]),
        "top": np.array([nid(i, ny) for i in range(nx, -1, -1)]),
        "left": np.array([nid(0, j) for j in range(ny, -1, -1)]),
    }
    edges, etags = [], []
    for name, tag in (("bottom", bottom_tag), ("right", right_tag),
                      ("top", top_tag), ("left", left_tag)):
        c = chains[name]
        for i, j in zip(c[:-1], c[1:]):
            edges.append((int(i), int(j)))
            etags.append(int(tag))
    return Mesh(
        nodes=nodes,
        triangles=triangles,
        tri_region=np.full(len(triangles), region, dtype=np.int8),
        boundary_edges=np.asarray(edges, dtype=np.int64),
        boundary_tags=np.asarray(etags, dtype=np.int16),
        chains=chains,
        loops={"main": [("bottom", True), ("right", True), ("top", True), ("left", True)]},
        region_of_loop={"main": region},
        params=MeshParams(h=float(max((x1 - x0) / nx, (y1 - y0) / ny)), refine_interface=1.0),
    )


def unit_square_mesh(n: int) -> Mesh:
    return structured_rect_mesh(n, n)


def disk_mesh(radius: float, h: float, seed: int = 0) -> Mesh:
    """Quality mesh of a disk with a single closed interface loop."""
    n = max(8, int(round(2 * math.pi * radius / h)))
    ang = np.linspace(0.0, 2 * math.pi, n + 1)
    pts = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    pts[-1] = pts[0]
    geom = DomainGeometry(
        polylines={"circle": Polyline(pts, BoundaryTag.GAMMA, "circle")},
        loops={"fluid": [("circle", True)]},
        region_of_loop={"fluid": FLUID},
    )
    params = MeshParams(h=h, refine_interface=1.0, seed=seed)
    return _triangulate_sampled(geom, {"circle": pts}, lambda x: np.full(len(np.atleast_2d(x)), h), params)


def extract_region_boundary(mesh: Mesh, region: int) -> set[tuple[int, int]]:
    """Undirected edges bordered by exactly one triangle of ``region``."""
    tris = mesh.triangles_of(region)
    return _boundary_edges_of(tris)
