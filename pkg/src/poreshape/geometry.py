"""Planar geometry of the two-channel reference domain and polyline utilities.

The reference domain is an outer rectangle ``[0, 2l] x [y_min, y_max]``
containing two axis-aligned channel strips of width ``d`` that meet at
``x = l`` with a vertical offset ``s``. The fluid region is the union of
the strips; the lateral fluid/solid walls form the free interface.

All boundary polylines are oriented with the adjacent region interior on
the left (interface polylines: fluid on the left), so the outward normal
of the fluid is obtained by rotating the tangent clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from shapely.geometry import LineString


class BoundaryTag(IntEnum):
    """Boundary decomposition of the outer box and the interface."""

    I0 = 1      # inlet channel mouth on {x = 0}
    O0 = 2      # outlet channel mouth on {x = 2l}
    Z0 = 3      # clamped solid wall on {x = 0}
    SIGMA = 4   # clamped solid wall on {y = y_min} and {y = y_max}
    PI = 5      # clamped solid wall on {x = 2l}
    GAMMA = 6   # fluid/solid interface


class GeometryError(ValueError):
    pass


class InterfaceCollapseError(RuntimeError):
    """The interface polyline self-intersects: the pore has closed."""


@dataclass(frozen=True)
class Polyline:
    """Open oriented polyline with a boundary tag."""

    points: np.ndarray       # (n, 2)
    tag: BoundaryTag
    name: str

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 2:
            raise GeometryError(f"polyline '{self.name}' needs >= 2 planar points")

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def reversed(self) -> "Polyline":
        return Polyline(self.points[::-1].copy(), self.tag, self.name)


@dataclass(frozen=True)
class DomainGeometry:
    """Named boundary polylines plus the region loops they bound.

    ``loops`` maps a region name to the ordered list of (polyline name,
    forward flag) pairs whose concatenation is a counterclockwise loop.
    ``region_of_loop`` maps region names to FLUID/SOLID markers.
    """

    polylines: dict[str, Polyline]
    loops: dict[str, list[tuple[str, bool]]]
    region_of_loop: dict[str, int]

    def loop_points(self, loop_name: str) -> np.ndarray:
        """Closed CCW vertex chain of a region loop (last point != first)."""
        pts = []
        for name, fwd in self.loops[loop_name]:
            p = self.polylines[name].points
            if not fwd:
                p = p[::-1]
            pts.append(p[:-1])
        return np.vstack(pts)


def arc_lengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length along a polyline, starting at 0."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def polygon_area(points: np.ndarray) -> float:
    """Signed area of a closed polygon given as an open vertex chain."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def refine_coarsen_polyline(points: np.ndarray, h: float,
                            angle_tol: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Locally refine/coarsen a polyline toward spacing ``h``.

    Existing vertices are kept wherever spacing allows, so repeated calls
    do not erode corners or curved regions: only near-collinear vertices
    with short incident edges are dropped, and long edges are split by
    points on the segment. Returns (new_points, u) with ``u`` the
    arc-length coordinates along the input polyline.
    """
    s_in = arc_lengths(points)
    n = len(points)
    keep = np.ones(n, dtype=bool)
    # coarsening pass: drop flat vertices whose merged edge stays short
    i = 1
    last = 0
    while i < n - 1:
        v1 = points[i] - points[last]
        v2 = points[i + 1] - points[i]
        l1, l2 = np.hypot(*v1), np.hypot(*v2)
        if l1 > 0 and l2 > 0:
            cosang = np.clip(np.dot(v1, v2) / (l1 * l2), -1.0, 1.0)
            turning = math.acos(cosang)
            dev = abs(v1[0] * (points[i + 1] - points[last])[1]
                      - v1[1] * (points[i + 1] - points[last])[0]) / max(
                          np.hypot(*(points[i + 1] - points[last])), 1e-300)
            if turning < angle_tol and (l1 + l2) <= 1.2 * h and dev <= 0.1 * h:
                keep[i] = False
                i += 1
                continue
        last = i
        i += 1
    kept_idx = np.flatnonzero(keep)
    pts = [points[kept_idx[0]]]
    u = [s_in[kept_idx[0]]]
    # refinement pass: split long edges with points on the segment
    for a, b in zip(kept_idx[:-1], kept_idx[1:]):
        pa, pb = points[a], points[b]
        L = float(np.hypot(*(pb - pa)))
        nseg = max(1, int(round(L / h)))
        for m in range(1, nseg + 1):
            t = m / nseg
            pts.append(pa * (1 - t) + pb * t)
            u.append(s_in[a] * (1 - t) + s_in[b] * t)
    return np.asarray(pts), np.asarray(u)


def resample_polyline_param(points: np.ndarray, size) -> tuple[np.ndarray, np.ndarray]:
    """Resample a polyline at graded spacing, tracking source positions.

    Returns (new_points, u) where ``u`` is the arc-length coordinate of
    each new point measured along the input polyline. Both endpoints are
    kept exactly; spacing follows ``size`` (float or callable).
    """
    s_in = arc_lengths(points)
    total = s_in[-1]
    targets = [0.0]
    pos = 0.0
    # march along the polyline, stepping by the local size
    while pos < total:
        p = _point_at(points, s_in, pos)
        h_loc = float(np.asarray(size(p[None, :]))[0]) if callable(size) else float(size)
        pos = pos + h_loc
        targets.append(min(pos, total))
    u = np.asarray(targets)
    # merge a too-short trailing interval into its neighbor
    if len(u) > 2 and (u[-1] - u[-2]) < 0.5 * (u[-2] - u[-3]):
        u = np.delete(u, len(u) - 2)
    u[-1] = total
    pts = np.vstack([_point_at(points, s_in, v) for v in u])
    pts[0] = points[0]
    pts[-1] = points[-1]
    return pts, u


def _point_at(points: np.ndarray, s: np.ndarray, v: float) -> np.ndarray:
    j = int(np.clip(np.searchsorted(s, v) - 1, 0, len(points) - 2))
    seg = s[j + 1] - s[j]
    t = 0.0 if seg == 0 else (v - s[j]) / seg
    return points[j] * (1 - t) + points[j + 1] * t


def resample_polyline(points: np.ndarray, size) -> np.ndarray:
    """Resample a polyline at graded spacing, keeping both endpoints.

    ``size`` is either a float or a callable (n,2)->(n,) giving the local
    target spacing. Original interior corners are preserved by resampling
    each straight segment independently.
    """
    out = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        seg = b - a
        L = float(np.hypot(*seg))
        if L == 0.0:
            continue
        if callable(size):
            mid = 0.5 * (a + b)
            h_loc = min(float(np.asarray(size(np.array([a, mid, b]))).min()), L)
        else:
            h_loc = float(size)
        n = max(1, int(round(L / h_loc)))
        if callable(size):
            # graded subdivision: spacing proportional to the local size field
            t = np.linspace(0.0, 1.0, 4 * n + 1)
            probe = a[None, :] + t[:, None] * seg[None, :]
            w = 1.0 / np.asarray(size(probe))
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(t))])
            n = max(1, int(math.ceil(cum[-1] * L - 1e-9)))
            targets = np.linspace(0.0, cum[-1], n + 1)[1:]
            tt = np.interp(targets, cum, t)
            pts = a[None, :] + tt[:, None] * seg[None, :]
        else:
            n = max(1, int(math.ceil(L / h_loc - 1e-9)))
            tt = np.linspace(0.0, 1.0, n + 1)[1:]
            pts = a[None, :] + tt[:, None] * seg[None, :]
        pts[-1] = b
        out.extend(pts)
    return np.asarray(out)


def fillet_corners(points: np.ndarray, radius: float, n_arc: int = 6) -> np.ndarray:
    """Replace interior corners of a polyline by tangent circular arcs."""
    if radius <= 0 or len(points) < 3:
        return points.copy()
    out = [points[0]]
    for i in range(1, len(points) - 1):
        p_prev, p, p_next = points[i - 1], points[i], points[i + 1]
        v1 = p - p_prev
        v2 = p_next - p
        l1, l2 = np.hypot(*v1), np.hypot(*v2)
        u1, u2 = v1 / l1, v2 / l2
        cosang = float(np.clip(np.dot(u1, u2), -1.0, 1.0))
        ang = math.acos(cosang)
        if ang < 1e-12:
            out.append(p)
            continue
        # trim distance along each leg for a tangent arc of the given radius
        t = radius * math.tan(ang / 2.0)
        if t > 0.5 * l1 + 1e-12 or t > 0.5 * l2 + 1e-12:
            raise GeometryError(
                f"fillet radius {radius} too large for corner at {p} "
                f"(legs {l1:.3g}, {l2:.3g})"
            )
        a = p - t * u1
        b = p + t * u2
        # arc center: offset perpendicular to u1 on the turning side
        turn = math.copysign(1.0, u1[0] * u2[1] - u1[1] * u2[0])
        n1 = turn * np.array([-u1[1], u1[0]])
        center = a + radius * n1
        ang_a = math.atan2(*(a - center)[::-1])
        ang_b = math.atan2(*(b - center)[::-1])
        sweep = (ang_b - ang_a) % (2 * math.pi)
        if turn < 0:
            sweep -= 2 * math.pi
        angles = ang_a + sweep * np.linspace(0.0, 1.0, n_arc + 1)
        arc = center[None, :] + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        out.extend(arc)
    out.append(points[-1])
    return np.asarray(out)


def build_reference_domain(
    d: float, l: float, s: float, thickness: float | None = None,
    fillet: float = 0.0,
) -> DomainGeometry:
    """Construct the boundary description of the two-channel reference domain.

    Lengths may be dimensional or dimensionless as long as they are
    consistent. Channel mouths are horizontal-tangent at the outer box so
    the interface meets {x=0} and {x=2l} at a right angle.
    """
    if d <= 0 or l <= 0:
        raise GeometryError("violated 'd > 0 and l > 0'")
    if not (0 <= s < d):
        raise GeometryError(f"channels disconnected: violated '0 <= s < d' (s={s}, d={d})")
    t = 3.0 * d if thickness is None else thickness
    if t <= 0:
        raise GeometryError("elastomer thickness must be positive")
    L = 2.0 * l
    y_lo_l, y_hi_l = -d / 2.0, d / 2.0            # left channel walls
    y_lo_r, y_hi_r = y_lo_l + s, y_hi_l + s       # right channel walls
    y_min, y_max = y_lo_l - t, y_hi_r + t

    def poly(name, tag, pts):
        return Polyline(np.asarray(pts, dtype=float), tag, name)

    if s > 0:
        upper_pts = [(L, y_hi_r), (l, y_hi_r), (l, y_hi_l), (0.0, y_hi_l)]
        lower_pts = [(0.0, y_lo_l), (l, y_lo_l), (l, y_lo_r), (L, y_lo_r)]
    else:
        upper_pts = [(L, y_hi_r), (0.0, y_hi_l)]
        lower_pts = [(0.0, y_lo_l), (L, y_lo_r)]
    if fillet > 0 and s > 0:
        upper_pts = fillet_corners(np.asarray(upper_pts, float), fillet)
        lower_pts = fillet_corners(np.asarray(lower_pts, float), fillet)

    polylines = {}
    # interface arcs, fluid on the left
    polylines["gamma_upper"] = poly("gamma_upper", BoundaryTag.GAMMA, upper_pts)
    polylines["gamma_lower"] = poly("gamma_lower", BoundaryTag.GAMMA, lower_pts)
    # channel mouths, fluid on the left
    polylines["i0"] = poly("i0", BoundaryTag.I0, [(0.0, y_hi_l), (0.0, y_lo_l)])
    polylines["o0"] = poly("o0", BoundaryTag.O0, [(L, y_lo_r), (L, y_hi_r)])
    # outer solid boundary, box interior on the left
    polylines["z_up"] = poly("z_up", BoundaryTag.Z0, [(0.0, y_max), (0.0, y_hi_l)])
    polylines["z_lo"] = poly("z_lo", BoundaryTag.Z0, [(0.0, y_lo_l), (0.0, y_min)])
    polylines["pi_up"] = poly("pi_up", BoundaryTag.PI, [(L, y_hi_r), (L, y_max)])
    polylines["pi_lo"] = poly("pi_lo", BoundaryTag.PI, [(L, y_min), (L, y_lo_r)])
    polylines["sigma_top"] = poly("sigma_top", BoundaryTag.SIGMA, [(L, y_max), (0.0, y_max)])
    polylines["sigma_bot"] = poly("sigma_bot", BoundaryTag.SIGMA, [(0.0, y_min), (L, y_min)])

    from .mesh import FLUID, SOLID  # deferred: avoid a module cycle at import

    loops = {
        "fluid": [("gamma_lower", True), ("o0", True), ("gamma_upper", True), ("i0", True)],
        "solid_upper": [("gamma_upper", False), ("pi_up", True),
                        ("sigma_top", True), ("z_up", True)],
        "solid_lower": [("z_lo", True), ("sigma_bot", True),
                        ("pi_lo", True), ("gamma_lower", False)],
    }
    region_of_loop = {"fluid": FLUID, "solid_upper": SOLID, "solid_lower": SOLID}
    geom = DomainGeometry(polylines, loops, region_of_loop)
    for name in loops:
        if polygon_area(geom.loop_points(name)) <= 0:
            raise GeometryError(f"loop '{name}' is not counterclockwise")
    return geom


def polylines_intersect(chains: list[np.ndarray]) -> bool:
    """True if any chain self-intersects or two chains touch each other."""
    lines = [LineString(c) for c in chains]
    for ln in lines:
        if not ln.is_simple:
            return True
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            if lines[i].intersects(lines[j]):
                return True
    return False


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two polylines."""
    la, lb = LineString(a), LineString(b)
    return max(la.hausdorff_distance(lb), lb.hausdorff_distance(la))


def l2_polyline_distance(a: np.ndarray, b: np.ndarray, n: int = 400) -> float:
    """L2 distance of two polylines sampled at matching normalized arc length."""
    ta = arc_lengths(a) / max(arc_lengths(a)[-1], 1e-300)
    tb = arc_lengths(b) / max(arc_lengths(b)[-1], 1e-300)
    t = np.linspace(0.0, 1.0, n)
    pa = np.stack([np.interp(t, ta, a[:, 0]), np.interp(t, ta, a[:, 1])], axis=1)
    pb = np.stack([np.interp(t, tb, b[:, 0]), np.interp(t, tb, b[:, 1])], axis=1)
    d2 = np.sum((pa - pb) ** 2, axis=1)
    return float(math.sqrt(np.trapezoid(d2, t)))
