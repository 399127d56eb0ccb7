"""Geometric engine for the fluid/solid interface.

Provides ordered interface arcs, outward normals (exterior to the fluid),
the harmonic extension of the normal field, the smoothed curvature from a
surface Helmholtz problem on each arc, tangential derivatives of traces,
the electrostatic corrections to pressure and tension, the admissibility
projection of boundary updates, and the volumetric harmonic extension of
interface displacements used to move the mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import BoundaryTag, arc_lengths
from .mesh import ALL, FLUID, Mesh
from .params import DimensionlessGroups
from . import fem


@dataclass(frozen=True)
class GammaArc:
    """One connected interface polyline, fluid on the left."""

    name: str
    nodes: np.ndarray        # ordered global node ids (closed arcs: no repeat)
    closed: bool


@dataclass(frozen=True)
class GammaLayout:
    """Canonical ordering of all interface nodes (arcs sorted by name)."""

    arcs: tuple
    nodes: np.ndarray
    slices: dict

    @property
    def size(self) -> int:
        return len(self.nodes)

    def arc_values(self, name: str, values: np.ndarray) -> np.ndarray:
        return values[self.slices[name]]


def gamma_layout(mesh: Mesh) -> GammaLayout:
    tags = mesh._chain_tags()
    arcs = []
    for name in sorted(mesh.chains):
        if tags.get(name) != BoundaryTag.GAMMA:
            continue
        chain = mesh.chains[name]
        closed = chain[0] == chain[-1]
        nodes = chain[:-1] if closed else chain
        arcs.append(GammaArc(name, np.asarray(nodes, dtype=np.int64), closed))
    if not arcs:
        raise ValueError("mesh has no interface edges")
    slices, nodes, off = {}, [], 0
    for a in arcs:
        slices[a.name] = slice(off, off + len(a.nodes))
        nodes.append(a.nodes)
        off += len(a.nodes)
    return GammaLayout(tuple(arcs), np.concatenate(nodes), slices)


def _arc_points(mesh: Mesh, arc: GammaArc) -> np.ndarray:
    pts = mesh.nodes[arc.nodes]
    if arc.closed:
        pts = np.vstack([pts, pts[:1]])
    return pts


def arc_lengths_of(mesh: Mesh, arc: GammaArc) -> np.ndarray:
    """Arc-length coordinate per arc node (closed arcs: length of last edge
    wraps around and is not included)."""
    return arc_lengths(_arc_points(mesh, arc))[: len(arc.nodes)]


def nodal_normals(mesh: Mesh, layout: GammaLayout) -> np.ndarray:
    """Unit outward normals (fluid -> solid) per layout node.

    The normal of each edge is the clockwise rotation of its tangent
    (fluid on the left); nodal values average the adjacent edge normals.
    """
    out = np.zeros((layout.size, 2))
    for arc in layout.arcs:
        pts = _arc_points(mesh, arc)
        t = np.diff(pts, axis=0)
        en = np.stack([t[:, 1], -t[:, 0]], axis=1)
        en /= np.linalg.norm(en, axis=1)[:, None]
        m = len(arc.nodes)
        nv = np.zeros((m, 2))
        if arc.closed:
            nv += en
            nv += np.roll(en, 1, axis=0)
        else:
            nv[:-1] += en
            nv[1:] += en
        nv /= np.linalg.norm(nv, axis=1)[:, None]
        out[layout.slices[arc.name]] = nv
    return out


def extend_normal(mesh: Mesh, layout: GammaLayout | None = None,
                  taper: bool = True) -> np.ndarray:
    """Componentwise harmonic extension of the interface normal into the fluid.

    Dirichlet data: the nodal normal on the interface, zero on the channel
    mouths. Near the interface endpoints the data ramps to zero over two
    edges so the trace stays continuous where the interface meets the
    mouths.
    """
    if layout is None:
        layout = gamma_layout(mesh)
    nu = nodal_normals(mesh, layout)
    factor = np.ones(layout.size)
    if taper:
        for arc in layout.arcs:
            if arc.closed:
                continue
            sl = layout.slices[arc.name]
            f = np.ones(sl.stop - sl.start)
            f[0] = 0.0
            f[-1] = 0.0
            if len(f) > 2:
                f[1] = 0.5
                f[-2] = 0.5
            factor[sl] = f
    data = nu * factor[:, None]

    K, _ = fem.assemble_scalar(mesh, FLUID, a=1.0, r=0.0)
    fluid_nodes = mesh.region_nodes(FLUID)
    mouth_nodes = np.concatenate([
        mesh.nodes_of_tag(BoundaryTag.I0), mesh.nodes_of_tag(BoundaryTag.O0)])
    fixed = np.concatenate([layout.nodes, mouth_nodes])
    out = np.zeros((mesh.n_nodes, 2))
    for comp in range(2):
        vals = np.concatenate([data[:, comp], np.zeros(len(mouth_nodes))])
        # endpoints appear in both sets with value 0 on both sides
        sys = fem.DirichletSystem(K, np.zeros(mesh.n_nodes), fixed, vals, fluid_nodes)
        out[:, comp] = sys.solve(1e-11)
    return out


def surface_divergence(mesh: Mesh, layout: GammaLayout, V: np.ndarray,
                       nu: np.ndarray) -> np.ndarray:
    """Tangential divergence of the extension on the interface.

    On a curve, div V - nu.(grad V).nu equals tau . d(V|_Gamma)/ds, so only
    the interface trace of the extension enters; this keeps flat walls at
    exactly zero curvature (the volumetric gradient of the P1 extension
    carries an O(h) one-sided bias at the boundary that the trace form
    avoids).
    """
    tau = np.stack([-nu[:, 1], nu[:, 0]], axis=1)
    dV_ds = np.stack([
        tangential_derivative(mesh, layout, V[:, 0]),
        tangential_derivative(mesh, layout, V[:, 1]),
    ], axis=1)
    return np.sum(tau * dV_ds, axis=1)


def surface_divergence_volume(mesh: Mesh, layout: GammaLayout, V: np.ndarray,
                              nu: np.ndarray) -> np.ndarray:
    """div V - nu.(grad V).nu from element gradients of the fluid extension.

    One-sided averages at the boundary make this O(h)-biased; kept for
    consistency diagnostics against the trace form.
    """
    tris, _, grad = fem.tri_geometry(mesh, FLUID)
    gv = np.einsum("tik,tid->tkd", grad, V[tris])     # gv[t,k,d] = dV_d/dx_k
    pos = -np.ones(mesh.n_nodes, dtype=np.int64)
    pos[layout.nodes] = np.arange(layout.size)
    acc = np.zeros(layout.size)
    cnt = np.zeros(layout.size)
    for loc in range(3):
        p = pos[tris[:, loc]]
        m = p >= 0
        if not m.any():
            continue
        g = gv[m]
        nn = nu[p[m]]
        div = g[:, 0, 0] + g[:, 1, 1]
        nTgn = np.einsum("tk,tkd,td->t", nn, g, nn)
        np.add.at(acc, p[m], div - nTgn)
        np.add.at(cnt, p[m], 1.0)
    cnt[cnt == 0] = 1.0
    return acc / cnt


def smooth_along_gamma(mesh: Mesh, layout: GammaLayout, values: np.ndarray,
                       eps_s: float, zero_ends: bool = True) -> np.ndarray:
    """Surface Helmholtz smoother -eps_s f'' + f = values on each arc.

    P1 elements on the polyline; open arcs carry f = 0 at the endpoints
    when ``zero_ends``, closed arcs are periodic. ``eps_s = 0`` returns
    the input (with endpoint values zeroed where requested).
    """
    out = np.zeros(layout.size)
    for arc in layout.arcs:
        sl = layout.slices[arc.name]
        fa = values[sl]
        m = len(arc.nodes)
        if eps_s == 0.0:
            ha = fa.copy()
            if not arc.closed and zero_ends:
                ha[0] = 0.0
                ha[-1] = 0.0
            out[sl] = ha
            continue
        pts = _arc_points(mesh, arc)
        L = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        i0 = np.arange(len(L))
        i1 = (i0 + 1) % m if arc.closed else i0 + 1
        rows = np.concatenate([i0, i0, i1, i1])
        cols = np.concatenate([i0, i1, i0, i1])
        kv = np.concatenate([1 / L, -1 / L, -1 / L, 1 / L]) * eps_s
        mv = np.concatenate([L / 3, L / 6, L / 6, L / 3])
        A = sp.coo_matrix((kv + mv, (rows, cols)), shape=(m, m)).tocsr()
        rhs = np.zeros(m)
        np.add.at(rhs, i0, L * (fa[i0] / 3 + fa[i1] / 6))
        np.add.at(rhs, i1, L * (fa[i0] / 6 + fa[i1] / 3))
        if arc.closed:
            out[sl] = fem.solve_spd(A.tocsc(), rhs, 1e-12)
        elif zero_ends:
            sy = fem.DirichletSystem(A, rhs, np.array([0, m - 1]), np.zeros(2))
            out[sl] = sy.solve(1e-12)
        else:
            out[sl] = fem.solve_spd(A.tocsc(), rhs, 1e-12)
    return out


def smoothed_curvature(mesh: Mesh, layout: GammaLayout, V: np.ndarray,
                       nu: np.ndarray, eps_s: float) -> np.ndarray:
    """Curvature from the surface Helmholtz smoother on each arc.

    Solves -eps_s H'' + H = div_tau(V) with P1 elements on the polyline,
    H = 0 at open-arc endpoints (periodic on closed arcs). With eps_s = 0
    the raw nodal surface divergence is returned (endpoint values zeroed).
    """
    f = surface_divergence(mesh, layout, V, nu)
    return smooth_along_gamma(mesh, layout, f, eps_s, zero_ends=True)


def turning_normals(mesh: Mesh, layout: GammaLayout) -> np.ndarray:
    """Exact gradient of the polyline length per node: tau_in - tau_out.

    Equals the discrete curvature-normal H w nu of the polyline (turning
    angle times the averaged normal); zero at open-arc endpoints.
    """
    out = np.zeros((layout.size, 2))
    for arc in layout.arcs:
        pts = _arc_points(mesh, arc)
        t = np.diff(pts, axis=0)
        t /= np.linalg.norm(t, axis=1)[:, None]
        m = len(arc.nodes)
        tv = np.zeros((m, 2))
        if arc.closed:
            tv = np.roll(t, 1, axis=0) - t
        else:
            tv[1:-1] = t[:-1] - t[1:]
        out[layout.slices[arc.name]] = tv
    return out


def tangential_derivative(mesh: Mesh, layout: GammaLayout, values: np.ndarray) -> np.ndarray:
    """d(values)/d(arc length) per layout node, central where possible."""
    out = np.zeros(layout.size)
    for arc in layout.arcs:
        sl = layout.slices[arc.name]
        va = values[arc.nodes]
        pts = _arc_points(mesh, arc)
        s = arc_lengths(pts)
        m = len(arc.nodes)
        d = np.zeros(m)
        if arc.closed:
            total = s[-1]
            sv = s[:m]
            d = (np.roll(va, -1) - np.roll(va, 1)) / (
                (np.roll(sv, -1) - np.roll(sv, 1)) % total)
        else:
            d[1:-1] = (va[2:] - va[:-2]) / (s[2:] - s[:-2])
            d[0] = (va[1] - va[0]) / (s[1] - s[0])
            d[-1] = (va[-1] - va[-2]) / (s[-1] - s[-2])
        out[sl] = d
    return out


def effective_terms(p_hat: np.ndarray, u_gamma: np.ndarray, dtau_u: np.ndarray,
                    nd: DimensionlessGroups, charged: bool = True):
    """Electrostatically corrected pressure and tension (dimensionless).

    p* = p + (eps/2)(|dphi/dtau|^2 - (sigma_c/eps)^2) and
    gamma* = gamma - sigma_c phi; in the package scaling the corrections
    are (1/(2 u0))(|du/dtau|^2 - g^2) and (g/u0) u. In the uncharged
    limit both reduce to the plain pressure and tension.
    """
    if not charged:
        return p_hat.copy(), np.full_like(p_hat, nd.gamma)
    p_star = p_hat + 0.5 * nd.eps_hat * (dtau_u**2 - nd.g**2)
    gamma_star = nd.gamma + nd.sigma_hat * u_gamma
    return p_star, gamma_star


def project_compatibility(mesh: Mesh, layout: GammaLayout, update: np.ndarray,
                          nu: np.ndarray | None = None) -> np.ndarray:
    """Project a boundary update onto the admissible set.

    Zeroes the update where the interface meets the outer boundary and
    removes the normal component at the adjacent nodes (one-sided
    difference form of the right-angle contact condition). Idempotent.
    """
    if nu is None:
        nu = nodal_normals(mesh, layout)
    out = np.asarray(update, dtype=float).copy()
    for arc in layout.arcs:
        if arc.closed:
            continue
        sl = layout.slices[arc.name]
        a, b = sl.start, sl.stop
        out[a] = 0.0
        out[b - 1] = 0.0
        if b - a > 2:
            for j in (a + 1, b - 2):
                out[j] -= (out[j] @ nu[j]) * nu[j]
    return out


@dataclass(frozen=True)
class GammaMap:
    """Arc-length correspondence between reference interface nodes and the
    (possibly re-discretized) current interface vertices.

    ``ref_s``/``cur_s`` hold, per arc name, the reference arc-length
    coordinate of each node; interpolation and its adjoint scatter move
    nodal fields and nodal functionals between the two discretizations.
    When the discretizations coincide both maps are the identity.
    """

    ref_layout: GammaLayout
    cur_layout: GammaLayout
    ref_s: dict
    cur_s: dict

    def ref_to_cur(self, values: np.ndarray) -> np.ndarray:
        out_shape = (self.cur_layout.size,) + values.shape[1:]
        out = np.zeros(out_shape)
        for arc in self.ref_layout.arcs:
            rs, cs = self.ref_s[arc.name], self.cur_s[arc.name]
            rsl = self.ref_layout.slices[arc.name]
            csl = self.cur_layout.slices[arc.name]
            if values.ndim == 1:
                out[csl] = np.interp(cs, rs, values[rsl])
            else:
                for comp in range(values.shape[1]):
                    out[csl][:, comp] = np.interp(cs, rs, values[rsl][:, comp])
        return out

    def scatter_to_ref(self, loads: np.ndarray) -> np.ndarray:
        """Adjoint of ``ref_to_cur``: nodal functionals onto the reference basis."""
        out_shape = (self.ref_layout.size,) + loads.shape[1:]
        out = np.zeros(out_shape)
        for arc in self.ref_layout.arcs:
            rs, cs = self.ref_s[arc.name], self.cur_s[arc.name]
            rsl = self.ref_layout.slices[arc.name]
            csl = self.cur_layout.slices[arc.name]
            j = np.clip(np.searchsorted(rs, cs) - 1, 0, len(rs) - 2)
            seg = rs[j + 1] - rs[j]
            t = np.where(seg > 0, (cs - rs[j]) / np.where(seg > 0, seg, 1.0), 0.0)
            t = np.clip(t, 0.0, 1.0)
            sub = loads[csl]
            if loads.ndim == 1:
                np.add.at(out, rsl.start + j, (1 - t) * sub)
                np.add.at(out, rsl.start + j + 1, t * sub)
            else:
                for comp in range(loads.shape[1]):
                    np.add.at(out[:, comp], rsl.start + j, (1 - t) * sub[:, comp])
                    np.add.at(out[:, comp], rsl.start + j + 1, t * sub[:, comp])
        return out

    def stretch(self, cur_mesh: Mesh) -> np.ndarray:
        """Current-to-reference length ratio per current vertex."""
        from .geometry import arc_lengths
        out = np.ones(self.cur_layout.size)
        for arc in self.cur_layout.arcs:
            csl = self.cur_layout.slices[arc.name]
            cs = self.cur_s[arc.name]
            pts = cur_mesh.nodes[arc.nodes]
            sa = arc_lengths(pts if not arc.closed else np.vstack([pts, pts[:1]]))
            sa = sa[: len(arc.nodes)]
            d = np.gradient(sa, cs) if len(cs) > 1 else np.ones_like(cs)
            out[csl] = np.maximum(d, 1e-12)
        return out


def identity_gamma_map(mesh: Mesh, layout: GammaLayout | None = None) -> GammaMap:
    if layout is None:
        layout = gamma_layout(mesh)
    s = {a.name: arc_lengths_of(mesh, a) for a in layout.arcs}
    return GammaMap(layout, layout, s, dict(s))


def admissible_normal_mask(layout: GammaLayout) -> np.ndarray:
    """Nodes whose normal motion is free under the compatibility projection.

    Open-arc endpoints are fixed and their neighbors carry no normal
    component; measuring gradients on this mask gives the derivative
    restricted to admissible perturbations.
    """
    mask = np.ones(layout.size, dtype=bool)
    for arc in layout.arcs:
        if arc.closed:
            continue
        sl = layout.slices[arc.name]
        mask[sl.start] = False
        mask[sl.stop - 1] = False
        if sl.stop - sl.start > 2:
            mask[sl.start + 1] = False
            mask[sl.stop - 2] = False
    return mask


def extend_displacement(mesh: Mesh, layout: GammaLayout, lam: np.ndarray) -> np.ndarray:
    """Harmonic extension of an interface displacement into both regions.

    Componentwise discrete harmonic with the given data on the interface
    and zero on the outer box; used to move mesh nodes while keeping the
    box fixed.
    """
    K, _ = fem.assemble_scalar(mesh, ALL, a=1.0, r=0.0)
    outer_parts = [mesh.nodes_of_tag(t) for t in
                   (BoundaryTag.I0, BoundaryTag.O0, BoundaryTag.Z0,
                    BoundaryTag.SIGMA, BoundaryTag.PI)]
    outer = np.unique(np.concatenate(outer_parts)) if outer_parts else np.zeros(0, np.int64)
    fixed = np.concatenate([layout.nodes, outer])
    out = np.zeros((mesh.n_nodes, 2))
    for comp in range(2):
        vals = np.concatenate([lam[:, comp], np.zeros(len(outer))])
        sys = fem.DirichletSystem(K, np.zeros(mesh.n_nodes), fixed, vals)
        out[:, comp] = sys.solve(1e-11)
    return out


@dataclass(frozen=True)
class InterfaceState:
    """Per-interface-node geometric and effective quantities (dimensionless).

    Arrays follow the layout order of the current mesh; ``traction`` is
    the current-configuration stress vector recovered from the reaction
    forces of the solid solve divided by the lumped current weights.
    """

    layout: GammaLayout
    nu: np.ndarray            # (m, 2)
    H: np.ndarray             # (m,)
    u: np.ndarray             # (m,) potential unknown trace
    dtau_u: np.ndarray        # (m,)
    p: np.ndarray             # (m,) fluid pressure trace
    p_star: np.ndarray        # (m,)
    gamma_star: np.ndarray    # (m,)
    traction: np.ndarray      # (m, 2)
    weights: np.ndarray       # (m,) lumped boundary weights (current)
    eps_s: float

    def h_gamma(self) -> float:
        """Mean interface edge length (current configuration)."""
        return float(np.mean(self.weights))


def build_interface_state(cur_mesh: Mesh, nd: DimensionlessGroups,
                          pb, traction: np.ndarray,
                          eps_s: float | None = None) -> InterfaceState:
    """Assemble the interface state on the current mesh.

    ``pb`` is the potential solution on the current mesh; ``traction`` the
    (m, 2) current-configuration stress vectors in layout order; ``eps_s``
    defaults to (2 h_Gamma)^2.
    """
    layout = gamma_layout(cur_mesh)
    nu = nodal_normals(cur_mesh, layout)
    gamma_edges = cur_mesh.edges_of_tag(BoundaryTag.GAMMA)
    w = fem.lumped_boundary_weights(cur_mesh, gamma_edges)[layout.nodes]
    if eps_s is None:
        eps_s = (2.0 * float(np.mean(w))) ** 2
    V = extend_normal(cur_mesh, layout)
    H = smoothed_curvature(cur_mesh, layout, V, nu, eps_s)
    u_gamma = pb.u[layout.nodes]
    dtau_u = tangential_derivative(cur_mesh, layout, pb.u) if pb.charged \
        else np.zeros(layout.size)
    p_trace = pb.p_hat(nd)[layout.nodes]
    p_star, gamma_star = effective_terms(p_trace, u_gamma, dtau_u, nd, pb.charged)
    return InterfaceState(layout, nu, H, u_gamma, dtau_u, p_trace,
                          p_star, gamma_star, traction, w, eps_s)
