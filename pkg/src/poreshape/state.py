"""Coupled state evaluation: solid + potential + interface at a given
interface displacement.

The solid problem always lives on the fixed reference mesh with the
displacement unknown on the reference interface nodes. The fluid problem
lives on a current mesh obtained by harmonically extending the interface
displacement from a base mesh (the reference mesh, or the last remeshed
configuration). Remeshing may re-discretize the interface; an arc-length
correspondence then transports fields and functionals between the
reference interface nodes and the current vertices, so the cumulative
displacement bookkeeping stays on the original reference discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elasticity import DisplacementSolution, SolidModel
from .geometry import BoundaryTag, arc_lengths, polylines_intersect
from .interface import (GammaLayout, GammaMap, InterfaceState,
                        build_interface_state, extend_displacement,
                        gamma_layout, identity_gamma_map)
from .mesh import FLUID, FieldTransfer, Mesh, deform, remesh
from .params import DimensionlessGroups, RunConfig, Scales
from .poisson_boltzmann import PotentialSolution, solve_potential, uncharged_solution
from . import fem


@dataclass(frozen=True)
class SystemState:
    """All solver outputs at one interface displacement (dimensionless)."""

    lam: np.ndarray               # (m_ref, 2) displacement on reference nodes
    ref_mesh: Mesh
    cur_mesh: Mesh
    disp: DisplacementSolution    # on the reference mesh
    pb: PotentialSolution         # on the current mesh
    iface: InterfaceState         # on the current mesh
    gmap: GammaMap                # reference <-> current interface transport

    @property
    def sup_lam(self) -> float:
        """Largest nodal displacement magnitude on the interface."""
        if len(self.lam) == 0:
            return 0.0
        return float(np.max(np.hypot(self.lam[:, 0], self.lam[:, 1])))

    def fluid_area(self) -> float:
        return self.cur_mesh.fluid_area()

    def reactions_gamma(self) -> np.ndarray:
        """(m_ref, 2) interface reaction forces of the solid solve."""
        return self.disp.reactions[self.disp.gamma_nodes]


class StateContext:
    """Evaluation pipeline bound to one reference mesh and parameter set."""

    def __init__(self, ref_mesh: Mesh, nd: DimensionlessGroups, scales: Scales,
                 config: RunConfig):
        self.ref_mesh = ref_mesh
        self.nd = nd
        self.scales = scales
        self.config = config
        self.layout_ref = gamma_layout(ref_mesh)
        self.solid = SolidModel(ref_mesh, nd, gamma_nodes=self.layout_ref.nodes,
                                convention=config.elastic_form)
        self.w_ref = fem.lumped_boundary_weights(
            ref_mesh, ref_mesh.edges_of_tag(BoundaryTag.GAMMA))[self.layout_ref.nodes]
        self.ref_s = {a.name: _arc_s(ref_mesh, a) for a in self.layout_ref.arcs}
        self.base_mesh = ref_mesh
        self.base_lam = np.zeros((self.layout_ref.size, 2))
        self.layout_base = self.layout_ref
        self.base_s = dict(self.ref_s)      # reference-s of base interface vertices
        self.warm_u: np.ndarray | None = None
        self.eps_s_hat = (None if config.eps_s is None
                          else config.eps_s / scales.L_star**2)
        self.newton_tol = config.newton_tol
        self.newton_max = config.newton_max_iter

    def base_map(self) -> GammaMap:
        return GammaMap(self.layout_ref, self.layout_base, self.ref_s, self.base_s)

    # -- rebasing ------------------------------------------------------------

    def _quality_trigger(self, cur: Mesh, lam: np.ndarray) -> bool:
        q = cur.quality()
        if q.inverted_count > 0 or q.min_angle < math.radians(10.0):
            return True
        drift = np.max(np.abs(lam - self.base_lam)) if len(lam) else 0.0
        return drift > 0.5 * self.ref_mesh.params.h

    def maybe_rebase(self, lam: np.ndarray) -> bool:
        """Remesh the current configuration if quality demands it.

        Raises :class:`InterfaceCollapseError` when the displaced interface
        self-intersects. Returns True when a remesh happened.
        """
        self._check_interface_open(lam)
        cur = self._deform_base(lam)
        if not self._quality_trigger(cur, lam):
            return False
        new_base, transfer, resample_u = remesh(cur)
        if self.warm_u is not None:
            self.warm_u = transfer(self.warm_u, FLUID)
        # reference-s of the resampled vertices, via the old chains
        new_s = {}
        for arc in self.layout_base.arcs:
            name = arc.name
            if name in resample_u:
                old_pts = cur.nodes[cur.chains[name]]
                s_cur_old = arc_lengths(old_pts)
                new_s[name] = np.interp(resample_u[name], s_cur_old, self.base_s[name])
            else:
                new_s[name] = self.base_s[name]
        self.base_mesh = new_base
        self.base_lam = lam.copy()
        self.layout_base = gamma_layout(new_base)
        self.base_s = new_s
        return True

    def _check_interface_open(self, lam: np.ndarray):
        chains = []
        for arc in self.layout_ref.arcs:
            sl = self.layout_ref.slices[arc.name]
            pts = self.ref_mesh.nodes[arc.nodes] + lam[sl]
            chains.append(pts)
        if polylines_intersect(chains):
            from .geometry import InterfaceCollapseError
            raise InterfaceCollapseError("interface collapse")

    def _deform_base(self, lam: np.ndarray) -> Mesh:
        delta_ref = lam - self.base_lam
        delta_base = self.base_map().ref_to_cur(delta_ref)
        ext = extend_displacement(self.base_mesh, self.layout_base, delta_base)
        return deform(self.base_mesh, ext)

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, lam: np.ndarray, remember: bool = False) -> SystemState:
        """Coupled solve at the given interface displacement.

        With ``remember`` the converged potential becomes the warm start
        of later evaluations (the drivers' accepted iterates); plain
        evaluations are side-effect free.
        """
        lam = np.asarray(lam, dtype=float)
        disp = self.solid.solve_displacement(lam)
        cur = self._deform_base(lam)
        q = cur.quality()
        if q.inverted_count:
            raise RuntimeError(
                f"{q.inverted_count} inverted elements at the requested displacement")
        if self.config.sigma_skip:
            pb = uncharged_solution(cur)
        else:
            guess = self.warm_u
            pb = solve_potential(cur, self.nd, initial_guess=guess,
                                 tol=self.newton_tol, max_iter=self.newton_max)
            if remember:
                self.warm_u = pb.u.copy()
        gmap = self.base_map()
        R = disp.reactions[self.layout_ref.nodes]
        traction_ref = -R / self.w_ref[:, None]          # reference-measure stress
        traction_cur = gmap.ref_to_cur(traction_ref) / gmap.stretch(cur)[:, None]
        iface = build_interface_state(cur, self.nd, pb, traction_cur,
                                      eps_s=self.eps_s_hat)
        return SystemState(lam=lam, ref_mesh=self.ref_mesh, cur_mesh=cur,
                           disp=disp, pb=pb, iface=iface, gmap=gmap)

    def commit(self, state: SystemState):
        """Adopt a state's potential as the warm start for later solves."""
        if state.pb.charged:
            self.warm_u = state.pb.u.copy()


def _arc_s(mesh: Mesh, arc) -> np.ndarray:
    pts = mesh.nodes[arc.nodes]
    if arc.closed:
        pts = np.vstack([pts, pts[:1]])
    return arc_lengths(pts)[: len(arc.nodes)]
