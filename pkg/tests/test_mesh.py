import math

import numpy as np
import pytest

from poreshape import BoundaryTag, FLUID, SOLID, build_reference_domain, triangulate
from poreshape.geometry import GeometryError, polygon_area
from poreshape.mesh import (FieldTransfer, MeshParams, deform, disk_mesh,
                            extract_region_boundary, mesh_quality, remesh,
                            structured_rect_mesh)


def test_reference_domain_step_walls(ref_geom):
    up = ref_geom.polylines["gamma_upper"].points
    lo = ref_geom.polylines["gamma_lower"].points
    # z-shaped steps at x = l with height s = 0.5
    assert {tuple(p) for p in up} == {(20.0, 1.5), (10.0, 1.5), (10.0, 1.0), (0.0, 1.0)}
    assert {tuple(p) for p in lo} == {(0.0, -1.0), (10.0, -1.0), (10.0, -0.5), (20.0, -0.5)}


def test_zero_offset_straight_walls():
    geom = build_reference_domain(d=2.0, l=10.0, s=0.0)
    assert len(geom.polylines["gamma_upper"].points) == 2
    assert len(geom.polylines["gamma_lower"].points) == 2


def test_disconnected_channels_rejected():
    with pytest.raises(GeometryError, match="disconnected"):
        build_reference_domain(d=2.0, l=10.0, s=2.5)


def test_fillet_replaces_corners():
    geom = build_reference_domain(d=2.0, l=5.0, s=0.5, fillet=0.2)
    up = geom.polylines["gamma_upper"].points
    assert len(up) > 4            # corner points replaced by arc samples
    # fillet too large for the 0.5-high step
    with pytest.raises(GeometryError, match="fillet"):
        build_reference_domain(d=2.0, l=5.0, s=0.5, fillet=0.3)


def test_triangulation_positive_areas_and_tags(coarse_mesh):
    m = coarse_mesh
    assert np.all(m.signed_areas() > 0)
    q = m.quality()
    assert q.inverted_count == 0
    tags = {BoundaryTag(int(t)) for t in m.boundary_tags}
    assert tags == {BoundaryTag.I0, BoundaryTag.O0, BoundaryTag.Z0,
                    BoundaryTag.SIGMA, BoundaryTag.PI, BoundaryTag.GAMMA}


def test_area_partition(coarse_mesh):
    total = float(np.sum(coarse_mesh.signed_areas()))
    box = 20.0 * (2.0 + 0.5 + 2 * 6.0)     # d + s + 2 * thickness
    assert total == pytest.approx(box, rel=1e-10)
    assert coarse_mesh.fluid_area() == pytest.approx(40.0, rel=1e-10)


def test_interface_refinement_contract(ref_geom):
    m = triangulate(ref_geom, MeshParams(h=0.25, refine_interface=4.0, seed=0))
    edges = m.edges_of_tag(BoundaryTag.GAMMA)
    L = np.hypot(*(m.nodes[edges[:, 1]] - m.nodes[edges[:, 0]]).T)
    assert L.max() <= 0.0625 * (1 + 1e-9)


def test_region_boundary_consistency(coarse_mesh):
    fluid_edges = extract_region_boundary(coarse_mesh, FLUID)
    tagged = set()
    for (i, j), t in zip(coarse_mesh.boundary_edges, coarse_mesh.boundary_tags):
        if BoundaryTag(int(t)) in (BoundaryTag.GAMMA, BoundaryTag.I0, BoundaryTag.O0):
            tagged.add(tuple(sorted((int(i), int(j)))))
    assert fluid_edges == tagged


def test_gamma_orientation_fluid_left(coarse_mesh):
    # outward normal from edge orientation points from fluid into solid:
    # on the upper wall that is +y
    m = coarse_mesh
    up = m.chains["gamma_upper"]
    p = m.nodes[up]
    t = np.diff(p, axis=0)
    nu = np.stack([t[:, 1], -t[:, 0]], axis=1)
    horizontal = np.abs(t[:, 1]) < 1e-12
    assert np.all(nu[horizontal][:, 1] > 0)


def test_deform_identity_and_tags(coarse_mesh):
    zero = np.zeros_like(coarse_mesh.nodes)
    m2 = deform(coarse_mesh, zero)
    assert np.array_equal(m2.nodes, coarse_mesh.nodes)
    assert np.array_equal(m2.boundary_tags, coarse_mesh.boundary_tags)


def test_deform_interior_translation_keeps_outer_box(coarse_mesh):
    m = coarse_mesh
    disp = np.zeros_like(m.nodes)
    outer = np.unique(np.concatenate([m.edges_of_tag(t).ravel() for t in
                                      (BoundaryTag.I0, BoundaryTag.O0, BoundaryTag.Z0,
                                       BoundaryTag.SIGMA, BoundaryTag.PI)]))
    interior = np.setdiff1d(m.region_nodes(SOLID), np.unique(m.boundary_edges))
    disp[interior] = (0.01, 0.0)
    m2 = deform(m, disp)
    assert np.array_equal(m2.nodes[outer], m.nodes[outer])


def test_deform_reports_inversion(coarse_mesh):
    m = coarse_mesh
    disp = np.zeros_like(m.nodes)
    interior = np.setdiff1d(np.arange(m.n_nodes), np.unique(m.boundary_edges))
    disp[interior[0]] = (5.0, 5.0)     # collapse triangles around one node
    m2 = deform(m, disp)
    assert m2.quality().inverted_count > 0


def test_remesh_transfer_linear_exact(coarse_mesh):
    linear = 2.0 * coarse_mesh.nodes[:, 0] - 0.7 * coarse_mesh.nodes[:, 1] + 0.3
    new, transfer, _ = remesh(coarse_mesh)
    moved = transfer(linear, FLUID)
    fluid_nodes = new.region_nodes(FLUID)
    exact = 2.0 * new.nodes[:, 0] - 0.7 * new.nodes[:, 1] + 0.3
    assert np.abs(moved[fluid_nodes] - exact[fluid_nodes]).max() < 1e-10


def test_remesh_quality_floor(coarse_mesh):
    # deform moderately, then remesh and check the advertised角 floor
    disp = np.zeros_like(coarse_mesh.nodes)
    y = coarse_mesh.nodes[:, 1]
    x = coarse_mesh.nodes[:, 0]
    bump = 0.15 * np.exp(-((x - 10) ** 2) / 8.0)
    outer = np.unique(np.concatenate([coarse_mesh.edges_of_tag(t).ravel() for t in
                                      (BoundaryTag.I0, BoundaryTag.O0, BoundaryTag.Z0,
                                       BoundaryTag.SIGMA, BoundaryTag.PI)]))
    disp[:, 1] = np.where(y > 0, bump, -bump)
    disp[outer] = 0.0
    m2 = deform(coarse_mesh, disp)
    new, _, _ = remesh(m2)
    q = new.quality()
    assert q.inverted_count == 0
    assert math.degrees(q.min_angle) >= 20.0


def test_remesh_detects_interface_collapse(coarse_mesh):
    from poreshape import InterfaceCollapseError
    disp = np.zeros_like(coarse_mesh.nodes)
    up = coarse_mesh.chains["gamma_upper"]
    lo = coarse_mesh.chains["gamma_lower"]
    disp[up] = (0.0, -1.8)     # push the walls through each other
    disp[lo] = (0.0, +1.8)
    m2 = deform(coarse_mesh, disp)
    with pytest.raises(InterfaceCollapseError, match="interface collapse"):
        remesh(m2)


def test_tag_multiset_preserved_by_remesh(coarse_mesh):
    new, _, _ = remesh(coarse_mesh)
    old_tags = sorted(BoundaryTag(int(t)).name for t in np.unique(coarse_mesh.boundary_tags))
    new_tags = sorted(BoundaryTag(int(t)).name for t in np.unique(new.boundary_tags))
    assert old_tags == new_tags


def test_disk_mesh_quality():
    m = disk_mesh(1.0, 0.15)
    assert m.fluid_area() == pytest.approx(math.pi, rel=2e-2)
    assert m.quality().inverted_count == 0


def test_structured_mesh_counts():
    m = structured_rect_mesh(4, 3)
    assert m.n_nodes == 5 * 4
    assert m.n_triangles == 2 * 4 * 3
    assert mesh_quality(m).inverted_count == 0
