import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steklov.mesh import (Mesh, MeshError, generate_annulus_mesh, generate_disk_mesh, generate_square_mesh,
                          read_mesh, split_upper_lower, validate_mesh, write_mesh)


def test_disk_coarse_boundary_on_circle():
    m = generate_disk_mesh(1.0, 0.5)
    assert m.n_vertices >= 9
    r = np.hypot(*m.vertices[m.boundary_vertices()].T)
    assert np.abs(r - 1.0).max() <= 1e-12


def test_disk_perimeter_inscribed_polygon():
    m = generate_disk_mesh(1.0, 0.05)
    n = len(m.boundary_edges)
    # inscribed regular n-gon
    assert m.boundary_length() == pytest.approx(2 * n * math.sin(math.pi / n), rel=1e-13)
    assert 2 * math.pi * (1 - 0.05**2) <= m.boundary_length() <= 2 * math.pi


@pytest.mark.parametrize("bad", [-1.0, 0.0, float("nan"), float("inf")])
def test_disk_rejects_bad_h(bad):
    with pytest.raises(MeshError):
        generate_disk_mesh(1.0, bad)


def test_disk_rejects_h_above_radius():
    with pytest.raises(MeshError):
        generate_disk_mesh(1.0, 2.0)


@pytest.mark.parametrize("h", [0.3, 0.1, 0.05])
def test_disk_max_edge(h):
    m = generate_disk_mesh(1.0, h)
    assert m.edge_lengths().max() <= 1.5 * h


def test_square_geometry():
    assert generate_square_mesh(1.0, 0.5).boundary_length() == 4.0
    assert generate_square_mesh(2.0, 0.25).area() == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(MeshError):
        generate_square_mesh(0.0, 0.1)


def test_disk_area_converges_quadratically():
    errs = [abs(generate_disk_mesh(1.0, h).area() - math.pi) for h in (0.2, 0.1, 0.05)]
    assert errs[0] > errs[1] > errs[2]
    for a, b in zip(errs, errs[1:]):
        assert 3.0 <= a / b <= 5.0


@pytest.mark.parametrize("make", [lambda: generate_disk_mesh(1.0, 0.1), lambda: generate_square_mesh(1.0, 0.1),
                                  lambda: generate_annulus_mesh(0.5, 1.0, 0.1),
                                  lambda: split_upper_lower(generate_disk_mesh(1.0, 0.1))])
def test_generated_meshes_valid(make):
    rep = validate_mesh(make())
    assert rep.ok, rep.failed()
    assert rep.min_angle_deg > 20
    assert rep.max_aspect_ratio < 3


def test_annulus_has_two_loops():
    m = generate_annulus_mesh(0.5, 1.0, 0.1)
    assert len(m.boundary_loops()) == 2
    assert m.boundary_length() == pytest.approx(3 * math.pi, rel=1e-2)


def test_flipped_triangle_reported():
    m = generate_square_mesh(1.0, 0.5)
    tri = m.triangles.copy()
    tri[3] = tri[3, [0, 2, 1]]
    rep = validate_mesh(Mesh(m.vertices, tri, m.boundary_edges, m.boundary_tags))
    assert not rep.checks["positive_area"].passed
    assert rep.checks["positive_area"].offenders == [3]


def test_dangling_edge_reported():
    m = generate_square_mesh(1.0, 0.5)
    rep = validate_mesh(Mesh(m.vertices, m.triangles, m.boundary_edges[1:], m.boundary_tags[1:]))
    assert not rep.checks["closed_loops"].passed


def test_region_map_must_cover_tags():
    m = generate_square_mesh(1.0, 0.5)
    with pytest.raises(MeshError):
        m.with_tags(np.full(len(m.boundary_edges), 7), {1: "boundary"})


def test_split_upper_lower_tags():
    m = split_upper_lower(generate_disk_mesh(1.0, 0.1))
    y = m.edge_midpoints()[:, 1]
    assert set(np.unique(m.boundary_tags)) == {1, 2}
    assert np.all((m.boundary_tags == 1) == (y > 0))
    assert m.regions == {1: "A", 2: "B"}


def test_roundtrip_bit_exact(tmp_path):
    m = split_upper_lower(generate_disk_mesh(1.0, 0.15))
    p = tmp_path / "disk.msh"
    write_mesh(m, p)
    m2 = read_mesh(p)
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.array_equal(m.boundary_edges, m2.boundary_edges)
    assert np.array_equal(m.boundary_tags, m2.boundary_tags)
    assert m2.regions == m.regions


def test_read_rejects_garbage(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text("$vertices\n0 0.0\n")
    with pytest.raises(MeshError):
        read_mesh(p)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.04, 0.3))
def test_disk_property(radius, frac):
    m = generate_disk_mesh(radius, frac * radius)
    assert validate_mesh(m).ok
    assert m.edge_lengths().max() <= 1.5 * frac * radius
    assert m.area() <= math.pi * radius**2
