import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville import geometry as geo


def test_circle_curvature(disk):
    assert np.allclose(disk.curvature(np.linspace(0, 1, 7)), 1.0, atol=1e-10)
    assert np.allclose(geo.circle(radius=2.0).curvature(0.3), 0.5, atol=1e-10)


def test_ellipse_curvature_matches_tangent_angle(ellipse):
    assert ellipse.curvature(0.0) == pytest.approx(2.0, abs=1e-8)
    assert ellipse.curvature(0.25) == pytest.approx(0.25, abs=1e-8)
    # finite difference of the tangent angle against arc length
    s = np.linspace(0, 1, 200001)
    d1 = ellipse.curves[0].eval(s, der=1)
    ang = np.unwrap(np.arctan2(d1[:, 1], d1[:, 0]))
    arc = np.concatenate([[0], np.cumsum(np.hypot(*np.diff(ellipse.point(s), axis=0).T))])
    k_fd = np.gradient(ang, arc)
    assert k_fd[0] == pytest.approx(2.0, rel=1e-4)


def test_signed_distance_disk(disk):
    r = disk.project(np.array([[0.5, 0.0], [0.0, 0.0]]))
    assert r.d[0] == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(r.foot[0], [1.0, 0.0], atol=1e-12)
    assert r.d[1] == pytest.approx(1.0, abs=1e-12)
    assert bool(r.ambiguous[1])
    assert not bool(r.ambiguous[0])


def test_signed_distance_ellipse_brute_force(ellipse):
    p = np.array([[1.9, 0.0], [0.3, 0.5], [-1.2, -0.4]])
    s = np.arange(1_000_000) / 1_000_000
    b = ellipse.point(s)
    brute = [np.min(np.hypot(*(b - q).T)) for q in p]
    assert np.allclose(ellipse.project(p).d, brute, atol=1e-9)


def test_outside_points_have_negative_distance(disk):
    assert disk.project(np.array([[1.5, 0.0]])).d[0] == pytest.approx(-0.5, abs=1e-12)


@given(st.floats(0.0, 0.98), st.floats(0.0, 2 * np.pi))
def test_disk_distance_property(r, a):
    p = np.array([[r * np.cos(a), r * np.sin(a)]])
    res = geo.circle().project(p, check_ambiguity=False)
    assert res.d[0] == pytest.approx(1 - r, abs=1e-10)
    if r > 1e-3:
        assert np.allclose(res.normal[0], -p[0] / r, atol=1e-8)


def test_annulus_inner_circle_curvature_negative():
    ann = geo.annulus(r0=0.5)
    r = ann.project(np.array([[0.6, 0.0], [1.9, 0.0]]))
    assert r.d[0] == pytest.approx(0.1, abs=1e-10)
    assert r.kappa[0] == pytest.approx(-2.0, abs=1e-8)
    assert r.kappa[1] == pytest.approx(0.5, abs=1e-8)


def test_grid_mask_and_area(disk):
    g = geo.build_grid(disk, 0.5, 0.0)
    pts = g.points()
    inside = pts[g.interior]
    assert np.any(np.all(np.isclose(inside, [0.0, 0.0]), axis=1))
    assert not np.any(np.all(np.isclose(pts.reshape(-1, 2), [1.5, 0.0]), axis=1)
                      & g.interior.ravel())
    h = 1 / 64
    g = geo.build_grid(disk, h, 0.0)
    assert g.n_interior == pytest.approx(np.pi / h ** 2, rel=0.02)


def test_grid_trim_level(disk):
    h = 1 / 32
    g = geo.build_grid(disk, h, 0.1)
    p = g.points()[g.interior]
    assert np.all(p[:, 0] ** 2 + p[:, 1] ** 2 < 0.81 + 2 * h)


def test_grid_rejects_bad_spacing(disk):
    with pytest.raises(geo.GeometryError):
        geo.build_grid(disk, -1.0)


def test_chart_lap_d_on_circle(disk):
    ch = geo.collar_chart(disk, 0.0, 0.1, n_y=32)
    mid = ch.Y.size // 2
    assert np.allclose(ch.lap_d[:, mid], -1 / (1 - ch.T), rtol=1e-6)
    ch2 = geo.collar_chart(geo.circle(radius=2.0), 0.0, 0.1, n_y=32)
    assert ch2.lap_d[0, mid] == pytest.approx(-0.5, rel=1e-6)


def test_chart_round_trip(ellipse):
    ch = geo.collar_chart(ellipse, 0.0, 0.2, n_y=32)
    T, Y = ch.to_chart(ch.world[::20, ::4].reshape(-1, 2))
    TT, YY = np.meshgrid(ch.T[::20], ch.Y[::4], indexing="ij")
    assert np.allclose(T, TT.ravel(), atol=1e-10)
    assert np.allclose(Y, YY.ravel(), atol=1e-10)


def test_chart_rejects_odd_ny(disk):
    with pytest.raises(geo.GeometryError):
        geo.collar_chart(disk, 0.0, 0.1, n_y=31)


def test_halfplane_flat_chart():
    hp = geo.HalfPlane((0.0, 1.0, 0.0, 1.0))
    r = hp.project(np.array([[0.3, 0.7]]))
    assert r.d[0] == pytest.approx(0.3)
    assert r.kappa[0] == 0.0


def test_digest_stable():
    assert geo.ellipse().digest() == geo.ellipse().digest()
    assert geo.ellipse().digest() != geo.circle().digest()
