import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpflow.convex_body import (
    SupportField,
    boundary_points,
    curvature_data,
    hausdorff_distance,
    ma_det,
    p_area_density,
    radial_function,
    support_of_ellipsoid,
    volume,
)
from lpflow.ellipsoid import Ellipsoid
from lpflow.errors import ConvexityLost, InvalidArgument
from lpflow.sphere_grid import integrate, make_grid

ELLIPSE = Ellipsoid.from_angle((2.0, 1.0))


def ray_sphere(c, xi):
    # distance from the origin to the unit sphere about c along the unit ray xi
    cx = c @ xi
    return cx + math.sqrt(1.0 - c @ c + cx * cx)


def random_ellipsoid(r, dim):
    q, _ = np.linalg.qr(r.standard_normal((dim, dim)))
    return Ellipsoid(r.uniform(-0.2, 0.2, dim), q, r.uniform(0.6, 1.8, dim))


# -- support_of_ellipsoid ------------------------------------------------------
def test_support_unit_ball():
    for g in (make_grid(1, 64), make_grid(2, 16)):
        u = support_of_ellipsoid(Ellipsoid.ball(1.0, dim=g.dim + 1), g)
        assert np.allclose(u.values, 1.0, atol=1e-15)


def test_support_ellipse_axis():
    g = make_grid(1, 64)
    assert support_of_ellipsoid(ELLIPSE, g).values[0] == pytest.approx(2.0, abs=1e-15)


def test_support_translated_ball():
    g = make_grid(1, 64)
    c = np.array([0.5, 0.0])
    assert support_of_ellipsoid(Ellipsoid.ball(1.0, c), g).values[0] == pytest.approx(1.5)


def test_support_requires_interior_when_flagged():
    g = make_grid(1, 32)
    outside = Ellipsoid.ball(0.5, [2.0, 0.0])
    support_of_ellipsoid(outside, g)
    with pytest.raises(InvalidArgument):
        support_of_ellipsoid(outside, g, require_interior=True)


def test_support_field_json_round_trip():
    g = make_grid(2, 16)
    u = support_of_ellipsoid(Ellipsoid((0.1, 0, 0), np.eye(3), (1, 1.5, 2)), g)
    again = SupportField.from_json(u.to_json())
    assert np.array_equal(again.values, u.values)
    assert again.grid == g


# -- ma_det / p-area / curvature ---------------------------------------------------
def test_ma_det_constant_fields():
    g1, g2 = make_grid(1, 64), make_grid(2, 32)
    assert np.allclose(ma_det(SupportField(g1, np.ones(64))), 1.0)
    assert np.allclose(ma_det(SupportField(g2, np.full(g2.size, 3.0))), 9.0)


def test_ma_det_ellipse_minor_axis():
    g = make_grid(1, 512)
    det = ma_det(support_of_ellipsoid(ELLIPSE, g))
    assert abs(det[128] - 4.0) < 1e-3


def test_ma_det_reports_nonconvexity_as_data():
    g = make_grid(1, 64)
    u = SupportField(g, 1.0 + 0.2 * np.cos(5 * g.theta))
    assert np.min(ma_det(u)) < 0


def test_p_area_density_examples():
    g = make_grid(1, 64)
    assert np.allclose(p_area_density(SupportField(g, np.ones(64)), -7.0), 1.0)
    R = 1.7
    assert np.allclose(p_area_density(SupportField(g, np.full(64, R)), -3.0), R**5)
    dens = p_area_density(support_of_ellipsoid(ELLIPSE, make_grid(1, 512)), -3.0)
    assert abs(dens[0] - 8.0) < 1e-2


def test_perimeter_identity(rng):
    g = make_grid(1, 256)
    for _ in range(5):
        u = support_of_ellipsoid(random_ellipsoid(rng, 2), g)
        assert integrate(g, p_area_density(u, 1.0)) == pytest.approx(integrate(g, u.values), rel=1e-12)


def test_curvature_data_constant():
    g = make_grid(2, 32)
    for R in (1.0, 2.0):
        cd = curvature_data(SupportField(g, np.full(g.size, R)))
        assert np.allclose(cd.K, R**-2)
        assert np.allclose(cd.kappa, 1.0 / R)


def test_curvature_data_ellipse_and_consistency():
    g = make_grid(1, 512)
    cd = curvature_data(support_of_ellipsoid(ELLIPSE, g))
    assert abs(cd.kappa[0, 0] - 2.0) < 1e-2
    g2 = make_grid(2, 32)
    cd2 = curvature_data(support_of_ellipsoid(Ellipsoid((0, 0, 0.1), np.eye(3), (1, 1.3, 1.6)), g2))
    assert np.allclose(np.prod(cd2.kappa, axis=1), cd2.K, rtol=1e-8)
    assert np.allclose(cd2.K, 1.0 / np.linalg.det(cd2.b), rtol=1e-8)


def test_curvature_data_raises_with_node():
    g = make_grid(1, 64)
    u = SupportField(g, 1.0 + 0.2 * np.cos(5 * g.theta))
    with pytest.raises(ConvexityLost) as info:
        curvature_data(u)
    assert 0 <= info.value.node < 64
    assert info.value.min_eig <= 0


# -- radial function and volume ----------------------------------------------------
def test_radial_ball():
    g = make_grid(2, 16)
    assert np.allclose(radial_function(SupportField(g, np.full(g.size, 1.3))), 1.3, atol=1e-12)


def test_radial_translated_ball():
    g = make_grid(1, 256)
    c = np.array([0.5, 0.0])
    r = radial_function(support_of_ellipsoid(Ellipsoid.ball(1.0, c), g))
    assert abs(r[0] - ray_sphere(c, np.array([1.0, 0.0]))) < 1e-3
    # full ray-sphere oracle on every node
    oracle = np.array([ray_sphere(c, xi) for xi in g.nodes])
    assert np.max(np.abs(r - oracle)) < 1e-3


def test_radial_ellipse_axis():
    g = make_grid(1, 256)
    assert abs(radial_function(support_of_ellipsoid(ELLIPSE, g))[0] - 2.0) < 1e-3


@given(st.integers(0, 2**31))
def test_radial_support_duality(seed):
    r = np.random.default_rng(seed)
    g = make_grid(1, 256)
    E = random_ellipsoid(r, 2)
    err = np.max(np.abs(radial_function(support_of_ellipsoid(E, g)) - E.radial(g.nodes)))
    assert err < 5 * (2 * math.pi / 256) ** 2 * 2.0


def test_volume_examples():
    g = make_grid(1, 256)
    assert abs(volume(SupportField(g, np.ones(256))) - math.pi) < 1e-4
    assert abs(volume(support_of_ellipsoid(ELLIPSE, g)) - 2 * math.pi) < 1e-3
    g2 = make_grid(2, 64)
    assert abs(volume(SupportField(g2, np.ones(g2.size))) - 4 * math.pi / 3) < 1e-3


def test_volume_ellipsoid_relative(rng):
    g = make_grid(1, 256)
    for _ in range(5):
        E = random_ellipsoid(rng, 2)
        assert volume(support_of_ellipsoid(E, g)) == pytest.approx(E.volume, rel=1e-3)
    g2 = make_grid(2, 64)
    E = Ellipsoid((0.1, -0.05, 0.1), np.eye(3), (0.8, 1.0, 1.4))
    assert volume(support_of_ellipsoid(E, g2)) == pytest.approx(E.volume, rel=1e-3)


# -- boundary points ----------------------------------------------------------------
def test_boundary_points_unit_ball_are_nodes():
    g = make_grid(2, 16)
    assert np.allclose(boundary_points(SupportField(g, np.ones(g.size))), g.nodes, atol=1e-12)


def test_boundary_points_translated_ball():
    c = np.array([0.3, -0.2, 0.1])
    g = make_grid(2, 32)
    pts = boundary_points(support_of_ellipsoid(Ellipsoid.ball(1.0, c), g))
    assert np.max(np.abs(np.linalg.norm(pts - c, axis=1) - 1.0)) < 1e-6


def test_boundary_points_ellipse_axis():
    g = make_grid(1, 256)
    pts = boundary_points(support_of_ellipsoid(ELLIPSE, g))
    assert np.allclose(pts[0], [2.0, 0.0], atol=1e-6)


# -- Hausdorff distance -------------------------------------------------------------
def test_hausdorff_examples():
    g = make_grid(1, 64)
    b1 = SupportField(g, np.full(64, 1.0))
    b3 = SupportField(g, np.full(64, 3.0))
    assert hausdorff_distance(b1, b3) == pytest.approx(2.0)
    assert hausdorff_distance(b3, b3) == 0.0
    c = np.array([0.6, 0.8]) * 0.5
    shifted = support_of_ellipsoid(Ellipsoid.ball(1.0, c), make_grid(1, 400))
    assert hausdorff_distance(SupportField(shifted.grid, np.ones(400)), shifted) == pytest.approx(
        0.5, abs=1e-4
    )


def test_hausdorff_grid_mismatch():
    with pytest.raises(InvalidArgument):
        hausdorff_distance(SupportField(make_grid(1, 32), np.ones(32)), SupportField(make_grid(1, 64), np.ones(64)))


@given(st.integers(0, 2**31))
def test_hausdorff_is_a_metric(seed):
    r = np.random.default_rng(seed)
    g = make_grid(2, 16)
    a, b, c = (support_of_ellipsoid(random_ellipsoid(r, 3), g) for _ in range(3))
    assert hausdorff_distance(a, a) == 0.0
    assert hausdorff_distance(a, b) == hausdorff_distance(b, a)
    assert hausdorff_distance(a, c) <= hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-15


@pytest.mark.parametrize("seed", range(4))
def test_radial_band_search_matches_full_search(seed):
    from scipy.spatial.transform import Rotation

    from lpflow.convex_body import _radial_s2_rows

    r = np.random.default_rng(seed)
    g = make_grid(2, 24)
    # centres pushed towards a pole so the search caps wrap across it
    center = np.array([0.0, 0.0, 0.6 * (-1) ** seed]) + r.uniform(-0.1, 0.1, 3)
    E = Ellipsoid(center, Rotation.random(random_state=seed).as_matrix(), np.exp(r.uniform(-0.4, 0.4, 3)))
    u = support_of_ellipsoid(E, g)
    full = _radial_s2_rows(g, u.values, g.nodes, 0, g.size)
    assert np.array_equal(radial_function(u), full)
