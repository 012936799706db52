import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpflow.errors import InvalidArgument
from lpflow.sphere_grid import covariant_hessian_plus_uI, gradient, integrate, make_grid


def ellipse_support(theta, a=2.0, b=1.0):
    return np.sqrt(a**2 * np.cos(theta) ** 2 + b**2 * np.sin(theta) ** 2)


def ellipse_radius_of_curvature(theta, a=2.0, b=1.0):
    # rho = a^2 b^2 / u^3 for the ellipse with semi-axes a, b
    return a**2 * b**2 / ellipse_support(theta, a, b) ** 3


@pytest.mark.parametrize("dim,res", [(1, 16), (1, 256), (2, 16), (2, 64)])
def test_grid_invariants(dim, res):
    g = make_grid(dim, res)
    assert np.allclose(np.linalg.norm(g.nodes, axis=1), 1.0, atol=1e-12)
    area = 2 * math.pi if dim == 1 else 4 * math.pi
    assert abs(g.weights.sum() - area) < 1e-10
    for i in range(dim + 1):
        assert abs(integrate(g, g.nodes[:, i])) < 1e-10


def test_circle_grid_size_and_weights():
    g = make_grid(1, 256)
    assert g.size == 256
    assert g.weights.sum() == pytest.approx(2 * math.pi, abs=1e-12)


def test_sphere_grid_area():
    g = make_grid(2, 64)
    assert abs(g.weights.sum() - 4 * math.pi) < 1e-10


@pytest.mark.parametrize("dim,res", [(1, 4), (1, 15), (2, 8), (3, 64)])
def test_resolution_below_minimum(dim, res):
    with pytest.raises(InvalidArgument):
        make_grid(dim, res)


def test_grid_is_immutable():
    g = make_grid(1, 32)
    with pytest.raises(ValueError):
        g.nodes[0, 0] = 3.0


def test_integrate_constant_and_x3_squared():
    assert integrate(make_grid(1, 64), np.ones(64)) == pytest.approx(2 * math.pi, abs=1e-12)
    g = make_grid(2, 64)
    # |S^2| / 3 by symmetry of x1^2 + x2^2 + x3^2 = 1
    assert abs(integrate(g, g.nodes[:, 2] ** 2) - 4 * math.pi / 3) < 1e-6


def test_integrate_wrong_length():
    with pytest.raises(InvalidArgument):
        integrate(make_grid(1, 32), np.ones(31))


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10_000))
def test_integrate_linear_and_positive(a, b, seed):
    g = make_grid(2, 16)
    r = np.random.default_rng(seed)
    f1, f2 = r.random(g.size), r.random(g.size)
    lhs = integrate(g, a * f1 + b * f2)
    assert lhs == pytest.approx(a * integrate(g, f1) + b * integrate(g, f2), abs=1e-9)
    assert integrate(g, f1 + 1e-3) > 0


def test_hessian_constant_fields():
    g1 = make_grid(1, 64)
    assert np.allclose(covariant_hessian_plus_uI(g1, np.ones(64)), 1.0, atol=1e-14)
    g2 = make_grid(2, 32)
    b = covariant_hessian_plus_uI(g2, np.full(g2.size, 2.5))
    assert b.shape == (g2.size, 2, 2)
    assert np.allclose(b, 2.5 * np.eye(2), atol=1e-12)


def test_hessian_ellipse_at_axis():
    g = make_grid(1, 512)
    b = covariant_hessian_plus_uI(g, ellipse_support(g.theta))[:, 0, 0]
    assert abs(b[0] - 0.5) < 1e-4
    assert abs(b[128] - 4.0) < 1e-3


def test_hessian_second_order_convergence():
    errs = []
    for res in (64, 128, 256):
        g = make_grid(1, res)
        b = covariant_hessian_plus_uI(g, ellipse_support(g.theta))[:, 0, 0]
        errs.append(np.max(np.abs(b - ellipse_radius_of_curvature(g.theta))))
    assert errs[0] / errs[1] >= 3
    assert errs[1] / errs[2] >= 3


def test_hessian_sphere_linear_function_vanishes():
    # u(x) = <c, x> is the support function of a point: b = 0 exactly in the continuum
    g = make_grid(2, 64)
    c = np.array([0.3, -0.2, 0.5])
    b = covariant_hessian_plus_uI(g, g.nodes @ c)
    assert np.max(np.abs(b)) < 5e-4


def test_hessian_sphere_second_order_convergence():
    # support function of the ball B_1(c): b = I exactly
    c = np.array([0.2, 0.1, -0.3])
    errs = []
    for m in (16, 32, 64):
        g = make_grid(2, m)
        b = covariant_hessian_plus_uI(g, 1.0 + g.nodes @ c)
        errs.append(np.max(np.abs(b - np.eye(2))))
    assert errs[0] / errs[1] >= 3
    assert errs[1] / errs[2] >= 3


def test_gradient_of_linear_function_is_tangential_part():
    g = make_grid(2, 32)
    c = np.array([0.4, -0.1, 0.7])
    grad = gradient(g, g.nodes @ c)
    tangential = c - (g.nodes @ c)[:, None] * g.nodes
    assert np.max(np.abs(grad - tangential)) < 1e-4
