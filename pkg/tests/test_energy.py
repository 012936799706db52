import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from lpflow.convex_body import SupportField, support_of_ellipsoid
from lpflow.ellipsoid import Ellipsoid
from lpflow.energy import (
    AdmissibleParams,
    EnergyReport,
    compute_A0,
    default_params,
    dissipation,
    energy_report,
    functional_J,
    in_admissible_class,
    loglog_slope,
    property_P_scan,
    residual,
)
from lpflow.errors import ConvexityLost, InvalidArgument
from lpflow.sphere_grid import make_grid

ELLIPSE = Ellipsoid.from_angle((2.0, 1.0))


def ellipse_J_reference(a, b, p):
    # area pi a b and the closed-form support function integrated by adaptive quadrature
    integral, _ = quad(
        lambda t: (a * a * math.cos(t) ** 2 + b * b * math.sin(t) ** 2) ** (p / 2), 0, 2 * math.pi,
        epsabs=1e-13, epsrel=1e-13, limit=200,
    )
    return math.pi * a * b - integral / p


# -- J ----------------------------------------------------------------------------
def test_J_unit_disk():
    g = make_grid(1, 256)
    assert abs(functional_J(SupportField(g, np.ones(256)), 1.0, -3) - 5 * math.pi / 3) < 1e-4


def test_J_unit_ball_n2():
    g = make_grid(2, 64)
    J = functional_J(SupportField(g, np.ones(g.size)), 1.0, -4)
    assert J == pytest.approx(4 * math.pi / 3 + math.pi, abs=1e-3)


def test_J_ellipse_against_quadrature():
    g = make_grid(1, 256)
    J = functional_J(support_of_ellipsoid(ELLIPSE, g), 1.0, -3)
    assert abs(J - ellipse_J_reference(2.0, 1.0, -3)) < 1e-3


def test_J_p_zero_rejected():
    g = make_grid(1, 32)
    with pytest.raises(InvalidArgument):
        functional_J(SupportField(g, np.ones(32)), 1.0, 0.0)


def test_J_refinement_invariance():
    vals = [functional_J(support_of_ellipsoid(ELLIPSE, make_grid(1, m)), 1.0, -3) for m in (256, 512)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-3)


@given(st.floats(0.1, 5.0), st.floats(0.01, 2.0), st.floats(-6.0, -2.1))
def test_J_increases_with_f_for_negative_p(c, bump, p):
    # J = vol - (1/p) int f u^p and -1/p > 0, so a larger f gives a larger J
    g = make_grid(1, 64)
    u = support_of_ellipsoid(Ellipsoid.from_angle((1.3, 0.9), 0.2, (0.1, 0.0)), g)
    f = np.full(64, c)
    assert functional_J(u, f + bump, p) > functional_J(u, f, p)


def test_f_as_callable_and_array():
    g = make_grid(1, 64)
    u = support_of_ellipsoid(ELLIPSE, g)
    f_arr = 1.0 + 0.5 * g.nodes[:, 0] ** 2
    assert functional_J(u, f_arr, -3) == functional_J(u, lambda x: 1.0 + 0.5 * x[:, 0] ** 2, -3)
    with pytest.raises(InvalidArgument):
        functional_J(u, np.ones(10), -3)


# -- dissipation / residual -------------------------------------------------------------
def test_dissipation_stationary_is_zero():
    g = make_grid(1, 64)
    for p in (-3.0, -5.5, 2.0):
        assert dissipation(SupportField(g, np.ones(64)), 1.0, p) == 0.0


def test_dissipation_constant_R():
    R = 2.0
    g = make_grid(1, 64)
    # det = R, f u^{p-1} = R^{-4}: integrand (R - R^{-4})^2 R / R over a circle of length 2 pi
    expected = 2 * math.pi * (R - R**-4) ** 2
    assert dissipation(SupportField(g, np.full(64, R)), 1.0, -3) == pytest.approx(expected, rel=1e-12)


def test_dissipation_ellipse_positive():
    g = make_grid(1, 256)
    assert dissipation(support_of_ellipsoid(ELLIPSE, g), 1.0, -3) > 1e-2


def test_dissipation_nonconvex_raises():
    g = make_grid(1, 64)
    with pytest.raises(ConvexityLost):
        dissipation(SupportField(g, 1.0 + 0.2 * np.cos(5 * g.theta)), 1.0, -3)


def test_dissipation_zero_iff_residual_small():
    g = make_grid(1, 256)
    assert residual(SupportField(g, np.ones(256)), 1.0, -3) <= 1e-10
    for semi in ((1.1, 1.0), (2.0, 1.0), (1.0, 0.5)):
        u = support_of_ellipsoid(Ellipsoid.from_angle(semi), g)
        assert residual(u, 1.0, -3) > 1e-3
        assert dissipation(u, 1.0, -3) > 1e-10


# -- A0 ------------------------------------------------------------------------------------
def test_A0_closed_form():
    g = make_grid(1, 64)
    assert compute_A0(1.0, -3, g) == pytest.approx(280 * math.pi / 3, rel=1e-12)


def test_A0_p_range():
    g = make_grid(1, 64)
    compute_A0(1.0, -2.5, g)
    for p in (-2.0, -1.0, 1.0):
        with pytest.raises(InvalidArgument):
            compute_A0(1.0, p, g)
    with pytest.raises(InvalidArgument):
        compute_A0(1.0, -3.0, make_grid(2, 16))


def test_A0_linear_in_f():
    g = make_grid(1, 64)
    p = -3.0
    ball_term = 2 * 2**2 * math.pi
    first1 = compute_A0(1.0, p, g) - ball_term
    first2 = compute_A0(2.0, p, g) - ball_term
    assert first2 == pytest.approx(2 * first1, rel=1e-12)


# -- reports -------------------------------------------------------------------------------
def test_report_unit_ball():
    g = make_grid(1, 256)
    rep = energy_report(SupportField(g, np.ones(256)), 1.0, -3)
    assert rep.J == pytest.approx(5 * math.pi / 3, abs=1e-4)
    assert rep.dissipation == 0.0
    assert rep.vol == pytest.approx(math.pi, abs=1e-4)
    assert rep.ecc == pytest.approx(1.0, abs=1e-6)
    assert rep.origin_dist == 1.0
    assert rep.residual <= 1e-10


def test_report_ellipse_ecc():
    rep = energy_report(support_of_ellipsoid(ELLIPSE, make_grid(1, 256)), 1.0, -3)
    assert abs(rep.ecc - 2.0) < 1e-4


def test_report_origin_dist():
    c = np.array([0.9, 0.0])
    rep = energy_report(support_of_ellipsoid(Ellipsoid.ball(1.0, c), make_grid(1, 128)), 1.0, -3)
    assert rep.origin_dist == pytest.approx(0.1, abs=1e-12)


def test_report_csv_round_trip():
    rep = EnergyReport(J=1.0 / 3, dissipation=2e-17, vol=math.pi, ecc=1.25, origin_dist=0.1, residual=0.0, t=0.7)
    row = rep.csv_row()
    assert row.split(",")[0] == "0.69999999999999996"
    assert EnergyReport.from_csv_row(row) == rep


# -- admissible class ------------------------------------------------------------------------
def test_admissible_examples():
    params = AdmissibleParams(A0=100.0)
    assert in_admissible_class(Ellipsoid.ball(1.0, dim=2), params) == (True, "ok")
    tiny = Ellipsoid.ball(math.sqrt(params.bar_v / 2 / math.pi), dim=2)
    assert in_admissible_class(tiny, params) == (False, "volume floor")
    # eccentricity 2 * bar_e at volume pi
    long = Ellipsoid.from_angle((math.sqrt(2 * params.bar_e), 1.0 / math.sqrt(2 * params.bar_e)))
    assert in_admissible_class(long, params) == (False, "eccentricity cap")
    big = Ellipsoid.ball(math.sqrt(2 / params.bar_v / math.pi), dim=2)
    assert in_admissible_class(big, params) == (False, "volume cap")
    away = Ellipsoid.ball(1.0, [1.5, 0.0])
    assert in_admissible_class(away, params) == (False, "origin outside")
    # closed class: origin on the boundary is admitted
    assert in_admissible_class(Ellipsoid.ball(1.0, [1.0, 0.0]), params)[0]


@pytest.mark.parametrize(
    "kw", [dict(bar_e=1.0), dict(bar_v=0.0), dict(bar_v=1.0), dict(bar_d=0.0), dict(A0=0.0)]
)
def test_admissible_params_validation(kw):
    base = dict(A0=1.0)
    base.update(kw)
    with pytest.raises(InvalidArgument):
        AdmissibleParams(**base)


def test_default_params():
    g = make_grid(1, 64)
    params = default_params(1.0, -3, g)
    assert (params.bar_e, params.bar_v, params.bar_d) == (10.0, 0.05, 0.05)
    assert params.A0 == pytest.approx(280 * math.pi / 3)


# -- property P ------------------------------------------------------------------------------
def test_property_P_origin_approach():
    g = make_grid(1, 256)
    fam = [(d, support_of_ellipsoid(Ellipsoid.ball(1.0, [1 - d, 0.0]), g)) for d in (0.2, 0.1, 0.05, 0.025)]
    table = property_P_scan(fam, 1.0, -4)
    assert [d for d, _ in table] == [0.2, 0.1, 0.05, 0.025]
    assert loglog_slope(table) <= -0.5


def test_property_P_growing_balls():
    g = make_grid(1, 128)
    table = property_P_scan([(R, SupportField(g, np.full(128, R))) for R in (2, 4, 8)], 1.0, -3)
    Js = [J for _, J in table]
    assert Js[0] < Js[1] < Js[2]


def test_property_P_eccentricity_at_fixed_volume():
    g = make_grid(1, 512)
    fam = []
    for e in (2, 4, 8):
        a = math.sqrt(e)
        fam.append((e, support_of_ellipsoid(Ellipsoid.from_angle((a, 1 / a)), g)))
    Js = [J for _, J in property_P_scan(fam, 1.0, -3)]
    assert Js[0] < Js[1] < Js[2]
    # quadrature cross-check of the table
    for (e, _), J in zip(fam, Js):
        assert J == pytest.approx(ellipse_J_reference(math.sqrt(e), 1 / math.sqrt(e), -3), rel=1e-3)


def test_loglog_slope_exact_power():
    table = [(d, 3.0 * d**-1.5) for d in (0.5, 0.25, 0.125)]
    assert loglog_slope(table) == pytest.approx(-1.5)
