import json
import math

import numpy as np
import pytest

from hypflow.conformal import (
    ConformalPhaseState,
    conf_rhs,
    conformal_curve,
    conformal_residual,
    integrate_conformal,
    mirror_deviation,
    y_second_derivative,
)
from hypflow.errors import DomainError
from hypflow.geometry import PolyCurve
from hypflow.ode import StepControl


def test_rhs_examples():
    assert conf_rhs((1.0, 0.0)) == pytest.approx((0.0, -2.0))
    assert conf_rhs(ConformalPhaseState(2.0, 0.0)) == pytest.approx((0.0, -1.5))
    dy, dth = conf_rhs((1.0, math.pi / 4))
    assert dy == pytest.approx(math.sqrt(0.5))
    assert dth == pytest.approx(-1.5 * math.sqrt(2), rel=1e-14)


@pytest.mark.parametrize("state", [(1.0, math.pi / 2), (1.0, -2.0), (0.0, 0.1), (-1.0, 0.0)])
def test_rhs_domain(state):
    with pytest.raises(DomainError):
        conf_rhs(state)


def first_integral(y, theta):
    return 1.0 / y + np.cos(theta) ** 2 / (2.0 * y * y)


@pytest.mark.parametrize("y0", [0.3, 1.0, 2.0, 5.0])
def test_endpoint_height_matches_first_integral(y0):
    # 1/y + cos²θ/(2y²) is constant along orbits, which pins y* = 2y0²/(2y0 + 1)
    tr = integrate_conformal(y0, 0.0)
    assert np.allclose(first_integral(tr.y, tr.theta), first_integral(y0, 0.0), rtol=1e-9)
    assert tr.y_star == pytest.approx(2 * y0 * y0 / (2 * y0 + 1), rel=1e-9)


def test_limits_are_plus_minus_half_pi():
    tr = integrate_conformal(1.0, 0.0)
    left, right = tr.limits
    assert left.theta == pytest.approx(math.pi / 2) and right.theta == pytest.approx(-math.pi / 2)
    assert abs(tr.theta[0] - math.pi / 2) < 1e-5 and abs(tr.theta[-1] + math.pi / 2) < 1e-5
    assert left.y == pytest.approx(right.y, abs=1e-10)


@pytest.mark.parametrize("theta0", [0.0, 0.6, -0.6, 1.4])
def test_theta_decreasing_and_y_follows_sign(theta0):
    tr = integrate_conformal(1.3, theta0)
    assert np.all(np.diff(tr.theta) < 0)
    dy = np.diff(tr.y)
    mid = 0.5 * (tr.theta[1:] + tr.theta[:-1])
    assert np.all(dy[mid > 1e-3] > 0) and np.all(dy[mid < -1e-3] < 0)


def test_canonical_point():
    tr = integrate_conformal(1.0, 0.5)
    state = tr.at_tau(0.0)[0]
    assert state[1] == pytest.approx(0.0, abs=1e-12)
    assert state[2] == pytest.approx(0.0, abs=1e-12) and state[3] == pytest.approx(0.0, abs=1e-12)
    assert tr.s_shift > 0


def test_negative_start_is_the_mirror_image():
    pos = integrate_conformal(0.8, 0.7)
    neg = integrate_conformal(0.8, -0.7)
    assert np.allclose(neg.x, -pos.x[::-1], atol=1e-15)
    assert np.allclose(neg.y, pos.y[::-1], atol=1e-15)
    assert np.allclose(neg.theta, -pos.theta[::-1], atol=1e-15)
    tau = np.linspace(-0.3, 0.3, 7)
    a, b = pos.at_tau(tau), neg.at_tau(-tau)
    assert np.allclose(a[:, 0], b[:, 0]) and np.allclose(a[:, 2], -b[:, 2])
    assert mirror_deviation(neg) < 1e-9


def test_full_symmetry_solves_the_system():
    tr = integrate_conformal(1.1, 0.0)
    tau = np.linspace(-0.5, 0.5, 11)
    a, b = tr.at_tau(tau), tr.at_tau(-tau)
    # (2x0 - x(-s), y(-s), -θ(-s)) with x0 = 0
    assert np.allclose(a[:, 2], -b[:, 2], atol=1e-12)
    assert np.allclose(a[:, 0], b[:, 0], atol=1e-12)
    assert np.allclose(a[:, 1], -b[:, 1], atol=1e-12)
    assert np.allclose(a[:, 3], -b[:, 3], atol=1e-12)


def test_curve_descriptors():
    c = conformal_curve(integrate_conformal(1.5, 0.2))
    d = c.descriptors
    assert d.concave and d.vertical_endpoints
    assert d.x_m < 0 < d.x_M
    assert d.slope_left > 1e3 and d.slope_right < -1e3
    v = c.curve.vertices
    assert c.as_graph_on_x(v[7, 0]) == pytest.approx(v[7, 1])


def test_y_second_derivative_negative():
    th = np.linspace(-1.5, 1.5, 31)
    assert np.all(y_second_derivative(np.full_like(th, 0.7), th) < 0)


def test_residual_second_order():
    tr = integrate_conformal(1.0, 0.0)
    r = [conformal_residual(conformal_curve(tr, h)) for h in (8e-4, 4e-4, 2e-4)]
    assert 3.2 < r[0] / r[1] < 4.8 and 3.2 < r[1] / r[2] < 4.8


def test_horocycle_is_not_conformal_soliton():
    line = PolyCurve(np.column_stack([np.linspace(0, 1, 11), np.full(11, 3.0)]))
    assert conformal_residual(line) == pytest.approx(1 + 1 / 3)


def test_tolerance_refinement_agrees():
    a = integrate_conformal(0.7, 0.0)
    b = integrate_conformal(0.7, 0.0, StepControl(rtol=1e-12, atol=1e-14, s_max=500.0))
    assert a.y_star == pytest.approx(b.y_star, abs=1e-9)
    assert a.x_span[1] == pytest.approx(b.x_span[1], abs=1e-8)


def test_undetermined_trace():
    tr = integrate_conformal(1.0, 0.0, StepControl(s_max=0.01))
    assert not tr.determined and tr.y_star is None
    assert "ReachedBound" in tr.diagnostics
    with pytest.raises(DomainError):
        conformal_curve(tr)


def test_exports():
    tr = integrate_conformal(1.0, 0.0)
    assert tr.to_csv().splitlines()[0] == "s,x,y,theta,kappa_h"
    assert np.all(tr.kappa_h < 0)
    rec = json.loads(json.dumps(tr.record()))
    assert set(rec) == {"y0", "theta0", "y_star", "x_m", "x_M", "concave"}
    assert rec["concave"] is True
