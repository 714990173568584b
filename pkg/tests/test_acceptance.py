"""End-to-end acceptance checks, one test per numbered criterion.

A summary line per criterion is printed at the end of the run by conftest.
"""

import math
import time

import numpy as np
import pytest

from hypflow.conformal import conformal_curve, conformal_residual, integrate_conformal, mirror_deviation
from hypflow.exact_flows import (
    FlowKind,
    flow_residual,
    geodesic_half_circle,
    hausdorff_distance,
    make_exact_flow,
)
from hypflow.geometry import PARABOLIC, CurveLabel, classify_constant_curvature, soliton_residual
from hypflow.ode import StepControl
from hypflow.parabolic import (
    OrbitType,
    classify,
    classify_grid,
    integrate_orbit,
    soliton_curve,
    threshold_search,
    x_second_derivative,
)
from hypflow.conformal import y_second_derivative
from hypflow.simulator import fitted_circle_radius, simulate, verify_soliton_translation

pytestmark = pytest.mark.acceptance

HALF_PI = 0.5 * math.pi
GRID = np.round(np.arange(1, 101) * 0.05, 10)


@pytest.fixture(scope="module")
def threshold():
    return threshold_search()


@pytest.fixture(scope="module")
def grid_traces():
    return [integrate_orbit(float(y0), HALF_PI) for y0 in GRID]


@pytest.mark.criterion(1, "exact hyperbolic-circle flow residual < 1e-4, second-order refinement")
def test_exact_flow_residual():
    flow = make_exact_flow(FlowKind.HYPERBOLIC_CIRCLE, 1.0)
    start = time.perf_counter()
    for t in (0.0, 0.5, 1.0):
        coarse = flow_residual(flow, t, 1024, 1e-4)
        assert coarse < 1e-4
        fine = flow_residual(flow, t, 2048, 5e-5)
        # "about 4x": observed order within half an order of 2
        assert 1.5 <= math.log2(coarse / fine) <= 2.5, (t, coarse, fine)
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(2, "front tracking matches asinh(sinh(1) e^0.5) to 1e-3, first order in dt")
def test_simulator_matches_closed_form():
    flow = make_exact_flow(FlowKind.HYPERBOLIC_CIRCLE, 1.0)
    exact = math.asinh(math.sinh(1.0) * math.exp(0.5))
    start = time.perf_counter()
    errors = []
    for dt in (1e-4, 5e-5):
        run = simulate(flow.curve_at(0.0, 512), 0.5, dt)
        errors.append(abs(fitted_circle_radius(run.final.curve) - exact))
    elapsed = time.perf_counter() - start
    assert errors[0] < 1e-3
    assert 1.6 < errors[0] / errors[1] < 2.4, errors
    assert elapsed < 30.0


@pytest.mark.criterion(3, "equidistant arc within 1e-3 Hausdorff of the geodesic at t_min + 1e-4")
def test_equidistant_backward_limit():
    flow = make_exact_flow(FlowKind.EQUIDISTANT, 1.0, 0.5)
    a = math.sqrt(3.0) / 2.0
    assert flow.t_min == pytest.approx(math.log(a))
    geodesic = geodesic_half_circle(a, 20000)
    dists = [hausdorff_distance(flow.curve_at(flow.t_min + d, 20000).vertices, geodesic) for d in (1e-2, 1e-3, 1e-4)]
    assert dists[0] > dists[1] > dists[2]
    assert dists[2] < 1e-3, f"Hausdorff distance {dists[2]:.4g} at t_min + 1e-4"


@pytest.mark.criterion(4, "Type I below / Type II above a single switch; H to 1e-8 with +-1e-3 check")
def test_parabolic_dichotomy(threshold):
    start = time.perf_counter()
    labels = classify_grid(GRID)
    kinds = [lab for lab in labels]
    assert set(kinds) <= {OrbitType.TYPE_I, OrbitType.TYPE_II}
    switches = sum(1 for a, b in zip(kinds, kinds[1:]) if a != b)
    assert switches == 1 and kinds[0] is OrbitType.TYPE_I and kinds[-1] is OrbitType.TYPE_II
    est = threshold
    assert est.width < 1e-8
    assert classify(est.H * (1 - 1e-3)) is OrbitType.TYPE_I
    assert classify(est.H * (1 + 1e-3)) is OrbitType.TYPE_II
    first_two = GRID[kinds.index(OrbitType.TYPE_II)]
    assert first_two - 0.05 < est.H < first_two
    assert time.perf_counter() - start < 60.0


@pytest.mark.criterion(5, "Type I backward limit (0, pi/2); forward theta -> pi with stable Y")
def test_parabolic_limits(grid_traces):
    fine = StepControl(rtol=1e-12, atol=1e-14, h_min=1e-12, s_max=500.0)
    for tr in grid_traces:
        fwd = tr.limits.forward
        assert abs(tr.theta[-1] - math.pi) < 1e-3
        assert math.isfinite(fwd.y)
        if tr.type_label is OrbitType.TYPE_I:
            bwd = tr.limits.backward
            assert bwd.boundary == "y_zero"
            assert abs(bwd.theta - HALF_PI) < 1e-3
            assert abs(tr.theta[0] - HALF_PI) < 1e-3
            assert bwd.y < 1e-6
    for y0 in GRID[::10]:
        coarse = integrate_orbit(float(y0), HALF_PI).limits.forward.y
        refined = integrate_orbit(float(y0), HALF_PI, fine).limits.forward.y
        assert abs(coarse - refined) < 1e-4


@pytest.mark.criterion(6, "Type II: x''(y) < 0 and |x'(y)| > 1e3 at both y-endpoints")
def test_type_two_geometry(grid_traces):
    type_two = [tr for tr in grid_traces if tr.type_label is OrbitType.TYPE_II]
    assert type_two
    for tr in type_two:
        assert np.all(x_second_derivative(tr.y[1:-1], tr.theta[1:-1]) < 0.0)
        desc = soliton_curve(tr).descriptors
        assert desc.concave
        assert desc.slope_low > 1e3  # y -> lower asymptote, x'(y) -> +inf
        assert desc.slope_high < -1e3  # y -> upper asymptote, x'(y) -> -inf


@pytest.mark.criterion(7, "conformal solitons: bounded concave graphs, vertical ends, mirror symmetric")
def test_conformal_geometry():
    for y0 in (0.5, 1.0, 2.0):
        tr = integrate_conformal(y0, 0.0)
        assert np.all(np.diff(tr.x) > 0.0)
        lo, hi = tr.x_span
        assert math.isfinite(lo) and math.isfinite(hi)
        assert np.all(y_second_derivative(tr.y, tr.theta) < 0.0)
        assert abs(math.tan(tr.theta[0])) > 1e3 and abs(math.tan(tr.theta[-1])) > 1e3
        left, right = tr.limits
        assert abs(left.y - right.y) < 1e-4
        pts = np.column_stack([tr.x, tr.y])
        mirrored = pts * [-1.0, 1.0]
        assert hausdorff_distance(pts, mirrored) < 1e-6
        assert mirror_deviation(tr) < 1e-6


@pytest.mark.criterion(8, "theta0 = pi/4 conformal trace equals the theta0 = 0 trace after reparametrisation")
def test_conformal_reparametrisation():
    rtol = 1e-10
    ctrl = StepControl(rtol=rtol, atol=1e-12, h_min=1e-12, s_max=500.0)
    tilted = integrate_conformal(1.0, math.pi / 4, ctrl)
    y_bar = float(tilted.at_tau(0.0)[0, 0])
    direct = integrate_conformal(y_bar, 0.0, ctrl)
    tau = np.concatenate([direct.backward.s, direct.forward.s])
    inside = (tau >= tilted.backward.final_s - tilted.tau_shift) & (tau <= tilted.forward.final_s - tilted.tau_shift)
    gap = np.abs(tilted.at_tau(tau[inside]) - direct.at_tau(tau[inside])).max()
    assert inside.sum() > 0.9 * len(tau)
    assert gap < 10 * rtol


@pytest.mark.criterion(9, "soliton equations hold to 1e-6 at mesh 1e-4 with second-order refinement")
def test_soliton_residuals():
    curves = []
    for y0 in (1.0, 2.0):
        tr = integrate_orbit(y0, HALF_PI)
        curves.append(lambda h, tr=tr: soliton_residual(soliton_curve(tr, h).curve, PARABOLIC))
    for y0 in (0.5, 1.0, 2.0):
        tr = integrate_conformal(y0, 0.0)
        curves.append(lambda h, tr=tr: conformal_residual(conformal_curve(tr, h)))
    for residual in curves:
        r2, r1 = residual(2e-4), residual(1e-4)
        assert r1 < 1e-6
        assert 1.6 < math.log2(r2 / r1) < 2.4


@pytest.mark.criterion(10, "flowing solitons reproduces the translate to 5e-3; circle control does not")
def test_soliton_translation():
    parabolic = soliton_curve(integrate_orbit(1.0, HALF_PI), 1e-3).curve
    conformal = conformal_curve(integrate_conformal(2.0, 0.0), 1e-3).curve
    circle = make_exact_flow(FlowKind.HYPERBOLIC_CIRCLE, 1.0)
    ladder = [(4e-4, 0.02), (2e-4, 0.01), (1e-4, 0.005)]
    for curve, kind in ((parabolic, "Parabolic"), (conformal, "ConformalVertical")):
        devs = [verify_soliton_translation(curve, kind, 0.1, dt, spacing=h).deviation for dt, h in ladder]
        assert devs[-1] < 5e-3, (kind, devs)
        assert devs[0] > devs[1] > devs[2], (kind, devs)
    control = [verify_soliton_translation(circle.curve_at(0.0, n), "Parabolic", 0.1, dt).deviation
               for (dt, _), n in zip(ladder, (128, 256, 512))]
    assert min(control) > 1e-2


@pytest.mark.criterion(11, "no integrated soliton curve has constant curvature")
def test_no_constant_curvature_solitons():
    curves = [soliton_curve(integrate_orbit(y0, HALF_PI), 1e-3).curve for y0 in (0.2, 1.0, 2.0, 4.0)]
    curves += [soliton_curve(integrate_orbit(y0, HALF_PI)).curve for y0 in (0.5, 3.0)]
    curves += [conformal_curve(integrate_conformal(y0, 0.0), 1e-3).curve for y0 in (0.5, 1.0, 2.0)]
    curves += [conformal_curve(integrate_conformal(1.0, 0.3)).curve]
    for c in curves:
        assert classify_constant_curvature(c, 1e-3).label is CurveLabel.NON_CONSTANT
