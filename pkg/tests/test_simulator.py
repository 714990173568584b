import json
import math
import warnings

import numpy as np
import pytest

from hypflow.conformal import conformal_curve, integrate_conformal
from hypflow.errors import ContractViolation, FlowTerminated
from hypflow.exact_flows import FlowKind, make_exact_flow
from hypflow.geometry import PolyCurve, circle_points
from hypflow.parabolic import integrate_orbit, soliton_curve
from hypflow.simulator import (
    FlowFrame,
    FlowTermination,
    StabilityWarning,
    _solve_cyclic,
    dump_frames,
    fitted_circle_radius,
    fitted_euclidean_radius,
    normal_deviation,
    orient_positive,
    radius_history,
    resample,
    simulate,
    stability_limit,
    step_icsf,
    verify_soliton_translation,
)

CIRCLE = make_exact_flow(FlowKind.HYPERBOLIC_CIRCLE, 1.0)


def test_cyclic_solver_matches_dense():
    rng = np.random.default_rng(3)
    n = 9
    sub, sup, rhs = rng.random(n), rng.random(n), rng.random(n)
    diag = 4.0 + rng.random(n)
    m = np.diag(diag)
    for i in range(n):
        m[i, (i - 1) % n] += sub[i]
        m[i, (i + 1) % n] += sup[i]
    assert np.allclose(_solve_cyclic(sub, diag, sup, rhs), np.linalg.solve(m, rhs))


def test_resample_closed_circle_keeps_shape():
    pts = circle_points((0.0, 3.0), 1.0, 50, phase=0.3)
    out = resample(pts, True, n=80)
    assert len(out) == 80
    assert np.allclose(np.hypot(out[:, 0], out[:, 1] - 3.0), 1.0, atol=1e-5)
    seg = np.hypot(*np.diff(np.vstack([out, out[:1]]), axis=0).T)
    assert seg.std() / seg.mean() < 1e-3


def test_resample_open_keeps_endpoints():
    x = np.linspace(0, 1, 30) ** 2
    pts = np.column_stack([x, 1 + x])
    out = resample(pts, False, spacing=0.01)
    assert np.array_equal(out[0], pts[0]) and np.array_equal(out[-1], pts[-1])
    assert len(out) == int(round(math.sqrt(2) / 0.01)) + 1


def test_orientation_is_made_positive():
    curve = PolyCurve(circle_points((0, 2), 1, 40), closed=True).reverse()
    frame = FlowFrame.from_curve(0.0, orient_positive(curve))
    assert np.all(frame.kappa_h > 0)
    assert len(frame.samples()) == 40


def test_circle_radius_grows_monotonically():
    run = simulate(CIRCLE.curve_at(0.0, 128), 0.2, 1e-3, record_every=20)
    hist = radius_history(run)
    assert [t for t, _ in hist] == pytest.approx([0.02 * i for i in range(11)])
    r = [v for _, v in hist]
    assert np.all(np.diff(r) > 0)
    assert r[-1] == pytest.approx(CIRCLE.radius(0.2), abs=2e-3)


def test_horocycle_radius():
    flow = make_exact_flow(FlowKind.HOROCYCLE, 1.0)
    run = simulate(flow.curve_at(0.0, 512), 1.0, 1e-4)
    assert run.termination is FlowTermination.REACHED_T
    assert abs(fitted_euclidean_radius(run.final.curve) - math.e) < 1e-3


def test_time_convergence_first_order():
    errs = []
    for dt in (2e-3, 1e-3):
        run = simulate(CIRCLE.curve_at(0.0, 128), 0.2, dt)
        errs.append(abs(fitted_circle_radius(run.final.curve) - CIRCLE.radius(0.2)))
    assert 1.7 < errs[0] / errs[1] < 2.3


def test_explicit_scheme_caps_step_and_warns():
    curve = CIRCLE.curve_at(0.0, 64)
    cap = stability_limit(curve.vertices, True)
    with pytest.warns(StabilityWarning):
        run = simulate(curve, 0.02, 10 * cap, scheme="explicit")
    assert run.cap_bound
    ref = simulate(curve, 0.02, cap / 2)
    assert fitted_circle_radius(run.final.curve) == pytest.approx(fitted_circle_radius(ref.final.curve), abs=1e-3)


def test_explicit_scheme_without_cap_binding():
    curve = CIRCLE.curve_at(0.0, 32)
    cap = stability_limit(curve.vertices, True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run = simulate(curve, 5 * cap * 0.5, cap * 0.5, scheme="explicit")
    assert not run.cap_bound


def test_curvature_floor_terminates():
    x = np.linspace(-1, 1, 41)
    wavy = PolyCurve(np.column_stack([x, 2 + 0.3 * np.sin(3 * x)]))
    run = simulate(wavy, 0.1, 1e-3, boundary=lambda p: np.zeros_like(p))
    assert run.termination is FlowTermination.CURVATURE_SIGN_CHANGE
    with pytest.raises(FlowTerminated) as info:
        step_icsf(run.final, 1e-3)
    assert info.value.cause is FlowTermination.CURVATURE_SIGN_CHANGE


def test_boundary_contact_terminates():
    run = simulate(PolyCurve(circle_points((0, 1.05), 1.0, 64), closed=True), 1.0, 1e-2, y_floor=0.04)
    assert run.termination is FlowTermination.BOUNDARY_CONTACT


def test_bad_arguments():
    with pytest.raises(ContractViolation):
        simulate(CIRCLE.curve_at(0, 32), 1.0, 0.0)
    with pytest.raises(ContractViolation):
        step_icsf(FlowFrame.from_curve(0.0, CIRCLE.curve_at(0, 32)), 1e-3, scheme="leapfrog")


def test_normal_deviation_of_concentric_circles():
    inner = circle_points((0.0, 3.0), 1.0, 200)
    outer = PolyCurve(circle_points((0.0, 3.0), 1.1, 2000), closed=True)
    normals = (np.array([0.0, 3.0]) - inner) / 1.0
    d = normal_deviation(inner, normals, outer)
    assert np.allclose(d, 0.1, atol=1e-5)


def test_normal_deviation_ignores_tangential_shift():
    x = np.linspace(0, 1, 101)
    line = PolyCurve(np.column_stack([x, np.full_like(x, 2.0)]))
    pts = np.column_stack([x[10:90] + 0.003, np.full(80, 2.0005)])
    normals = np.tile([0.0, 1.0], (80, 1))
    assert np.allclose(normal_deviation(pts, normals, line), 5e-4, atol=1e-12)


def test_parabolic_soliton_translates():
    curve = soliton_curve(integrate_orbit(1.5, 0.5 * math.pi), 1e-3).curve
    dev = [verify_soliton_translation(curve, "Parabolic", 0.05, dt, spacing=h).deviation
           for dt, h in ((1e-3, 0.02), (5e-4, 0.01))]
    assert dev[1] < dev[0] < 5e-4


def test_translation_invariance_of_the_check():
    curve = soliton_curve(integrate_orbit(1.5, 0.5 * math.pi), 1e-3).curve
    a = verify_soliton_translation(curve, "Parabolic", 0.05, 1e-3, spacing=0.02).deviation
    b = verify_soliton_translation(curve.translate(2.5, 0.0), "Parabolic", 0.05, 1e-3, spacing=0.02).deviation
    assert a == pytest.approx(b, rel=1e-6, abs=1e-12)


def test_conformal_soliton_drift_matches_prediction():
    # the vertical shift is not an exact ICSF solution; the normal-speed
    # mismatch t cos³θ / y² integrates to about t² cos³θ / (2 y) in position
    curve = conformal_curve(integrate_conformal(2.0, 0.0), 1e-3).curve
    dev = verify_soliton_translation(curve, "ConformalVertical", 0.1, 2e-4, spacing=0.01).deviation
    assert 0.5e-3 < dev < 2e-3


def test_circle_is_not_a_parabolic_soliton():
    dev = verify_soliton_translation(CIRCLE.curve_at(0.0, 128), "Parabolic", 0.05, 1e-3).deviation
    assert dev > 1e-2


def test_rejects_other_fields():
    with pytest.raises(ContractViolation):
        verify_soliton_translation(CIRCLE.curve_at(0.0, 32), "Rotation", 0.01)


def test_dump_frames(tmp_path):
    run = simulate(CIRCLE.curve_at(0.0, 32), 0.01, 5e-3, record_every=1)
    index = dump_frames(run, tmp_path)
    assert [e["t"] for e in index] == pytest.approx([0.0, 0.005, 0.01])
    first = (tmp_path / index[0]["file"]).read_text().splitlines()
    assert first[0] == "x,y,kappa_h" and len(first) == 33
    json.dumps(index)
