"""Parabolic solitons: curves translated horizontally by the ICSF.

With Euclidean arc length ``s`` and tangent angle ``θ`` the soliton equation
for the field ∂_x reads

    x' = cos θ,   y' = sin θ,   θ' = 1/sin θ - cos θ / y.

The right-hand side is singular where the orbit leaves the phase region
{y > 0, 0 < θ < π}.  Orbits are therefore integrated in the rescaled
parameter dτ = ds / (y sin θ), which turns the system into

    y_τ = y sin²θ,   θ_τ = y - sin θ cos θ,   x_τ = y sin θ cos θ,   s_τ = y sin θ,

smooth up to and across every boundary.  Arc length is carried along as the
fourth state component, so all reported quantities are functions of ``s``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._orbit import (
    DEFAULT_ORBIT_CTRL,
    EPS_BOUNDARY,
    S,
    THETA,
    X,
    Y,
    BoundaryLimit,
    boundary_limit,
    merge_branches,
    run_branch,
    stopped_by,
    trace_csv,
)
from .errors import DomainError, ThresholdSearchError
from .geometry import PolyCurve
from .ode import Crossing, Direction, EventSpec, StepControl, Trajectory, fixed_step_rk4

HALF_PI = 0.5 * math.pi


class OrbitType(str, enum.Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    ORTHOGONAL = "OrthogonalToXAxis"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class PhaseState:
    y: float
    theta: float

    def __post_init__(self):
        if not (self.y > 0 and 0 < self.theta < math.pi):
            raise DomainError(f"({self.y}, {self.theta}) is outside the parabolic phase region")


def para_rhs(state: PhaseState | tuple[float, float]) -> tuple[float, float]:
    y, theta = (state.y, state.theta) if isinstance(state, PhaseState) else state
    PhaseState(y, theta)
    return math.sin(theta), 1.0 / math.sin(theta) - math.cos(theta) / y


def para_rhs_unchecked(y, theta):
    """Arc-length right-hand side without the domain check (works on arrays)."""
    return np.sin(theta), 1.0 / np.sin(theta) - np.cos(theta) / y


def gamma_curve(theta):
    """Height of the zero-curvature locus Γ: y = ½ sin 2θ."""
    return 0.5 * np.sin(2.0 * np.asarray(theta, float)) if np.ndim(theta) else 0.5 * math.sin(2.0 * theta)


def _rescaled(_tau: float, u: np.ndarray) -> np.ndarray:
    y, th = u[0], u[1]
    sn, cs = math.sin(th), math.cos(th)
    return np.array([y * sn * sn, y - sn * cs, y * sn * cs, y * sn])


def _arc_rhs(_s: float, u: np.ndarray) -> np.ndarray:
    """(x, y, θ) system in arc length, used for uniform resampling."""
    x, y, th = u
    sn = math.sin(th)
    return np.array([math.cos(th), sn, 1.0 / sn - math.cos(th) / y])


def _gamma_guard(_t, u):
    return u[0] - math.sin(u[1]) * math.cos(u[1])


def _events(eps: float) -> list[EventSpec]:
    return [
        EventSpec(_gamma_guard, Crossing.ANY, False, "gamma"),
        EventSpec(lambda _t, u: u[1] - (math.pi - eps), Crossing.RISING, True, "theta_pi"),
        EventSpec(lambda _t, u: u[0] - eps, Crossing.FALLING, True, "y_zero"),
        EventSpec(lambda _t, u: u[1] - eps, Crossing.FALLING, True, "theta_zero"),
    ]


@dataclass(frozen=True)
class GammaCrossing:
    s: float
    y: float
    theta: float
    tangential: bool = False


@dataclass(frozen=True)
class OrbitLimits:
    backward: BoundaryLimit | None
    forward: BoundaryLimit | None


@dataclass
class OrbitTrace:
    """A parabolic orbit through (y0, θ0) with x(0) = 0, s(0) = 0."""

    y0: float
    theta0: float
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    gamma_crossings: list[GammaCrossing]
    type_label: OrbitType
    limits: OrbitLimits
    backward: Trajectory | None = field(default=None, repr=False)
    forward: Trajectory | None = field(default=None, repr=False)
    diagnostics: str = ""
    reflected: bool = False

    @property
    def x_of_s(self) -> np.ndarray:
        return self.x

    @property
    def s_span(self) -> tuple[float, float]:
        return float(self.s[0]), float(self.s[-1])

    @property
    def kappa_h(self) -> np.ndarray:
        """Hyperbolic curvature along the orbit, κ = y θ' + cos θ = y / sin θ."""
        return self.y / np.sin(self.theta)

    def to_csv(self) -> str:
        return trace_csv(self.s, self.x, self.y, self.theta, self.kappa_h)

    def record(self) -> dict:
        fwd, bwd = self.limits.forward, self.limits.backward
        return {
            "y0": self.y0,
            "theta0": self.theta0,
            "type": self.type_label.value,
            "Y": None if fwd is None else fwd.y,
            "Y_bar": bwd.y if (bwd is not None and self.type_label is OrbitType.TYPE_II) else None,
            "s_span": list(self.s_span),
            "gamma_crossings": [[c.s, c.y, c.theta] for c in self.gamma_crossings],
        }


def _label(trace_bwd: Trajectory | None, crossings: list[GammaCrossing], theta_min: float) -> OrbitType:
    stop = stopped_by(trace_bwd)
    if stop == "theta_zero":
        return OrbitType.TYPE_II if not crossings else OrbitType.UNDETERMINED
    if stop == "y_zero":
        if crossings or theta_min < HALF_PI:
            return OrbitType.TYPE_I
        return OrbitType.ORTHOGONAL
    return OrbitType.UNDETERMINED


def integrate_orbit(
    y0: float,
    theta0: float,
    ctrl: StepControl | None = None,
    *,
    eps_b: float = EPS_BOUNDARY,
    forward: bool = True,
    backward: bool = True,
) -> OrbitTrace:
    PhaseState(y0, theta0)
    ctrl = ctrl or DEFAULT_ORBIT_CTRL
    start = np.array([y0, theta0, 0.0, 0.0])
    events = _events(eps_b)
    bwd = run_branch(_rescaled, start, Direction.BACKWARD, events, ctrl) if backward else None
    fwd = run_branch(_rescaled, start, Direction.FORWARD, events, ctrl) if forward else None

    crossings = []
    if abs(_gamma_guard(0.0, start)) <= ctrl.atol:
        crossings.append(GammaCrossing(0.0, y0, theta0, False))
    for branch in (bwd, fwd):
        if branch is None:
            continue
        for ev in branch.events:
            if ev.name == "gamma":
                crossings.append(GammaCrossing(float(ev.state[S]), float(ev.state[Y]),
                                               float(ev.state[THETA]), ev.tangential))
    crossings.sort(key=lambda c: c.s)

    states = merge_branches(bwd, fwd)
    label = _label(bwd, crossings, float(states[:, THETA].min())) if backward else OrbitType.UNDETERMINED

    diag = []
    lim_b = lim_f = None
    stop_b, stop_f = stopped_by(bwd), stopped_by(fwd)
    if bwd is not None:
        if stop_b == "y_zero":
            lim_b = boundary_limit(bwd, Y, 0.0, "y_zero")
        elif stop_b == "theta_zero":
            lim_b = boundary_limit(bwd, THETA, 0.0, "theta_zero")
        else:
            diag.append(f"backward branch ended with {bwd.termination.value}: {bwd.message}")
    if fwd is not None:
        if stop_f == "theta_pi":
            lim_f = boundary_limit(fwd, THETA, math.pi, "theta_pi")
        else:
            diag.append(f"forward branch ended with {fwd.termination.value}: {fwd.message}")
            if forward and label is not OrbitType.UNDETERMINED:
                label = OrbitType.UNDETERMINED

    return OrbitTrace(
        y0=float(y0), theta0=float(theta0),
        s=states[:, S].copy(), x=states[:, X].copy(), y=states[:, Y].copy(), theta=states[:, THETA].copy(),
        gamma_crossings=crossings, type_label=label, limits=OrbitLimits(lim_b, lim_f),
        backward=bwd, forward=fwd, diagnostics="; ".join(diag),
    )


def classify(y0: float, theta0: float = HALF_PI, ctrl: StepControl | None = None) -> OrbitType:
    """Type of the orbit through (y0, θ0); only the backward branch is needed."""
    return integrate_orbit(y0, theta0, ctrl, forward=False).type_label


def _classify_job(args) -> str:
    y0, theta0, ctrl = args
    return classify(y0, theta0, ctrl).value


def classify_grid(y0s: Sequence[float], theta0: float = HALF_PI, ctrl: StepControl | None = None,
                  workers: int | None = None) -> list[OrbitType]:
    """Labels for a sweep of starting heights, in input order."""
    jobs = [(float(y), theta0, ctrl) for y in y0s]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return [OrbitType(v) for v in pool.map(_classify_job, jobs)]
    return [OrbitType(_classify_job(j)) for j in jobs]


@dataclass(frozen=True)
class ThresholdEstimate:
    H: float
    lo: float
    hi: float
    log: list[tuple[float, str]]

    @property
    def width(self) -> float:
        return self.hi - self.lo


def threshold_search(ctrl: StepControl | None = None, bracket: tuple[float, float] = (1e-3, 10.0),
                     width: float = 1e-8, max_widen: int = 4) -> ThresholdEstimate:
    """Bisection for the Type I / Type II switch along θ0 = π/2."""
    lo, hi = bracket
    log: list[tuple[float, str]] = []

    def is_type_one(y0: float) -> bool:
        label = classify(y0, HALF_PI, ctrl)
        log.append((y0, label.value))
        if label is OrbitType.UNDETERMINED:
            raise ThresholdSearchError(f"orbit from y0={y0} could not be classified", (label.value, label.value))
        return label is OrbitType.TYPE_I

    lo_ok, hi_ok = is_type_one(lo), not is_type_one(hi)
    for _ in range(max_widen):
        if lo_ok and hi_ok:
            break
        if not lo_ok:
            lo /= 10.0
            lo_ok = is_type_one(lo)
        if not hi_ok:
            hi *= 10.0
            hi_ok = not is_type_one(hi)
    if not (lo_ok and hi_ok):
        raise ThresholdSearchError(
            f"bracket [{lo}, {hi}] does not straddle the Type I/II switch",
            (log[-2][1], log[-1][1]) if len(log) > 1 else (log[-1][1], log[-1][1]),
        )
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if is_type_one(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdEstimate(0.5 * (lo + hi), lo, hi, log)


def find_threshold_H(ctrl: StepControl | None = None, **kwargs) -> float:
    return threshold_search(ctrl, **kwargs).H


@dataclass(frozen=True)
class SolitonDescriptors:
    Y: float | None
    Y_bar: float | None
    orthogonal_hit: bool
    concave: bool
    x_extent: tuple[float, float]
    slope_low: float
    slope_high: float


@dataclass
class SolitonCurve:
    curve: PolyCurve
    descriptors: SolitonDescriptors
    theta: np.ndarray
    s: np.ndarray

    def as_graph_on_y(self, y) -> np.ndarray:
        """x as a function of y by interpolation along the (y-monotone) curve."""
        v = self.curve.vertices
        return np.interp(y, v[:, 1], v[:, 0])


def x_second_derivative(y, theta):
    """d²x/dy² along a parabolic soliton."""
    sn = np.sin(theta)
    return -(y - sn * np.cos(theta)) / (y * sn ** 4)


def sample_uniform(trace: OrbitTrace, spacing: float, theta_margin: float = 0.25,
                   y_min: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Re-integrate the orbit at constant arc-length spacing with classical RK4.

    Sampling stays inside θ ∈ [margin, π - margin], y >= y_min and the span
    of ``trace``.  Returns (s, [x, y, θ]) arrays ordered by s.
    """
    s_lo, s_hi = trace.s_span

    def outside(u):
        return not (theta_margin <= u[2] <= math.pi - theta_margin and u[1] >= y_min)

    start = np.array([0.0, trace.y0, trace.theta0])
    n_f = int(max(s_hi, 0.0) / spacing) + 1
    n_b = int(max(-s_lo, 0.0) / spacing) + 1
    sf, uf = fixed_step_rk4(_arc_rhs, start, spacing, n_f, stop=outside)
    sb, ub = fixed_step_rk4(_arc_rhs, start, -spacing, n_b, stop=outside)
    s = np.concatenate([sb[::-1], sf[1:]])
    u = np.vstack([ub[::-1], uf[1:]])
    return s, u


def soliton_curve(trace: OrbitTrace, spacing: float | None = None, *,
                  theta_margin: float = 0.25, y_min: float = 0.2) -> SolitonCurve:
    """Soliton curve and its geometric descriptors.

    Without ``spacing`` the curve is the integrator's node sequence over the
    whole orbit.  With ``spacing`` it is a uniform arc-length resampling of
    the part of the orbit kept away from the phase-space boundary.
    """
    if trace.type_label is OrbitType.UNDETERMINED:
        raise DomainError("cannot build a curve from an undetermined orbit")
    if spacing is None:
        s, x, y, th = trace.s, trace.x, trace.y, trace.theta
    else:
        s, u = sample_uniform(trace, spacing, theta_margin, y_min)
        x, y, th = u[:, 0], u[:, 1], u[:, 2]
    curve = PolyCurve(np.column_stack([x, y]))

    fwd, bwd = trace.limits.forward, trace.limits.backward
    label = trace.type_label
    Y_top = None if fwd is None else fwd.y
    Y_bar = bwd.y if (bwd is not None and label is OrbitType.TYPE_II) else None
    orth = bool(bwd is not None and bwd.boundary == "y_zero" and abs(bwd.theta - HALF_PI) < 1e-3)
    xdd = x_second_derivative(trace.y[1:-1], trace.theta[1:-1])
    concave = bool(np.all(xdd < 0.0))
    cot = np.cos(trace.theta) / np.sin(trace.theta)
    desc = SolitonDescriptors(
        Y=Y_top, Y_bar=Y_bar, orthogonal_hit=orth, concave=concave,
        x_extent=(float(trace.x.min()), float(trace.x.max())),
        slope_low=float(cot[0]), slope_high=float(cot[-1]),
    )
    return SolitonCurve(curve, desc, np.asarray(th), np.asarray(s))


def reflect_orbit(trace: OrbitTrace) -> OrbitTrace:
    """The orbit s ↦ (y(-s), θ(-s) - π), shifted back into (0, π) on a second call."""
    shift = math.pi if trace.reflected else -math.pi
    return OrbitTrace(
        y0=trace.y0, theta0=trace.theta0 + shift,
        s=-trace.s[::-1], x=trace.x[::-1].copy(), y=trace.y[::-1].copy(), theta=trace.theta[::-1] + shift,
        gamma_crossings=[GammaCrossing(-c.s, c.y, c.theta + shift, c.tangential) for c in reversed(trace.gamma_crossings)],
        type_label=trace.type_label,
        limits=OrbitLimits(trace.limits.forward, trace.limits.backward),
        backward=trace.forward, forward=trace.backward,
        diagnostics=trace.diagnostics, reflected=not trace.reflected,
    )


def sweep(y0s: Sequence[float], theta0: float = HALF_PI, ctrl: StepControl | None = None) -> list[OrbitTrace]:
    return [integrate_orbit(float(y), theta0, ctrl) for y in y0s]
