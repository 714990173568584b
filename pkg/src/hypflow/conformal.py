"""Conformal solitons: curves whose ICSF evolution is the vertical shift.

In arc length the soliton equation for ∂_y is

    x' = cos θ,   y' = sin θ,   θ' = -1/cos θ - cos θ / y,

on {y > 0, |θ| < π/2}.  As for the parabolic case, the integration runs in a
rescaled parameter, here dτ = ds / (y cos θ):

    y_τ = y sin θ cos θ,   θ_τ = -(y + cos²θ),   x_τ = y cos²θ,   s_τ = y cos θ.

θ_τ < 0 everywhere, so each orbit sweeps θ from π/2 down to -π/2 exactly
once.  Traces are stored in canonical form: s = 0 and x = 0 where θ = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

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
from .errors import DomainError
from .geometry import CONFORMAL_VERTICAL, PolyCurve, soliton_residual
from .ode import Crossing, Direction, EventSpec, StepControl, Trajectory, fixed_step_rk4

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class ConformalPhaseState:
    y: float
    theta: float

    def __post_init__(self):
        if not (self.y > 0 and abs(self.theta) < HALF_PI):
            raise DomainError(f"({self.y}, {self.theta}) is outside the conformal phase region")


def conf_rhs(state: ConformalPhaseState | tuple[float, float]) -> tuple[float, float]:
    y, theta = (state.y, state.theta) if isinstance(state, ConformalPhaseState) else state
    ConformalPhaseState(y, theta)
    c = math.cos(theta)
    return math.sin(theta), -1.0 / c - c / y


def _rescaled(_tau: float, u: np.ndarray) -> np.ndarray:
    y, th = u[0], u[1]
    sn, cs = math.sin(th), math.cos(th)
    return np.array([y * sn * cs, -(y + cs * cs), y * cs * cs, y * cs])


def _arc_rhs(_s: float, u: np.ndarray) -> np.ndarray:
    _x, y, th = u
    c = math.cos(th)
    return np.array([c, math.sin(th), -1.0 / c - c / y])


def _events(eps: float) -> list[EventSpec]:
    return [
        EventSpec(lambda _t, u: u[1], Crossing.ANY, False, "theta_zero"),
        # θ falls forward and rises backward, so each guard only fires on its own side
        EventSpec(lambda _t, u: u[1] + (HALF_PI - eps), Crossing.FALLING, True, "theta_low"),
        EventSpec(lambda _t, u: u[1] - (HALF_PI - eps), Crossing.RISING, True, "theta_high"),
        EventSpec(lambda _t, u: u[0] - eps, Crossing.FALLING, True, "y_zero"),
    ]


@dataclass
class ConformalTrace:
    """Canonical conformal orbit: s = 0, x = 0 at the point where θ = 0.

    ``tau_shift`` is the rescaled-parameter offset between the canonical
    point and the original start; ``at_tau`` evaluates the dense solution in
    the canonical parameter.
    """

    y0: float
    theta0: float
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    limits: tuple[BoundaryLimit | None, BoundaryLimit | None]
    tau_shift: float
    s_shift: float
    x_shift: float
    mirrored: bool = False
    backward: Trajectory | None = field(default=None, repr=False)
    forward: Trajectory | None = field(default=None, repr=False)
    diagnostics: str = ""

    @property
    def determined(self) -> bool:
        return all(lim is not None for lim in self.limits)

    @property
    def x_span(self) -> tuple[float, float]:
        return float(self.x.min()), float(self.x.max())

    @property
    def s_span(self) -> tuple[float, float]:
        return float(self.s[0]), float(self.s[-1])

    @property
    def y_star(self) -> float | None:
        if not self.determined:
            return None
        return 0.5 * (self.limits[0].y + self.limits[1].y)

    @property
    def kappa_h(self) -> np.ndarray:
        """Hyperbolic curvature in the direction of increasing s: -y / cos θ."""
        return -self.y / np.cos(self.theta)

    def at_tau(self, tau) -> np.ndarray:
        """States [y, θ, x, s] at canonical rescaled parameter ``tau``."""
        tau = np.atleast_1d(np.asarray(tau, float))
        sign = -1.0 if self.mirrored else 1.0
        raw = sign * tau + self.tau_shift
        out = np.empty((len(raw), 4))
        neg = raw < 0
        if np.any(neg):
            out[neg] = self.backward(raw[neg])
        if np.any(~neg):
            out[~neg] = self.forward(raw[~neg])
        out[:, X] = sign * (out[:, X] - self.x_shift)
        out[:, S] = sign * (out[:, S] - self.s_shift)
        out[:, THETA] *= sign
        return out

    def to_csv(self) -> str:
        return trace_csv(self.s, self.x, self.y, self.theta, self.kappa_h)

    def record(self) -> dict:
        lo, hi = self.x_span
        return {
            "y0": self.y0,
            "theta0": self.theta0,
            "y_star": self.y_star,
            "x_m": lo,
            "x_M": hi,
            "concave": bool(np.all(y_second_derivative(self.y, self.theta) < 0.0)),
        }


def y_second_derivative(y, theta):
    """d²y/dx² along a conformal soliton."""
    c = np.cos(theta)
    return -(y + c * c) / (y * c ** 4)


def integrate_conformal(y0: float, theta0: float, ctrl: StepControl | None = None, *,
                        eps_b: float = EPS_BOUNDARY) -> ConformalTrace:
    ConformalPhaseState(y0, theta0)
    ctrl = ctrl or DEFAULT_ORBIT_CTRL
    mirrored = theta0 < 0
    start = np.array([y0, abs(theta0), 0.0, 0.0])
    events = _events(eps_b)
    bwd = run_branch(_rescaled, start, Direction.BACKWARD, events, ctrl)
    fwd = run_branch(_rescaled, start, Direction.FORWARD, events, ctrl)

    if start[THETA] == 0.0:
        tau0, pivot = 0.0, start
    else:
        hits = [(ev.s, ev.state) for ev in fwd.events if ev.name == "theta_zero"]
        if not hits:
            raise DomainError(f"orbit from ({y0}, {theta0}) never reaches θ = 0")
        tau0, pivot = hits[0]
    s_shift, x_shift = float(pivot[S]), float(pivot[X])

    diag = []
    lim = []
    for branch, name, value in ((bwd, "theta_high", HALF_PI), (fwd, "theta_low", -HALF_PI)):
        if stopped_by(branch) == name:
            lim.append(boundary_limit(branch, THETA, value, name))
        else:
            lim.append(None)
            diag.append(f"{branch.direction.name.lower()} branch ended with {branch.termination.value}: {branch.message}")

    states = merge_branches(bwd, fwd)
    states[:, S] -= s_shift
    states[:, X] -= x_shift

    def shifted(b):
        if b is None:
            return None
        return BoundaryLimit(b.y, b.theta, b.x - x_shift, b.s - s_shift, b.error, b.boundary)

    lim_b, lim_f = shifted(lim[0]), shifted(lim[1])
    if mirrored:
        states = states[::-1].copy()
        states[:, S] *= -1.0
        states[:, X] *= -1.0
        states[:, THETA] *= -1.0

        def flip(b):
            if b is None:
                return None
            name = "theta_low" if b.boundary == "theta_high" else "theta_high"
            return BoundaryLimit(b.y, -b.theta, -b.x, -b.s, b.error, name)

        lim_b, lim_f = flip(lim_f), flip(lim_b)

    return ConformalTrace(
        y0=float(y0), theta0=float(theta0),
        s=states[:, S].copy(), x=states[:, X].copy(), y=states[:, Y].copy(), theta=states[:, THETA].copy(),
        limits=(lim_b, lim_f), tau_shift=float(tau0), s_shift=s_shift, x_shift=x_shift,
        mirrored=mirrored, backward=bwd, forward=fwd, diagnostics="; ".join(diag),
    )


@dataclass(frozen=True)
class ConformalDescriptors:
    x_m: float
    x_M: float
    concave: bool
    vertical_endpoints: bool
    slope_left: float
    slope_right: float


@dataclass
class ConformalSolitonCurve:
    curve: PolyCurve
    descriptors: ConformalDescriptors
    theta: np.ndarray
    s: np.ndarray

    def as_graph_on_x(self, x) -> np.ndarray:
        v = self.curve.vertices
        return np.interp(x, v[:, 0], v[:, 1])


def sample_uniform(trace: ConformalTrace, spacing: float, theta_margin: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Constant arc-length RK4 resampling from the canonical point, |θ| <= π/2 - margin."""
    lo, hi = trace.s_span
    y_c = float(trace.at_tau(0.0)[0, Y])
    start = np.array([0.0, y_c, 0.0])

    def outside(u):
        return abs(u[2]) > HALF_PI - theta_margin

    sf, uf = fixed_step_rk4(_arc_rhs, start, spacing, int(max(hi, 0.0) / spacing) + 1, stop=outside)
    sb, ub = fixed_step_rk4(_arc_rhs, start, -spacing, int(max(-lo, 0.0) / spacing) + 1, stop=outside)
    return np.concatenate([sb[::-1], sf[1:]]), np.vstack([ub[::-1], uf[1:]])


def conformal_curve(trace: ConformalTrace, spacing: float | None = None, *,
                    theta_margin: float = 0.25) -> ConformalSolitonCurve:
    if not trace.determined:
        raise DomainError("cannot build a curve from an undetermined trace")
    if spacing is None:
        s, x, y, th = trace.s, trace.x, trace.y, trace.theta
    else:
        s, u = sample_uniform(trace, spacing, theta_margin)
        x, y, th = u[:, 0], u[:, 1], u[:, 2]
    slopes = np.tan(trace.theta[[0, -1]])
    desc = ConformalDescriptors(
        x_m=float(trace.x.min()), x_M=float(trace.x.max()),
        concave=bool(np.all(y_second_derivative(trace.y, trace.theta) < 0.0)),
        vertical_endpoints=bool(np.all(np.abs(slopes) > 1e3)),
        slope_left=float(slopes[0]), slope_right=float(slopes[1]),
    )
    return ConformalSolitonCurve(PolyCurve(np.column_stack([x, y])), desc, np.asarray(th), np.asarray(s))


def conformal_residual(curve: ConformalSolitonCurve | PolyCurve) -> float:
    """max |1/κ + ⟨N, ∂_y⟩| over interior vertices."""
    poly = curve.curve if isinstance(curve, ConformalSolitonCurve) else curve
    return soliton_residual(poly, CONFORMAL_VERTICAL)


def mirror_deviation(trace: ConformalTrace) -> float:
    """Largest distance between the curve and its mirror image x ↦ -x.

    The rescaled system is reversible under (τ, x, θ) ↦ (-τ, -x, -θ), so the
    mirror of the point at canonical τ is compared with the point at -τ.
    """
    tau_hi = trace.forward.final_s - trace.tau_shift
    tau_lo = trace.backward.final_s - trace.tau_shift
    if trace.mirrored:
        tau_lo, tau_hi = -tau_hi, -tau_lo
    span = min(tau_hi, -tau_lo)
    tau = np.linspace(0.0, span, 2001)
    a = trace.at_tau(tau)
    b = trace.at_tau(-tau)
    return float(np.max(np.hypot(a[:, X] + b[:, X], a[:, Y] - b[:, Y])))
