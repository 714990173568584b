"""Adaptive Dormand–Prince 5(4) integration with dense output and events.

The integrator is written for small autonomous-ish systems where event
location matters more than raw speed.  Step size control is the PI
controller of Hairer, Nørsett & Wanner; dense output uses the quartic
continuous extension of the Dormand–Prince pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation

Rhs = Callable[[float, np.ndarray], np.ndarray]
Guard = Callable[[float, np.ndarray], float]


class Direction(enum.IntEnum):
    FORWARD = 1
    BACKWARD = -1


class Crossing(str, enum.Enum):
    RISING = "Rising"
    FALLING = "Falling"
    ANY = "Any"


class Termination(str, enum.Enum):
    EVENT_STOP = "EventStop"
    BLOW_UP = "BlowUp"
    STEP_UNDERFLOW = "StepUnderflow"
    REACHED_BOUND = "ReachedBound"


@dataclass(frozen=True)
class OdeProblem:
    rhs: Rhs
    initial_state: np.ndarray
    s0: float = 0.0
    direction: Direction = Direction.FORWARD


@dataclass(frozen=True)
class EventSpec:
    """Root of ``guard`` along the trajectory.

    ``direction`` refers to the sign change seen while the integration
    progresses, so a Rising event in backward integration fires when the
    guard goes from negative to positive as ``s`` decreases.
    """

    guard: Guard
    direction: Crossing = Crossing.ANY
    terminal: bool = False
    name: str = ""


@dataclass(frozen=True)
class StepControl:
    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float | None = None
    h_min: float = 1e-12
    s_max: float = 1e3
    max_steps: int = 200_000

    def validate(self) -> None:
        if not (self.rtol > 0 and self.atol > 0):
            raise ContractViolation("rtol and atol must be positive")
        if not self.h_min > 0:
            raise ContractViolation("h_min must be positive")
        if not self.s_max > 0:
            raise ContractViolation("s_max must be positive")
        if self.h_init is not None and not self.h_init > 0:
            raise ContractViolation("h_init must be positive")

    def refined(self, factor: float = 0.1) -> "StepControl":
        return StepControl(self.rtol * factor, self.atol * factor, self.h_init, self.h_min, self.s_max, self.max_steps)


@dataclass(frozen=True)
class Event:
    s: float
    state: np.ndarray
    event_id: int
    name: str
    guard_slope: float

    @property
    def tangential(self) -> bool:
        return abs(self.guard_slope) < TANGENTIAL_SLOPE


TANGENTIAL_SLOPE = 1e-8

# Dormand–Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA


@dataclass
class Trajectory:
    """Accepted nodes plus the dense-output coefficients between them."""

    s: np.ndarray
    states: np.ndarray
    events: list[Event]
    termination: Termination
    direction: Direction
    message: str = ""
    _coeffs: np.ndarray = field(default=None, repr=False)  # (n-1, 5, d)

    @property
    def nodes(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.s.tolist(), self.states))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_s(self) -> float:
        return float(self.s[-1])

    def __call__(self, s) -> np.ndarray:
        """Dense output at ``s`` (scalar or array) inside the integrated span."""
        s_arr = np.atleast_1d(np.asarray(s, float))
        if len(self.s) == 1:
            return np.repeat(self.states[:1], len(s_arr), axis=0) if np.ndim(s) else self.states[0].copy()
        key = self.s if self.direction is Direction.FORWARD else -self.s
        q = s_arr if self.direction is Direction.FORWARD else -s_arr
        j = np.clip(np.searchsorted(key, q, side="right") - 1, 0, len(self.s) - 2)
        h = self.s[j + 1] - self.s[j]
        th = ((s_arr - self.s[j]) / h)[:, None]
        c = self._coeffs[j]
        out = _dense_eval(c, th)
        return out if np.ndim(s) else out[0]


def _dense_eval(c: np.ndarray, th) -> np.ndarray:
    th1 = 1.0 - th
    return c[..., 0, :] + th * (c[..., 1, :] + th1 * (c[..., 2, :] + th * (c[..., 3, :] + th1 * c[..., 4, :])))


def _rms(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    sc = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def _safe_rhs(rhs: Rhs, s: float, y: np.ndarray) -> np.ndarray | None:
    try:
        with np.errstate(all="ignore"):
            f = np.asarray(rhs(s, y), dtype=float)
    except (ArithmeticError, ValueError):
        return None
    return f if np.all(np.isfinite(f)) else None


def _initial_step(rhs: Rhs, s0: float, y0: np.ndarray, f0: np.ndarray, sign: int, ctrl: StepControl) -> float:
    sc = ctrl.atol + ctrl.rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, ctrl.s_max)
    f1 = _safe_rhs(rhs, s0 + sign * h0, y0 + sign * h0 * f0)
    if f1 is None:
        return max(ctrl.h_min, h0 * 1e-3)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return max(ctrl.h_min, min(100 * h0, h1, ctrl.s_max))


def _dp_step(rhs: Rhs, s: float, y: np.ndarray, f0: np.ndarray, h: float):
    """One trial step.  Returns (y_new, f_new, k-stages, error-vector) or None."""
    k = [f0]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k) if a != 0.0)
        fi = _safe_rhs(rhs, s + _C[i] * h, yi)
        if fi is None:
            return None
        k.append(fi)
        if i == 6:
            y_new = yi
    err = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
    return y_new, k[6], k, err


def _dense_coeffs(y0, y1, k, h) -> np.ndarray:
    ydiff = y1 - y0
    bspl = h * k[0] - ydiff
    r5 = h * sum(d * kj for d, kj in zip(_D, k) if d != 0.0)
    return np.stack([y0, ydiff, bspl, ydiff - h * k[6] - bspl, r5])


def _crosses(g0: float, g1: float, mode: Crossing) -> bool:
    if mode is Crossing.RISING:
        return g0 < 0.0 <= g1
    if mode is Crossing.FALLING:
        return g0 > 0.0 >= g1
    return (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)


def _locate(guard: Guard, s0: float, s1: float, g0: float, coeffs: np.ndarray, atol: float):
    """Bisection on the dense output between two accepted nodes."""
    h = s1 - s0
    lo, hi = 0.0, 1.0
    glo = g0
    th = 1.0
    for _ in range(200):
        th = 0.5 * (lo + hi)
        y = _dense_eval(coeffs, th)
        g = guard(s0 + th * h, y)
        if abs(g) < atol and (hi - lo) < 1e-3:
            break
        if (g < 0.0) == (glo < 0.0) and g != 0.0:
            lo, glo = th, g
        else:
            hi = th
        if hi - lo < 1e-16:
            break
    s_ev = s0 + th * h
    y_ev = _dense_eval(coeffs, th)
    dth = 1e-6
    ya = _dense_eval(coeffs, max(th - dth, 0.0))
    yb = _dense_eval(coeffs, min(th + dth, 1.0))
    span = (min(th + dth, 1.0) - max(th - dth, 0.0)) * h
    slope = (guard(s_ev, yb) - guard(s_ev, ya)) / span
    return s_ev, y_ev, slope


def integrate(
    problem: OdeProblem,
    events: Sequence[EventSpec] = (),
    ctrl: StepControl | None = None,
) -> Trajectory:
    ctrl = ctrl or StepControl()
    ctrl.validate()
    rhs = problem.rhs
    sign = int(problem.direction)
    s = float(problem.s0)
    y = np.array(problem.initial_state, dtype=float)
    s_end = s + sign * ctrl.s_max

    s_nodes = [s]
    y_nodes = [y.copy()]
    coeffs: list[np.ndarray] = []
    found: list[Event] = []

    def finish(term: Termination, msg: str = "") -> Trajectory:
        c = np.array(coeffs) if coeffs else np.zeros((0, 5, len(y)))
        return Trajectory(np.array(s_nodes), np.array(y_nodes), found, term, problem.direction, msg, c)

    f = _safe_rhs(rhs, s, y)
    if f is None:
        return finish(Termination.BLOW_UP, "right-hand side is not finite at the initial state")
    g_prev = [ev.guard(s, y) for ev in events]

    h = ctrl.h_init if ctrl.h_init is not None else _initial_step(rhs, s, y, f, sign, ctrl)
    h = min(h, ctrl.s_max)
    err_prev = 1e-4
    reject = False

    for _ in range(ctrl.max_steps):
        if abs(s_end - s) <= 1e-14 * max(1.0, abs(s)):
            return finish(Termination.REACHED_BOUND)
        h = min(h, abs(s_end - s))
        if h < ctrl.h_min and abs(s_end - s) > ctrl.h_min:
            return finish(Termination.STEP_UNDERFLOW, f"step {h:.3e} below h_min at s={s:.17g}")

        trial = _dp_step(rhs, s, y, f, sign * h)
        if trial is None:
            h *= 0.25
            reject = True
            if h < ctrl.h_min:
                return finish(Termination.BLOW_UP, f"non-finite right-hand side near s={s:.17g}")
            continue
        y_new, f_new, k, err_vec = trial
        err = _rms(err_vec, y, y_new, ctrl.rtol, ctrl.atol)

        if err > 1.0:
            fac = max(_FAC_MIN, _SAFETY * err ** (-_EXPO))
            h *= fac
            reject = True
            continue

        s_new = s + sign * h
        if s_new == s:
            return finish(Termination.STEP_UNDERFLOW, f"step does not advance s={s:.17g}")
        c = _dense_coeffs(y, y_new, k, sign * h)

        stop = None
        hits = []
        g_new = [ev.guard(s_new, y_new) for ev in events]
        for i, ev in enumerate(events):
            if _crosses(g_prev[i], g_new[i], ev.direction):
                s_ev, y_ev, slope = _locate(ev.guard, s, s_new, g_prev[i], c, ctrl.atol)
                hits.append((sign * s_ev, i, s_ev, y_ev, slope))
        hits.sort(key=lambda t: (t[0], t[1]))
        for _, i, s_ev, y_ev, slope in hits:
            found.append(Event(s_ev, y_ev, i, events[i].name, slope))
            if events[i].terminal:
                stop = (s_ev, y_ev, i)
                break

        if stop is not None:
            s_ev, y_ev, i = stop
            th = (s_ev - s) / (s_new - s)
            # re-split the dense segment so the final node is the event state
            h_ev = s_ev - s
            f_ev = _safe_rhs(rhs, s_ev, y_ev)
            if h_ev != 0.0 and f_ev is not None:
                k_ev = _dp_step(rhs, s, y, f, h_ev)
                if k_ev is not None:
                    coeffs.append(_dense_coeffs(y, y_ev, k_ev[2], h_ev))
                else:
                    coeffs.append(_restrict(c, th))
                s_nodes.append(s_ev)
                y_nodes.append(y_ev)
            return finish(Termination.EVENT_STOP, events[i].name)

        coeffs.append(c)
        s_nodes.append(s_new)
        y_nodes.append(y_new.copy())
        s, y, f = s_new, y_new, f_new
        g_prev = g_new

        fac = _SAFETY * err ** (-_EXPO) * err_prev ** _BETA if err > 0 else _FAC_MAX
        fac = min(_FAC_MAX, max(_FAC_MIN, fac))
        if reject:
            fac = min(1.0, fac)
        h *= fac
        err_prev = max(err, 1e-4)
        reject = False

    return finish(Termination.STEP_UNDERFLOW, "maximum number of steps exceeded")


def _restrict(c: np.ndarray, th: float) -> np.ndarray:
    """Coefficients of the dense segment rescaled to [0, th]; fallback only."""
    # sample and refit the quartic on the sub-interval
    ts = np.linspace(0.0, 1.0, 5)
    vals = np.array([_dense_eval(c, t * th) for t in ts])
    basis = np.array([[1.0, t, t * (1 - t), t * t * (1 - t), t * t * (1 - t) ** 2] for t in ts])
    sol = np.linalg.solve(basis, vals)
    return sol


def fixed_step_rk4(rhs: Rhs, y0, h: float, n_steps: int, s0: float = 0.0,
                   stop: Callable[[np.ndarray], bool] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Classical RK4 with a constant signed step; stops early when ``stop(y)`` is true.

    The state that triggers ``stop`` is not included.
    """
    y = np.array(y0, dtype=float)
    ss = [s0]
    ys = [y.copy()]
    s = s0
    for _ in range(n_steps):
        k1 = rhs(s, y)
        k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(s + h, y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y_new)) or (stop is not None and stop(y_new)):
            break
        s += h
        y = y_new
        ss.append(s)
        ys.append(y.copy())
    return np.array(ss), np.array(ys)
