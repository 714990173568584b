"""Helpers shared by the parabolic and conformal soliton integrators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ode import Direction, EventSpec, OdeProblem, StepControl, Termination, Trajectory, integrate

EPS_BOUNDARY = 1e-6

# state layout of every rescaled soliton system
Y, THETA, X, S = range(4)

DEFAULT_ORBIT_CTRL = StepControl(rtol=1e-10, atol=1e-12, h_min=1e-12, s_max=500.0)


@dataclass(frozen=True)
class BoundaryLimit:
    """Limit point of one end of an orbit, extrapolated to the boundary."""

    y: float
    theta: float
    x: float
    s: float
    error: float
    boundary: str


def extrapolate(g: Sequence[float], v: Sequence[float], g_boundary: float) -> tuple[float, float]:
    """Quadratic extrapolation of ``v`` as a function of ``g`` from three nodes.

    Returns the value at ``g_boundary`` and the gap to the linear
    extrapolation through the last two nodes, used as an error bar.
    """
    g0, g1, g2 = g
    v0, v1, v2 = v
    t = g_boundary
    l0 = (t - g1) * (t - g2) / ((g0 - g1) * (g0 - g2))
    l1 = (t - g0) * (t - g2) / ((g1 - g0) * (g1 - g2))
    l2 = (t - g0) * (t - g1) / ((g2 - g0) * (g2 - g1))
    quad = l0 * v0 + l1 * v1 + l2 * v2
    lin = v2 + (v2 - v1) * (t - g2) / (g2 - g1)
    return float(quad), float(abs(quad - lin))


def boundary_limit(traj: Trajectory, coord: int, value: float, name: str) -> BoundaryLimit:
    """Extrapolate the last three nodes of ``traj`` to ``state[coord] = value``."""
    st = traj.states[-3:]
    if len(st) < 3 or len(np.unique(st[:, coord])) < 3:
        last = traj.states[-1]
        out = last.copy()
        out[coord] = value
        return BoundaryLimit(*(float(out[i]) for i in (Y, THETA, X, S)), float("nan"), name)
    g = st[:, coord]
    vals = {coord: (value, 0.0)}
    for i in (Y, THETA, X, S):
        if i != coord:
            vals[i] = extrapolate(g, st[:, i], value)
    other = THETA if coord == Y else Y
    return BoundaryLimit(vals[Y][0], vals[THETA][0], vals[X][0], vals[S][0], vals[other][1], name)


def run_branch(rhs, start: np.ndarray, direction: Direction, events: list[EventSpec],
               ctrl: StepControl) -> Trajectory:
    return integrate(OdeProblem(rhs, np.asarray(start, float), 0.0, direction), events, ctrl)


def merge_branches(backward: Trajectory | None, forward: Trajectory | None) -> np.ndarray:
    """Stack node states ordered by increasing arc length (start counted once)."""
    parts = []
    if backward is not None:
        parts.append(backward.states[::-1])
    if forward is not None:
        parts.append(forward.states[1:] if backward is not None else forward.states)
    states = np.vstack(parts)
    order = np.argsort(states[:, S], kind="stable")
    return states[order]


def stopped_by(traj: Trajectory | None) -> str | None:
    if traj is None or traj.termination is not Termination.EVENT_STOP:
        return None
    return traj.message


def trace_csv(s, x, y, theta, kappa_h) -> str:
    rows = ["s,x,y,theta,kappa_h"]
    rows += [",".join(f"{v:.17g}" for v in row) for row in zip(s, x, y, theta, kappa_h)]
    return "\n".join(rows) + "\n"
