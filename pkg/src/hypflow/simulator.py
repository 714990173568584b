"""Front-tracking discretisation of the inverse curve shortening flow.

Each vertex moves with Euclidean velocity -(y/κ) n, where n is the unit
Euclidean normal (left of the direction of travel) and κ the hyperbolic
curvature.  The normal speed depends on curvature with diffusion coefficient
D = y²/κ², so a plain explicit step needs dt ≲ h²/(2D).  The default step is
therefore linearly implicit: the displacement u along n solves

    (I - dt D ∂²_s) u = dt (-y/κ),

which is consistent to first order and unconditionally stable for the
linearised problem.  The explicit Euler update is available with
``scheme="explicit"``.  After every step the curve is resampled at uniform
arc length with a cubic spline.

Open curves need boundary data: their endpoints move with a prescribed
velocity field (the translation field for soliton checks).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.spatial import cKDTree

from .errors import ContractViolation, FlowTerminated
from .geometry import (
    CONFORMAL_VERTICAL,
    PARABOLIC,
    CurvatureSample,
    FieldKind,
    KillingField,
    PolyCurve,
    curvature_at,
    fit_circle,
    hyperbolic_radius_of_circle,
)

KAPPA_FLOOR = 1e-6
Y_FLOOR = 1e-8


class FlowTermination(str, enum.Enum):
    REACHED_T = "ReachedT"
    CURVATURE_SIGN_CHANGE = "CurvatureSignChange"
    BOUNDARY_CONTACT = "BoundaryContact"


class StabilityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class _Local:
    """Per-vertex discrete geometry on all vertices (open ends use one-sided stencils)."""

    normal: np.ndarray  # (n, 2) unit Euclidean
    kappa_e: np.ndarray
    kappa_h: np.ndarray
    h_minus: np.ndarray
    h_plus: np.ndarray


def _local_geometry(p: np.ndarray, closed: bool) -> _Local:
    if closed:
        prev, nxt = np.roll(p, 1, axis=0), np.roll(p, -1, axis=0)
    else:
        prev = np.vstack([2 * p[0] - p[1], p[:-1]])
        nxt = np.vstack([p[1:], 2 * p[-1] - p[-2]])
    a, b = p - prev, nxt - p
    la, lb = np.hypot(a[:, 0], a[:, 1]), np.hypot(b[:, 0], b[:, 1])
    chord = nxt - prev
    lc = np.hypot(chord[:, 0], chord[:, 1])
    tan = chord / lc[:, None]
    normal = np.column_stack([-tan[:, 1], tan[:, 0]])
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    kappa_e = 2.0 * cross / (la * lb * lc)
    kappa_h = p[:, 1] * kappa_e + tan[:, 0]
    return _Local(normal, kappa_e, kappa_h, la, lb)


def orient_positive(curve: PolyCurve) -> PolyCurve:
    """Return ``curve`` or its reverse, whichever has positive median curvature."""
    loc = _local_geometry(curve.vertices, curve.closed)
    k = loc.kappa_h if curve.closed else loc.kappa_h[1:-1]
    return curve if np.median(k) > 0 else curve.reverse()


@dataclass(frozen=True)
class FlowFrame:
    t: float
    curve: PolyCurve
    kappa_h: np.ndarray = field(repr=False)

    @classmethod
    def from_curve(cls, t: float, curve: PolyCurve) -> "FlowFrame":
        return cls(float(t), curve, _local_geometry(curve.vertices, curve.closed).kappa_h)

    def samples(self) -> list[CurvatureSample]:
        return [curvature_at(self.curve, int(i)) for i in self.curve.interior_indices()]


@dataclass
class FlowRun:
    frames: list[FlowFrame]
    dt: float
    resample_spacing: float | None
    termination: FlowTermination
    message: str = ""
    steps: int = 0
    cap_bound: bool = False

    @property
    def final(self) -> FlowFrame:
        return self.frames[-1]


def resample(p: np.ndarray, closed: bool, n: int | None = None, spacing: float | None = None) -> np.ndarray:
    """Uniform arc-length resampling through a cubic spline of the vertices."""
    if closed:
        pts = np.vstack([p, p[:1]])
    else:
        pts = p
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    length = s[-1]
    if spacing is not None:
        n = max(int(round(length / spacing)) + (0 if closed else 1), 4)
    n = n or len(p)
    spline = CubicSpline(s, pts, axis=0, bc_type="periodic" if closed else "not-a-knot")
    q = np.linspace(0.0, length, n, endpoint=not closed)
    out = spline(q)
    if not closed:
        out[0], out[-1] = p[0], p[-1]
    return out


def _second_difference(hm: np.ndarray, hp: np.ndarray):
    """Coefficients of the three-point ∂² on a non-uniform grid."""
    lo = 2.0 / (hm * (hm + hp))
    hi = 2.0 / (hp * (hm + hp))
    return lo, -(lo + hi), hi


def stability_limit(p: np.ndarray, closed: bool, kappa_h: np.ndarray | None = None) -> float:
    """Explicit-step heuristic dt <= 0.25 (h/y)² κ², minimised over vertices."""
    loc = _local_geometry(p, closed)
    k = loc.kappa_h if kappa_h is None else kappa_h
    h = np.minimum(loc.h_minus, loc.h_plus) / p[:, 1]
    sl = slice(None) if closed else slice(1, -1)
    return float(np.min(0.25 * (h[sl] * k[sl]) ** 2))


def _boundary_velocity(boundary: KillingField | Callable | None, pts: np.ndarray) -> np.ndarray:
    if boundary is None:
        return np.zeros_like(pts)
    if isinstance(boundary, KillingField):
        fx, fy = boundary.components(pts[:, 0], pts[:, 1])
        return np.column_stack([np.broadcast_to(fx, len(pts)), np.broadcast_to(fy, len(pts))]).astype(float)
    return np.asarray(boundary(pts), float)


def step_icsf(frame: FlowFrame, dt: float, *, scheme: str = "implicit", n_vertices: int | None = None,
              spacing: float | None = None, boundary: KillingField | Callable | None = None,
              kappa_floor: float = KAPPA_FLOOR, y_floor: float = Y_FLOOR) -> FlowFrame:
    """Advance one step of size ``dt``.

    Raises FlowTerminated when a curvature drops below ``kappa_floor`` or a
    vertex goes below ``y_floor``.
    """
    curve = frame.curve
    p = curve.vertices
    closed = curve.closed
    loc = _local_geometry(p, closed)
    inner = slice(None) if closed else slice(1, -1)
    k = loc.kappa_h[inner]
    if np.any(k < kappa_floor):
        raise FlowTerminated(f"hyperbolic curvature {k.min():.3e} below floor at t={frame.t}",
                             FlowTermination.CURVATURE_SIGN_CHANGE, frame.t)

    y = p[:, 1]
    speed = -y / loc.kappa_h
    if scheme == "explicit":
        u = dt * speed
    elif scheme == "implicit":
        u = _implicit_displacement(p, loc, speed, dt, closed, boundary)
    else:
        raise ContractViolation(f"unknown scheme {scheme!r}")

    new = p + u[:, None] * loc.normal
    if not closed:
        ends = p[[0, -1]]
        new[[0, -1]] = ends + dt * _boundary_velocity(boundary, ends)
    if np.any(new[:, 1] < y_floor) or not np.all(np.isfinite(new)):
        raise FlowTerminated(f"curve reached y < {y_floor} at t={frame.t + dt}",
                             FlowTermination.BOUNDARY_CONTACT, frame.t + dt)
    new = resample(new, closed, n=n_vertices or (None if spacing else len(p)), spacing=spacing)
    return FlowFrame.from_curve(frame.t + dt, PolyCurve(new, closed=closed, y_floor=y_floor))


def _solve_cyclic(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Periodic tridiagonal solve (row i couples i-1, i, i+1 mod n) by Sherman-Morrison."""
    n = len(diag)
    corner_lo, corner_hi = sub[0], sup[-1]
    gamma = -diag[0]
    ab = np.zeros((3, n))
    ab[1] = diag
    ab[1, 0] -= gamma
    ab[1, -1] -= corner_lo * corner_hi / gamma
    ab[0, 1:] = sup[:-1]
    ab[2, :-1] = sub[1:]
    u = np.zeros(n)
    u[0], u[-1] = gamma, corner_hi
    both = solve_banded((1, 1), ab, np.column_stack([rhs, u]))
    x, z = both[:, 0], both[:, 1]
    v0, v1 = 1.0, corner_lo / gamma
    return x - z * (v0 * x[0] + v1 * x[-1]) / (1.0 + v0 * z[0] + v1 * z[-1])


def _implicit_displacement(p, loc: _Local, speed, dt, closed, boundary) -> np.ndarray:
    n = len(p)
    d = (p[:, 1] / loc.kappa_h) ** 2
    lo, mid, hi = _second_difference(loc.h_minus, loc.h_plus)
    rhs = dt * speed
    if closed:
        return _solve_cyclic(-dt * d * lo, 1.0 - dt * d * mid, -dt * d * hi, rhs)
    # open curve: Dirichlet data from the endpoint motion projected on the normal
    ends = p[[0, -1]]
    vel = _boundary_velocity(boundary, ends)
    u0 = dt * float(vel[0] @ loc.normal[0])
    u1 = dt * float(vel[1] @ loc.normal[-1])
    m = n - 2
    ab = np.zeros((3, m))
    ab[1] = 1.0 - dt * d[1:-1] * mid[1:-1]
    ab[0, 1:] = -dt * d[1:-2] * hi[1:-2]
    ab[2, :-1] = -dt * d[2:-1] * lo[2:-1]
    b = rhs[1:-1].copy()
    b[0] += dt * d[1] * lo[1] * u0
    b[-1] += dt * d[-2] * hi[-2] * u1
    u = np.empty(n)
    u[1:-1] = solve_banded((1, 1), ab, b)
    u[0], u[-1] = u0, u1
    return u


def simulate(curve: PolyCurve, t_final: float, dt: float, *, scheme: str = "implicit",
             n_vertices: int | None = None, spacing: float | None = None,
             boundary: KillingField | Callable | None = None, record_every: int | None = None,
             kappa_floor: float = KAPPA_FLOOR, y_floor: float = Y_FLOOR) -> FlowRun:
    """Evolve ``curve`` to ``t_final``; frames are kept every ``record_every`` steps.

    The curve is reoriented, if needed, so that its curvature is positive.
    For the explicit scheme the step is capped by :func:`stability_limit` and
    a StabilityWarning is issued when the cap binds.
    """
    if not (dt > 0 and t_final >= 0):
        raise ContractViolation("need dt > 0 and t_final >= 0")
    curve = orient_positive(curve)
    if spacing is None and n_vertices is None:
        n_vertices = len(curve.vertices)
    start = resample(curve.vertices, curve.closed, n=n_vertices, spacing=spacing)
    frame = FlowFrame.from_curve(0.0, PolyCurve(start, curve.closed, y_floor=y_floor))
    n_steps = int(math.ceil(t_final / dt - 1e-9))
    record_every = record_every or max(n_steps, 1)
    frames = [frame]
    cap_bound = False
    for i in range(n_steps):
        h = min(dt, t_final - frame.t) if i == n_steps - 1 else dt
        if scheme == "explicit":
            cap = stability_limit(frame.curve.vertices, frame.curve.closed)
            if h > cap:
                if not cap_bound:
                    warnings.warn(f"explicit step capped at {cap:.3e}", StabilityWarning, stacklevel=2)
                cap_bound = True
                h_left = h
                while h_left > 1e-15:
                    sub = min(cap, h_left)
                    frame = _advance(frame, sub, scheme, n_vertices, spacing, boundary, kappa_floor, y_floor)
                    if isinstance(frame, FlowRun):
                        return _finish(frames, frame, dt, spacing, cap_bound, i)
                    h_left -= sub
                    cap = stability_limit(frame.curve.vertices, frame.curve.closed)
                if (i + 1) % record_every == 0 or i == n_steps - 1:
                    frames.append(frame)
                continue
        nxt = _advance(frame, h, scheme, n_vertices, spacing, boundary, kappa_floor, y_floor)
        if isinstance(nxt, FlowRun):
            return _finish(frames, nxt, dt, spacing, cap_bound, i)
        frame = nxt
        if (i + 1) % record_every == 0 or i == n_steps - 1:
            frames.append(frame)
    return FlowRun(frames, dt, spacing, FlowTermination.REACHED_T, steps=n_steps, cap_bound=cap_bound)


def _advance(frame, h, scheme, n_vertices, spacing, boundary, kappa_floor, y_floor):
    try:
        return step_icsf(frame, h, scheme=scheme, n_vertices=n_vertices, spacing=spacing,
                         boundary=boundary, kappa_floor=kappa_floor, y_floor=y_floor)
    except FlowTerminated as exc:
        return FlowRun([frame], h, spacing, exc.cause, str(exc))


def _finish(frames, stopped: FlowRun, dt, spacing, cap_bound, steps) -> FlowRun:
    if frames[-1] is not stopped.frames[0]:
        frames.append(stopped.frames[0])
    return FlowRun(frames, dt, spacing, stopped.termination, stopped.message, steps, cap_bound)


def fitted_circle_radius(curve: PolyCurve) -> float:
    """Hyperbolic radius of the least-squares circle through the vertices."""
    (_, cy), rho = fit_circle(curve.vertices)
    return hyperbolic_radius_of_circle(cy, rho)


def fitted_euclidean_radius(curve: PolyCurve) -> float:
    return fit_circle(curve.vertices)[1]


def normal_deviation(points: np.ndarray, normals: np.ndarray, reference: PolyCurve, window: int = 8) -> np.ndarray:
    """Distance from each point to ``reference`` measured along its normal line.

    Candidate segments come from a window around the nearest reference
    vertex; points whose normal line misses every candidate fall back to the
    plain point-to-polyline distance.
    """
    ref = reference.vertices
    m = len(ref)
    n_seg = m if reference.closed else m - 1
    _, near = cKDTree(ref).query(points)
    offs = np.arange(-window, window)
    seg = near[:, None] + offs[None, :]
    if reference.closed:
        seg %= m
    else:
        seg = np.clip(seg, 0, n_seg - 1)
    a = ref[seg]
    b = ref[(seg + 1) % m]
    d = b - a
    ap = a - points[:, None, :]
    nx, ny = normals[:, 0:1], normals[:, 1:2]
    det = -nx * d[..., 1] + ny * d[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (ap[..., 0] * -d[..., 1] - ap[..., 1] * -d[..., 0]) / det
        mu = (nx * ap[..., 1] - ny * ap[..., 0]) / det
    ok = (np.abs(det) > 1e-14) & (mu >= -1e-12) & (mu <= 1 + 1e-12)
    lam = np.where(ok, np.abs(lam), np.inf)
    best = lam.min(axis=1)

    miss = ~np.isfinite(best)
    if np.any(miss):
        best[miss] = _point_polyline_distance(points[miss], a[miss], d[miss])
    return best


def _point_polyline_distance(pts, a, d):
    ap = pts[:, None, :] - a
    dd = np.maximum((d * d).sum(-1), 1e-300)
    mu = np.clip((ap * d).sum(-1) / dd, 0.0, 1.0)
    q = a + mu[..., None] * d
    return np.hypot(*(pts[:, None, :] - q).transpose(2, 0, 1)).min(axis=1)


def _shift_for(kind: FieldKind, t: float) -> np.ndarray:
    if kind is FieldKind.PARABOLIC:
        return np.array([t, 0.0])
    if kind is FieldKind.CONFORMAL_VERTICAL:
        return np.array([0.0, t])
    raise ContractViolation(f"translation check needs Parabolic or ConformalVertical, got {kind.value}")


@dataclass(frozen=True)
class TranslationCheck:
    deviation: float
    run: FlowRun
    reference: PolyCurve


def verify_soliton_translation(curve: PolyCurve, field_kind: FieldKind | str, t_total: float, dt: float = 1e-4,
                               *, spacing: float | None = None, n_vertices: int | None = None,
                               scheme: str = "implicit", trim: int = 2) -> TranslationCheck:
    """Flow ``curve`` for ``t_total`` and compare with its translate along the field.

    Only the normal direction counts: each evolved vertex is measured along
    its own normal line against the translated initial curve.  Open curves
    have their endpoints driven by the field itself; ``trim`` vertices at
    each end are left out of the comparison.
    """
    kind = FieldKind(field_kind)
    shift = _shift_for(kind, t_total)
    field_ = PARABOLIC if kind is FieldKind.PARABOLIC else CONFORMAL_VERTICAL
    run = simulate(curve, t_total, dt, scheme=scheme, spacing=spacing, n_vertices=n_vertices,
                   boundary=None if curve.closed else field_)
    if run.termination is not FlowTermination.REACHED_T:
        raise FlowTerminated(f"flow stopped early: {run.message}", run.termination, run.final.t)
    reference = curve.translate(*shift)
    fin = run.final.curve
    loc = _local_geometry(fin.vertices, fin.closed)
    sl = slice(None) if fin.closed else slice(trim, len(fin.vertices) - trim)
    dev = normal_deviation(fin.vertices[sl], loc.normal[sl], reference)
    return TranslationCheck(float(dev.max()), run, reference)


def dump_frames(run: FlowRun, directory, stem: str = "frame") -> list[dict]:
    """Write one ``x,y,kappa_h`` CSV per frame and return the index entries."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for i, fr in enumerate(run.frames):
        name = f"{stem}_{i:05d}.csv"
        v = fr.curve.vertices
        rows = ["x,y,kappa_h"] + [f"{x:.17g},{y:.17g},{k:.17g}" for (x, y), k in zip(v, fr.kappa_h)]
        (out / name).write_text("\n".join(rows) + "\n")
        index.append({"t": fr.t, "file": name})
    return index


def radius_history(run: FlowRun) -> list[tuple[float, float]]:
    return [(fr.t, fitted_circle_radius(fr.curve)) for fr in run.frames]


def convergence_ratios(errors: Sequence[float]) -> list[float]:
    return [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
