"""Closed-form ICSF evolutions of constant-curvature curves.

All three families expand: hyperbolic circles centred at (0, 1), horocycles
tangent to y = 0 at the origin, and equidistant arcs sharing their ideal
endpoints.  ``curve_at`` returns counterclockwise samples, which is the
orientation with positive curvature.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DomainError
from .geometry import PolyCurve, discrete_geometry


class FlowKind(str, enum.Enum):
    HYPERBOLIC_CIRCLE = "HyperbolicCircle"
    HOROCYCLE = "Horocycle"
    EQUIDISTANT = "Equidistant"


@dataclass(frozen=True)
class ExactFlow:
    kind: FlowKind
    R: float
    c: float | None = None

    @property
    def a(self) -> float | None:
        """Euclidean radius of the limiting geodesic (equidistant family only)."""
        if self.kind is not FlowKind.EQUIDISTANT:
            return None
        return math.sqrt(self.R * self.R - self.c * self.c)

    @property
    def t_min(self) -> float:
        if self.kind is FlowKind.EQUIDISTANT:
            return math.log(self.a / self.R)
        return -math.inf

    def radius(self, t: float) -> float:
        if self.kind is FlowKind.HYPERBOLIC_CIRCLE:
            return math.asinh(math.sinh(self.R) * math.exp(t))
        return self.R * math.exp(t)

    def center_height(self, t: float) -> float:
        """Height of the Euclidean centre of the curve at time ``t``."""
        r = self.radius(t)
        if self.kind is FlowKind.HYPERBOLIC_CIRCLE:
            return math.cosh(r)
        if self.kind is FlowKind.HOROCYCLE:
            return r
        self._check_time(t)
        return math.sqrt(max(r * r - self.a * self.a, 0.0))

    def euclidean_radius(self, t: float) -> float:
        r = self.radius(t)
        return math.sinh(r) if self.kind is FlowKind.HYPERBOLIC_CIRCLE else r

    def curvature(self, t: float) -> float:
        """Hyperbolic curvature of every point of the curve at time ``t``."""
        r = self.radius(t)
        if self.kind is FlowKind.HYPERBOLIC_CIRCLE:
            return 1.0 / math.tanh(r)
        if self.kind is FlowKind.HOROCYCLE:
            return 1.0
        return self.center_height(t) / r

    def _check_time(self, t: float) -> None:
        if self.kind is FlowKind.EQUIDISTANT and not t > self.t_min:
            raise DomainError(f"equidistant flow is only defined for t > {self.t_min}")

    def angles(self, t: float, n: int) -> np.ndarray:
        """Parameter values of the ``n`` samples used by :meth:`curve_at`."""
        if n < 3:
            raise ContractViolation("need at least three samples")
        if self.kind is FlowKind.EQUIDISTANT:
            self._check_time(t)
            lo = -math.asin(self.center_height(t) / self.radius(t))
            hi = math.pi - lo
            return lo + (hi - lo) * (np.arange(n) + 0.5) / n
        # horocycles touch y = 0 at angle -pi/2; the half-step offset avoids it
        return -0.5 * math.pi + 2.0 * math.pi * (np.arange(n) + 0.5) / n

    def points(self, t: float, angles: np.ndarray) -> np.ndarray:
        # extended precision keeps the sample rounding at half an ulp, which
        # matters once three-point curvature divides by the squared spacing
        ld = np.longdouble
        r = self._radius_ld(ld(t))
        if self.kind is FlowKind.HYPERBOLIC_CIRCLE:
            rho, cy = np.sinh(r), np.cosh(r)
        elif self.kind is FlowKind.HOROCYCLE:
            rho, cy = r, r
        else:
            self._check_time(t)
            a = ld(self.a)
            rho, cy = r, np.sqrt(max(r * r - a * a, ld(0)))
        ang = np.asarray(angles, dtype=ld)
        return np.column_stack([(rho * np.cos(ang)).astype(float), (cy + rho * np.sin(ang)).astype(float)])

    def _radius_ld(self, t):
        ld = np.longdouble
        if self.kind is FlowKind.HYPERBOLIC_CIRCLE:
            return np.arcsinh(np.sinh(ld(self.R)) * np.exp(t))
        return ld(self.R) * np.exp(t)

    def curve_at(self, t: float, n_samples: int) -> PolyCurve:
        self._check_time(t)
        closed = self.kind is not FlowKind.EQUIDISTANT
        return PolyCurve(self.points(t, self.angles(t, n_samples)), closed=closed)


def make_exact_flow(kind: FlowKind | str, R: float, c: float | None = None) -> ExactFlow:
    kind = FlowKind(kind)
    if not R > 0:
        raise ContractViolation("R must be positive")
    if kind is FlowKind.EQUIDISTANT:
        if c is None or not 0 < c < R:
            raise ContractViolation(f"equidistant flow needs 0 < c < R, got c={c}, R={R}")
        return ExactFlow(kind, float(R), float(c))
    return ExactFlow(kind, float(R), None)


def default_time_step(t: float) -> float:
    return 1e-4 * max(1.0, abs(t))


def flow_residual(flow: ExactFlow, t: float, n_samples: int, dt: float | None = None) -> float:
    """max |⟨∂γ/∂t, N⟩ + 1/κ| over interior samples at time ``t``.

    The time derivative is a central difference at fixed curve parameter;
    only its normal component enters, so the moving parameter range of the
    equidistant family does not matter.
    """
    if n_samples < 16:
        raise ContractViolation("n_samples must be at least 16")
    flow._check_time(t)
    dt = default_time_step(t) if dt is None else dt
    if flow.kind is FlowKind.EQUIDISTANT and not t - dt > flow.t_min:
        raise DomainError("time step reaches below t_min")
    curve = flow.curve_at(t, n_samples)
    geo = discrete_geometry(curve)
    if flow.kind is FlowKind.EQUIDISTANT:
        fwd = flow.curve_at(t + dt, n_samples).vertices
        bwd = flow.curve_at(t - dt, n_samples).vertices
    else:
        ang = flow.angles(t, n_samples)
        fwd = flow.points(t + dt, ang)
        bwd = flow.points(t - dt, ang)
    vel = (fwd - bwd)[geo.index] / (2.0 * dt)
    normal_speed = (vel[:, 0] * geo.normal[:, 0] + vel[:, 1] * geo.normal[:, 1]) / geo.y ** 2
    return float(np.max(np.abs(normal_speed + 1.0 / geo.kappa_h)))


def flow_table(flow: ExactFlow, times) -> list[tuple[float, float, float]]:
    """Rows of (t, radius, curvature)."""
    return [(float(t), flow.radius(float(t)), flow.curvature(float(t))) for t in times]


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point samples."""
    from scipy.spatial import cKDTree

    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def geodesic_half_circle(radius: float, n: int) -> np.ndarray:
    ang = math.pi * (np.arange(n) + 0.5) / n
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
