"""Upper half-plane primitives: metric, discrete curvature, fields, isometries.

Curves are stored as Euclidean vertex arrays.  The canonical orientation has
unit tangent ``(cos θ, sin θ)`` and hyperbolic unit normal
``N = y·(-sin θ, cos θ)``; with this choice the hyperbolic curvature is
``κ = y·κ_e + cos θ`` where ``κ_e`` is the signed Euclidean curvature.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ContractViolation, DomainError, SingularCurvatureError

Y_FLOOR = 1e-12
DEFAULT_CLASSIFY_TOL = 1e-6
KAPPA_ZERO = 1e-14


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (self.y > 0.0):
            raise DomainError(f"point ({self.x}, {self.y}) is not in the upper half-plane")

    def as_complex(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class TangentVector:
    base: HPoint
    dx: float
    dy: float

    def norm2(self) -> float:
        """Hyperbolic squared length."""
        return (self.dx * self.dx + self.dy * self.dy) / (self.base.y * self.base.y)


def hyperbolic_inner(u: TangentVector, v: TangentVector) -> float:
    if u.base != v.base:
        raise ContractViolation(f"tangent vectors live at different points: {u.base} vs {v.base}")
    y = u.base.y
    return (u.dx * v.dx + u.dy * v.dy) / (y * y)


def hyperbolic_distance(p: HPoint, q: HPoint) -> float:
    d2 = (p.x - q.x) ** 2 + (p.y - q.y) ** 2
    return math.acosh(1.0 + d2 / (2.0 * p.y * q.y))


class FieldKind(str, enum.Enum):
    PARABOLIC = "Parabolic"
    HYPERBOLIC_TRANSLATION = "HyperbolicTranslation"
    ROTATION = "Rotation"
    CONFORMAL_VERTICAL = "ConformalVertical"


def _field_components(kind: FieldKind, x, y):
    if kind is FieldKind.PARABOLIC:
        return np.ones_like(x), np.zeros_like(y)
    if kind is FieldKind.HYPERBOLIC_TRANSLATION:
        return x, y
    if kind is FieldKind.ROTATION:
        return y * y - x * x, 2.0 * x * y
    return np.zeros_like(x), np.ones_like(y)


@dataclass(frozen=True)
class KillingField:
    """One of the Killing fields X1, X2, X3 or the conformal field ∂_y.

    The name is kept for all four kinds even though ∂_y is only conformal.
    """

    kind: FieldKind

    def __call__(self, p: HPoint) -> TangentVector:
        dx, dy = _field_components(self.kind, np.float64(p.x), np.float64(p.y))
        return TangentVector(p, float(dx), float(dy))

    def components(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized Euclidean components at arrays of points."""
        return _field_components(self.kind, np.asarray(x, float), np.asarray(y, float))


PARABOLIC = KillingField(FieldKind.PARABOLIC)
HYPERBOLIC_TRANSLATION = KillingField(FieldKind.HYPERBOLIC_TRANSLATION)
ROTATION = KillingField(FieldKind.ROTATION)
CONFORMAL_VERTICAL = KillingField(FieldKind.CONFORMAL_VERTICAL)


class PolyCurve:
    """Immutable sampled curve in the upper half-plane.

    ``vertices`` is an ``(n, 2)`` array.  A closed curve stores each vertex
    once; the segment from the last vertex back to the first is implied.
    """

    __slots__ = ("_v", "closed")

    def __init__(self, vertices, closed: bool = False, y_floor: float = Y_FLOOR):
        v = np.array(vertices, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ContractViolation(f"vertices must have shape (n, 2), got {v.shape}")
        if len(v) < 2:
            raise ContractViolation("a curve needs at least two vertices")
        if not np.all(np.isfinite(v)):
            raise ContractViolation("vertices must be finite")
        if np.any(v[:, 1] < y_floor):
            i = int(np.argmin(v[:, 1]))
            raise DomainError(f"vertex {i} has y = {v[i, 1]!r} below the floor {y_floor}")
        if closed and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        seg = np.diff(np.vstack([v, v[:1]]) if closed else v, axis=0)
        if np.any(np.all(seg == 0.0, axis=1)):
            raise ContractViolation("consecutive vertices must be distinct")
        v.setflags(write=False)
        self._v = v
        self.closed = bool(closed)

    @property
    def vertices(self) -> np.ndarray:
        return self._v

    @property
    def x(self) -> np.ndarray:
        return self._v[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self._v[:, 1]

    def __len__(self) -> int:
        return len(self._v)

    def __repr__(self) -> str:
        return f"PolyCurve(n={len(self)}, closed={self.closed})"

    def reverse(self) -> "PolyCurve":
        return PolyCurve(self._v[::-1], self.closed)

    def translate(self, dx: float = 0.0, dy: float = 0.0) -> "PolyCurve":
        return PolyCurve(self._v + np.array([dx, dy]), self.closed)

    def segment_lengths(self) -> np.ndarray:
        v = np.vstack([self._v, self._v[:1]]) if self.closed else self._v
        return np.hypot(*np.diff(v, axis=0).T)

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def interior_indices(self) -> np.ndarray:
        """Indices of vertices that have two neighbours."""
        n = len(self)
        return np.arange(n) if self.closed else np.arange(1, n - 1)

    # serialization -----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y\n")
        for x, y in self._v:
            buf.write(f"{x:.17g},{y:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, closed: bool = False) -> "PolyCurve":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
            raise ContractViolation("CSV curve must start with the header 'x,y'")
        return cls([[float(a), float(b)] for a, b in rows[1:] if a.strip()], closed)

    def to_json(self) -> str:
        return json.dumps({"closed": self.closed, "vertices": self._v.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "PolyCurve":
        data = json.loads(text)
        return cls(data["vertices"], bool(data["closed"]))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_json() if path.suffix == ".json" else self.to_csv())


@dataclass(frozen=True)
class CurvatureSample:
    kappa_e: float
    kappa_h: float
    normal: TangentVector
    theta: float


@dataclass(frozen=True)
class DiscreteGeometry:
    """Vectorized curvature data at the vertices listed in ``index``."""

    index: np.ndarray
    x: np.ndarray
    y: np.ndarray
    kappa_e: np.ndarray
    kappa_h: np.ndarray
    theta: np.ndarray
    normal: np.ndarray  # (m, 2) Euclidean components of y·(-sin θ, cos θ)


def _neighbours(curve: PolyCurve):
    v = curve.vertices
    idx = curve.interior_indices()
    if curve.closed:
        prev, nxt = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
        return idx, prev, v, nxt
    return idx, v[:-2], v[1:-1], v[2:]


def menger_curvature(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Signed curvature of the circle through three points (positive for left turns)."""
    ab = b - a
    bc = c - b
    ac = c - a
    cross = ab[..., 0] * bc[..., 1] - ab[..., 1] * bc[..., 0]
    denom = np.hypot(*ab.T) * np.hypot(*bc.T) * np.hypot(*ac.T)
    return 2.0 * cross / denom


def discrete_geometry(curve: PolyCurve) -> DiscreteGeometry:
    if len(curve) < 3:
        raise ContractViolation("curvature needs at least three vertices")
    idx, a, b, c = _neighbours(curve)
    if np.any(np.all(a == b, axis=1)) or np.any(np.all(b == c, axis=1)):
        raise ContractViolation("zero-length segment")
    kappa_e = menger_curvature(a, b, c)
    tangent = c - a
    theta = np.arctan2(tangent[:, 1], tangent[:, 0])
    y = b[:, 1]
    kappa_h = y * kappa_e + np.cos(theta)
    normal = np.column_stack([-y * np.sin(theta), y * np.cos(theta)])
    return DiscreteGeometry(idx, b[:, 0].copy(), y.copy(), kappa_e, kappa_h, theta, normal)


def curvature_at(curve: PolyCurve, index: int) -> CurvatureSample:
    n = len(curve)
    if curve.closed:
        index %= n
    elif not 0 < index < n - 1:
        raise ContractViolation(f"vertex {index} of an open curve has no two neighbours")
    v = curve.vertices
    a, b, c = v[(index - 1) % n], v[index], v[(index + 1) % n]
    if np.array_equal(a, b) or np.array_equal(b, c):
        raise ContractViolation("zero-length segment")
    k_e = float(menger_curvature(a[None], b[None], c[None])[0])
    theta = math.atan2(c[1] - a[1], c[0] - a[0])
    y = float(b[1])
    base = HPoint(float(b[0]), y)
    normal = TangentVector(base, -y * math.sin(theta), y * math.cos(theta))
    return CurvatureSample(k_e, y * k_e + math.cos(theta), normal, theta)


class CurveLabel(str, enum.Enum):
    GEODESIC = "Geodesic"
    EQUIDISTANT = "Equidistant"
    HOROCYCLE = "Horocycle"
    HYPERBOLIC_CIRCLE = "HyperbolicCircle"
    NON_CONSTANT = "NonConstant"


@dataclass(frozen=True)
class CurveClass:
    label: CurveLabel
    kappa: float | None = None


def label_for_curvature(kappa: float, tol: float = DEFAULT_CLASSIFY_TOL) -> CurveLabel:
    k = abs(kappa)
    if k <= tol:
        return CurveLabel.GEODESIC
    if abs(k - 1.0) <= tol:
        return CurveLabel.HOROCYCLE
    return CurveLabel.EQUIDISTANT if k < 1.0 else CurveLabel.HYPERBOLIC_CIRCLE


def classify_constant_curvature(curve: PolyCurve, tol: float = DEFAULT_CLASSIFY_TOL) -> CurveClass:
    """Catalogue class of a curve whose sampled κ is constant to ``tol``.

    The spread test is relative: ``max κ - min κ <= tol * max(1, |mean κ|)``.
    """
    if len(curve) < 4:
        raise ContractViolation("classification needs at least four vertices")
    k = discrete_geometry(curve).kappa_h
    mean = float(np.mean(k))
    if float(k.max() - k.min()) > tol * max(1.0, abs(mean)):
        return CurveClass(CurveLabel.NON_CONSTANT, None)
    return CurveClass(label_for_curvature(mean, tol), mean)


class IsometryKind(str, enum.Enum):
    P = "P"
    H = "H"
    R = "R"


def apply_isometry(kind: IsometryKind | str, t: float, p: HPoint) -> HPoint:
    kind = IsometryKind(kind)
    if kind is IsometryKind.P:
        return HPoint(p.x + t, p.y)
    if kind is IsometryKind.H:
        s = math.exp(t)
        return HPoint(s * p.x, s * p.y)
    z = p.as_complex()
    den = math.sin(t) * z + math.cos(t)
    if den == 0:
        raise DomainError(f"rotation by {t} has a pole at {p}")
    w = (math.cos(t) * z - math.sin(t)) / den
    return HPoint(w.real, w.imag)


def transform_curve(curve: PolyCurve, fn: Callable[[HPoint], HPoint]) -> PolyCurve:
    pts = [fn(HPoint(float(x), float(y))) for x, y in curve.vertices]
    return PolyCurve([[q.x, q.y] for q in pts], curve.closed)


def field_inner_normal(geo: DiscreteGeometry, field: KillingField) -> np.ndarray:
    """⟨N, X⟩ in the hyperbolic metric at each sampled vertex."""
    fx, fy = field.components(geo.x, geo.y)
    return (geo.normal[:, 0] * fx + geo.normal[:, 1] * fy) / (geo.y * geo.y)


def soliton_residual(curve: PolyCurve, field: KillingField) -> float:
    """max over interior vertices of |1/κ + ⟨N, X⟩|."""
    geo = discrete_geometry(curve)
    if np.any(np.abs(geo.kappa_h) < KAPPA_ZERO):
        i = int(geo.index[np.argmin(np.abs(geo.kappa_h))])
        raise SingularCurvatureError(f"hyperbolic curvature vanishes at vertex {i}")
    return float(np.max(np.abs(1.0 / geo.kappa_h + field_inner_normal(geo, field))))


def circle_points(center: tuple[float, float], radius: float, n: int, phase: float = 0.0) -> np.ndarray:
    """``n`` counterclockwise samples of a Euclidean circle."""
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])


def fit_circle(points: np.ndarray) -> tuple[tuple[float, float], float]:
    """Algebraic least-squares circle fit; returns ((cx, cy), radius)."""
    x, y = np.asarray(points, float).T
    xm, ym = x.mean(), y.mean()
    u, v = x - xm, y - ym
    a = np.column_stack([u, v, np.ones_like(u)])
    sol, *_ = np.linalg.lstsq(a, u * u + v * v, rcond=None)
    cu, cv = sol[0] / 2.0, sol[1] / 2.0
    r = math.sqrt(sol[2] + cu * cu + cv * cv)
    return (float(cu + xm), float(cv + ym)), float(r)


def hyperbolic_radius_of_circle(center_y: float, euclid_radius: float) -> float:
    """Hyperbolic radius of a Euclidean circle lying inside the half-plane."""
    if not 0 < euclid_radius < center_y:
        raise DomainError("circle is not contained in the upper half-plane")
    return math.atanh(euclid_radius / center_y)
