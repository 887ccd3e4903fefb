"""Planar and spatial geometry of tangent-line families reflected off a circle.

A family of oriented lines L(s) is tangent to a conic C1 (a point or an
ellipse) and crosses a circle C. In the planar case C is the unit circle; in
the spatial case C is the intersection of the unit sphere with an affine
plane at distance ``h < 1`` from the origin, and all lines lie in that plane.
Each line enters C at the point B with the smaller inner product ``<B, v>``
and is reflected there: ``v+ = v - 2 <v, B> B``.

The question answered numerically is whether the pairs ``(v(s), v+(s))``
span the whole space they live in (R^4 in the plane, R^2 x R^3 = R^5 in
space), i.e. whether they avoid every hyperplane.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Tolerances, kernel
from .errors import EnvelopeMismatch, InvalidFamily, NoTransversalEntry

POINT, ELLIPSE = "point", "ellipse"
DEFAULT_SAMPLES = 64


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class ConicSpec:
    kind: str
    center: tuple[float, float]
    semi_axes: tuple[float, float] | None = None
    rotation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.kind == POINT:
            if self.semi_axes is not None:
                raise InvalidFamily("a point conic has no semi-axes")
        elif self.kind == ELLIPSE:
            if self.semi_axes is None:
                raise InvalidFamily("an ellipse needs semi-axes")
            a, b = (float(x) for x in self.semi_axes)
            if not a >= b > 0:
                raise InvalidFamily(f"semi-axes must satisfy a >= b > 0, got {(a, b)}")
            object.__setattr__(self, "semi_axes", (a, b))
        else:
            raise InvalidFamily(f"unknown conic kind {self.kind!r}")

    @property
    def c(self) -> np.ndarray:
        return np.array(self.center)

    def shape_matrix(self) -> np.ndarray:
        """M with the ellipse = {c + M^(1/2) w : |w| = 1}; zero for a point."""
        if self.kind == POINT:
            return np.zeros((2, 2))
        a, b = self.semi_axes
        r = _rot(self.rotation)
        return r @ np.diag([a * a, b * b]) @ r.T

    def common_tangents(self, radius: float = 1.0, grid: int = 8192) -> int:
        """Number of lines tangent to both this conic and the circle |x| = radius.

        A tangent of the circle is {x : <x, n> = radius}. It touches the conic
        when ``(radius - <c, n>)**2 = n^T M n``, the dual-conic equation; the
        roots in the normal angle are counted by sign changes.
        """
        c = self.c
        if self.kind == POINT:
            dist = np.linalg.norm(c)
            if np.isclose(dist, radius, rtol=0, atol=1e-12):
                return 1
            return 2 if dist > radius else 0
        theta = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        n = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        m = self.shape_matrix()
        g = (radius - n @ c) ** 2 - np.einsum("ki,ij,kj->k", n, m, n)
        return int(np.count_nonzero(np.sign(g) != np.sign(np.roll(g, -1))))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "center": list(self.center), "rotation": self.rotation}
        if self.semi_axes is not None:
            out["semi_axes"] = list(self.semi_axes)
        return out

    @classmethod
    def from_dict(cls, data) -> "ConicSpec":
        axes = data.get("semi_axes")
        return cls(data["kind"], tuple(data["center"]), None if axes is None else tuple(axes),
                   float(data.get("rotation", 0.0)))


@dataclass(frozen=True)
class Carrier:
    """Plane ``{h * normal + E y}`` cutting the unit sphere in a circle."""

    normal: tuple[float, float, float]
    h: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or np.linalg.norm(n) == 0:
            raise InvalidFamily("carrier normal must be a non-zero 3-vector")
        if not 0 < self.h < 1:
            raise InvalidFamily(f"carrier distance must lie in (0, 1), got {self.h}")
        object.__setattr__(self, "normal", tuple(n / np.linalg.norm(n)))

    @property
    def x0(self) -> np.ndarray:
        return self.h * np.array(self.normal)

    @property
    def basis(self) -> np.ndarray:
        """3 x 2 orthonormal basis of the plane's direction space."""
        n = np.array(self.normal)
        helper = np.eye(3)[np.argmin(np.abs(n))]
        e1 = np.cross(n, helper)
        e1 /= np.linalg.norm(e1)
        return np.column_stack([e1, np.cross(n, e1)])

    @property
    def radius(self) -> float:
        return float(np.sqrt(1 - self.h**2))

    def to_dict(self) -> dict:
        return {"normal": list(self.normal), "h": self.h}


@dataclass(frozen=True)
class OrientedLine:
    point: np.ndarray  # tangency point A(s), plane coordinates
    direction: np.ndarray  # unit direction v(s), plane coordinates


@dataclass(frozen=True)
class ReflectionSample:
    s: float
    v: np.ndarray  # ambient unit direction
    B: np.ndarray  # ambient entry point on the unit circle / sphere
    v_plus: np.ndarray

    def span_vector(self, carrier: Carrier | None) -> np.ndarray:
        v = self.v if carrier is None else carrier.basis.T @ self.v
        return np.concatenate([v, self.v_plus])


def tangent_line(conic: ConicSpec, s: float, orientation: int = 1) -> OrientedLine:
    """Line of the family at parameter ``s``.

    For a point the line passes through it with direction angle ``s``; for an
    ellipse it touches the boundary point with eccentric angle ``s``. In both
    cases the direction angle increases with ``s`` and ``orientation = -1``
    reverses the direction.
    """
    if conic.kind == POINT:
        v = np.array([np.cos(s), np.sin(s)])
        return OrientedLine(conic.c.copy(), orientation * v)
    a, b = conic.semi_axes
    r = _rot(conic.rotation)
    point = conic.c + r @ np.array([a * np.cos(s), b * np.sin(s)])
    t = r @ np.array([-a * np.sin(s), b * np.cos(s)])
    return OrientedLine(point, orientation * t / np.linalg.norm(t))


def entry_and_reflect(line: OrientedLine, carrier: Carrier | None = None, s: float = float("nan"),
                      eps: float = 1e-12) -> ReflectionSample:
    """Entry point of the line into C and the reflected direction."""
    radius = 1.0 if carrier is None else carrier.radius
    a, v = line.point, line.direction
    av = float(a @ v)
    disc = av * av - (float(a @ a) - radius * radius)
    if disc <= eps:
        raise NoTransversalEntry(f"line misses or grazes the circle (discriminant {disc:.3e})")
    t = -av - np.sqrt(disc)  # smaller root: smaller <B, v>
    y = a + t * v
    if carrier is None:
        b, v_amb = y, v
    else:
        e = carrier.basis
        b, v_amb = carrier.x0 + e @ y, e @ v
    b = b / np.linalg.norm(b)
    v_plus = v_amb - 2 * float(v_amb @ b) * b
    return ReflectionSample(float(s), v_amb, b, v_plus)


@dataclass(frozen=True)
class LineFamily:
    conic: ConicSpec
    orientation: int
    s_range: tuple[float, float]
    carrier: Carrier | None = None
    allow_inadmissible: bool = False

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise InvalidFamily(f"orientation must be +1 or -1, got {self.orientation}")
        lo, hi = (float(x) for x in self.s_range)
        if not lo < hi:
            raise InvalidFamily(f"empty parameter range {self.s_range}")
        object.__setattr__(self, "s_range", (lo, hi))
        if not self.allow_inadmissible and self.conic.common_tangents(self.radius) < 2:
            raise InvalidFamily("conic and circle have fewer than two common tangent lines")

    @property
    def radius(self) -> float:
        return 1.0 if self.carrier is None else self.carrier.radius

    @property
    def ambient_dimension(self) -> int:
        return 4 if self.carrier is None else 5

    def parameters(self, count: int) -> np.ndarray:
        return np.linspace(*self.s_range, count)

    def line(self, s: float) -> OrientedLine:
        return tangent_line(self.conic, s, self.orientation)

    def sample(self, count: int = DEFAULT_SAMPLES) -> list[ReflectionSample]:
        out = []
        for s in self.parameters(count):
            try:
                out.append(entry_and_reflect(self.line(s), self.carrier, s))
            except NoTransversalEntry as exc:
                raise InvalidFamily(f"line at s={s} does not cross the circle: {exc}") from exc
        return out

    def check(self, count: int = DEFAULT_SAMPLES) -> list[ReflectionSample]:
        """Sample and verify the family invariants (tangency, crossing, rotation)."""
        samples = self.sample(count)
        residual = max(_tangency_residual(self.conic, self.line(s)) for s in self.parameters(count))
        if residual > 1e-10:
            raise InvalidFamily(f"tangency residual {residual:.3e}")
        angles = np.unwrap([np.arctan2(*self.line(s).direction[::-1]) for s in self.parameters(count)])
        if np.any(np.diff(angles) <= 0):
            raise InvalidFamily("direction angle is not strictly increasing")
        return samples

    def to_dict(self) -> dict:
        return {
            "conic": self.conic.to_dict(),
            "orientation": self.orientation,
            "s_range": list(self.s_range),
            "carrier": None if self.carrier is None else self.carrier.to_dict(),
        }

    @classmethod
    def from_dict(cls, data, allow_inadmissible: bool = False) -> "LineFamily":
        carrier = data.get("carrier")
        return cls(ConicSpec.from_dict(data["conic"]), int(data.get("orientation", 1)),
                   tuple(data["s_range"]),
                   None if carrier is None else Carrier(tuple(carrier["normal"]), float(carrier["h"])),
                   allow_inadmissible)


def _tangency_residual(conic: ConicSpec, line: OrientedLine) -> float:
    if conic.kind == POINT:
        d = conic.c - line.point
        return float(abs(d[0] * line.direction[1] - d[1] * line.direction[0]))
    a, b = conic.semi_axes
    to_unit = np.diag([1 / a, 1 / b]) @ _rot(conic.rotation).T
    w = to_unit @ (line.point - conic.c)
    u = to_unit @ line.direction
    return float(max(abs(w @ w - 1), abs(w @ u) / np.linalg.norm(u)))


def span_test(family: LineFamily, samples: int = DEFAULT_SAMPLES, tol: Tolerances | None = None):
    """Dimension of the span of the vectors (v(s), v+(s)) and its smallest retained singular value."""
    if samples < 4 * family.ambient_dimension:
        raise ValueError(f"need at least {4 * family.ambient_dimension} samples, got {samples}")
    rows = np.array([r.span_vector(family.carrier) for r in family.check(samples)])
    k = kernel(rows, tol or Tolerances())
    return rows.shape[1] - k.dimension, k.sigma_min_nonkernel


@dataclass(frozen=True)
class EnvelopeReport:
    case: str  # "A" (common point) or "B" (ellipse tangency)
    max_residual: float
    samples: int

    def to_dict(self) -> dict:
        return {"case": self.case, "max_residual": self.max_residual, "samples": self.samples}


def envelope_check(family: LineFamily, samples: int = DEFAULT_SAMPLES, tol: float = 1e-10) -> EnvelopeReport:
    """Verify that the lines pass through one point (case A) or all touch the ellipse (case B)."""
    res = max(_tangency_residual(family.conic, family.line(s)) for s in family.parameters(samples))
    if not res < tol:
        raise EnvelopeMismatch(f"envelope residual {res:.3e} exceeds {tol:.1e}")
    return EnvelopeReport("A" if family.conic.kind == POINT else "B", res, samples)


def _crossing_interval(conic, orientation, radius, margin=0.05, grid=2048):
    """Longest parameter interval on which the tangent line crosses the circle with room to spare."""
    s = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    if conic.kind == POINT:
        p = np.broadcast_to(conic.c, (grid, 2))
        v = np.stack([np.cos(s), np.sin(s)], axis=1)
    else:
        a, b = conic.semi_axes
        r = _rot(conic.rotation)
        p = conic.c + np.stack([a * np.cos(s), b * np.sin(s)], axis=1) @ r.T
        v = np.stack([-a * np.sin(s), b * np.cos(s)], axis=1) @ r.T
        v /= np.linalg.norm(v, axis=1)[:, None]
    ok = np.abs(p[:, 0] * v[:, 1] - p[:, 1] * v[:, 0]) < (1 - margin) * radius
    if ok.all() or not ok.any():
        return None
    # rotate so the scan starts at a bad point, then find the longest good run
    shift = int(np.argmin(ok))
    rolled = np.concatenate([np.roll(ok, -shift), [False]]).astype(int)
    edges = np.diff(np.concatenate([[0], rolled]))
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    k = int(np.argmax(stops - starts))
    if stops[k] - starts[k] < 8:
        return None
    lo = s[(starts[k] + shift) % grid]
    hi = lo + (stops[k] - 1 - starts[k]) * (2 * np.pi / grid)
    return float(lo), float(hi)


def random_family(rng, kind: str = POINT, spatial: bool = False) -> LineFamily:
    """Random admissible family: C1 outside C with a crossing parameter interval."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    while True:
        carrier = None
        radius = 1.0
        if spatial:
            normal = rng.standard_normal(3)
            carrier = Carrier(tuple(normal / np.linalg.norm(normal)), float(rng.uniform(0.2, 0.8)))
            radius = carrier.radius
        angle = rng.uniform(0, 2 * np.pi)
        dist = radius * rng.uniform(1.3, 3.0)
        center = (dist * np.cos(angle), dist * np.sin(angle))
        if kind == POINT:
            conic = ConicSpec(POINT, center)
        else:
            a = radius * rng.uniform(0.2, 0.8)
            b = a * rng.uniform(0.2, 1.0)
            conic = ConicSpec(ELLIPSE, (center[0] * 1.5, center[1] * 1.5), (a, b), rng.uniform(0, np.pi))
        orientation = int(rng.choice([-1, 1]))
        if conic.common_tangents(radius) < 2:
            continue
        interval = _crossing_interval(conic, orientation, radius)
        if interval is None:
            continue
        return LineFamily(conic, orientation, interval, carrier)


def concentric_family() -> LineFamily:
    """Pencil of lines through the centre of C: every line reflects straight back."""
    return LineFamily(ConicSpec(POINT, (0.0, 0.0)), 1, (0.1, 2.0), None, allow_inadmissible=True)


__all__ = [
    "POINT",
    "ELLIPSE",
    "ConicSpec",
    "Carrier",
    "OrientedLine",
    "ReflectionSample",
    "LineFamily",
    "EnvelopeReport",
    "tangent_line",
    "entry_and_reflect",
    "span_test",
    "envelope_check",
    "random_family",
    "concentric_family",
]
