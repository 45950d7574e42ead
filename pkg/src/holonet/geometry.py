"""Domain geometry: curves, holes, boundary conditions, and sampling.

Boundaries are chains of segments and circular arcs. Outward normals come
from the parameterization: for a counter-clockwise outer loop the material
lies left of travel, so the outward normal is the tangent rotated by -90
degrees; hole loops set `normal_left` so the normal points out of the
material (into the hole).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GeometryError

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Segment:
    a: complex
    b: complex
    normal_left: bool = False

    def __post_init__(self):
        if abs(self.b - self.a) <= 0:
            raise GeometryError("segment has zero length")

    @property
    def length(self):
        return abs(self.b - self.a)

    def point(self, t):
        return self.a + (self.b - self.a) * np.asarray(t)

    def tangent(self, t):
        u = (self.b - self.a) / abs(self.b - self.a)
        return np.broadcast_to(u, np.shape(t)) if np.ndim(t) else u

    def normal(self, t):
        rot = 1j if self.normal_left else -1j
        return rot * self.tangent(t)

    def start(self):
        return self.a

    def end(self):
        return self.b

    def bbox(self):
        xs = (self.a.real, self.b.real)
        ys = (self.a.imag, self.b.imag)
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    theta0: float
    theta1: float
    normal_left: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("arc radius must be positive")
        if self.theta1 == self.theta0:
            raise GeometryError("arc has zero length")

    @property
    def length(self):
        return abs(self.theta1 - self.theta0) * self.radius

    def _theta(self, t):
        return self.theta0 + (self.theta1 - self.theta0) * np.asarray(t)

    def point(self, t):
        return self.center + self.radius * np.exp(1j * self._theta(t))

    def tangent(self, t):
        sgn = 1.0 if self.theta1 > self.theta0 else -1.0
        return sgn * 1j * np.exp(1j * self._theta(t))

    def normal(self, t):
        rot = 1j if self.normal_left else -1j
        return rot * self.tangent(t)

    def start(self):
        return self.point(0.0)

    def end(self):
        return self.point(1.0)

    def bbox(self):
        ts = [0.0, 1.0]
        # include axis-aligned extremes the arc passes through
        lo, hi = sorted((self.theta0, self.theta1))
        k0 = np.ceil(lo / (np.pi / 2))
        k = k0
        while k * np.pi / 2 <= hi:
            ts.append((k * np.pi / 2 - self.theta0) / (self.theta1 - self.theta0))
            k += 1
        pts = self.point(np.array(sorted(set(np.clip(ts, 0, 1)))))
        return pts.real.min(), pts.imag.min(), pts.real.max(), pts.imag.max()


Curve = Segment | Arc


@dataclass(frozen=True)
class Hole:
    curves: tuple
    center: complex

    def __init__(self, curves, center):
        object.__setattr__(self, "curves", tuple(curves))
        object.__setattr__(self, "center", complex(center))


class Domain:
    """Closed outer loop plus zero or more holes with declared centers."""

    def __init__(self, outer, holes=()):
        self.outer = tuple(outer)
        self.holes = tuple(h if isinstance(h, Hole) else Hole(*h) for h in holes)
        _check_closed(self.outer, "outer boundary")
        for i, h in enumerate(self.holes):
            _check_closed(h.curves, f"hole {i}")
            if not _even_odd(np.array([h.center]), h.curves, self._jitter(h.curves))[0]:
                raise GeometryError(f"hole {i} center is not inside the hole")
        self._curves = list(self.outer) + [c for h in self.holes for c in h.curves]
        self._lengths = np.array([c.length for c in self._curves])
        self._cum = np.concatenate([[0.0], np.cumsum(self._lengths)])

    @staticmethod
    def _jitter(curves):
        x0, y0, x1, y1 = _curves_bbox(curves)
        return 1e-9 * max(x1 - x0, y1 - y0, 1.0)

    @property
    def n_holes(self):
        return len(self.holes)

    @property
    def curves(self):
        return self._curves

    @property
    def perimeter(self):
        return float(self._cum[-1])

    def bbox(self):
        return _curves_bbox(self._curves)

    def contains(self, pts):
        """Even-odd membership test; points within ~1e-9 of the boundary
        may land on either side."""
        pts = np.atleast_1d(np.asarray(pts, dtype=complex))
        return _even_odd(pts, self._curves, self._jitter(self._curves))

    def distance_to_boundary(self, pts):
        pts = np.atleast_1d(np.asarray(pts, dtype=complex))
        d = np.full(pts.shape, np.inf)
        for c in self._curves:
            d = np.minimum(d, _distance_to_curve(pts, c))
        return d

    def hole_clearance(self, s, n_probe=512):
        """Distance from hole s's declared center to that hole's boundary."""
        h = self.holes[s]
        t = np.linspace(0.0, 1.0, n_probe)
        d = np.inf
        for c in h.curves:
            d = min(d, float(np.min(np.abs(c.point(t) - h.center))))
        return d

    def sample_interior(self, n, rng):
        """Uniform points inside the domain by rejection from the bbox."""
        x0, y0, x1, y1 = self.bbox()
        out = np.empty(n, dtype=complex)
        have = 0
        while have < n:
            m = max(int(1.5 * (n - have)) + 16, 32)
            cand = (
                rng.uniform(x0, x1, m) + 1j * rng.uniform(y0, y1, m)
            )
            good = cand[self.contains(cand)]
            take = min(len(good), n - have)
            out[have : have + take] = good[:take]
            have += take
        return out


def _check_closed(curves, label, tol=1e-9):
    if not curves:
        raise GeometryError(f"{label} has no curves")
    for i, c in enumerate(curves):
        nxt = curves[(i + 1) % len(curves)]
        if abs(c.end() - nxt.start()) > tol:
            raise GeometryError(
                f"{label} is not closed at curve {i} "
                f"(gap {abs(c.end() - nxt.start()):.2e})"
            )


def _curves_bbox(curves):
    boxes = [c.bbox() for c in curves]
    return (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def _even_odd(pts, curves, jitter):
    """Crossing-number test with a tiny y jitter to dodge vertex/tangency ties."""
    px = pts.real
    py = pts.imag + jitter
    crossings = np.zeros(pts.shape, dtype=np.int64)
    for c in curves:
        if isinstance(c, Segment):
            ay, by = c.a.imag, c.b.imag
            ax, bx = c.a.real, c.b.real
            straddles = (ay > py) != (by > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = ax + (py - ay) * (bx - ax) / (by - ay)
            crossings += (straddles & (xi > px)).astype(np.int64)
        else:
            dy = py - c.center.imag
            inside_band = np.abs(dy) < c.radius
            if not inside_band.any():
                continue
            xoff = np.sqrt(np.maximum(c.radius**2 - dy**2, 0.0))
            lo, hi = sorted((c.theta0, c.theta1))
            span = hi - lo
            for sgn in (1.0, -1.0):
                xi = c.center.real + sgn * xoff
                ang = np.arctan2(dy, sgn * xoff)
                rel = np.mod(ang - lo, _TWO_PI)
                on_arc = (rel <= span) | (rel >= _TWO_PI - 1e-15)
                if span >= _TWO_PI - 1e-12:
                    on_arc = np.ones_like(on_arc)
                crossings += (inside_band & on_arc & (xi > px)).astype(np.int64)
    return (crossings % 2) == 1


def _distance_to_curve(pts, c):
    if isinstance(c, Segment):
        ab = c.b - c.a
        t = np.clip(((pts - c.a) * np.conj(ab)).real / abs(ab) ** 2, 0.0, 1.0)
        return np.abs(pts - (c.a + t * ab))
    rel = pts - c.center
    ang = np.angle(rel)
    lo, hi = sorted((c.theta0, c.theta1))
    span = hi - lo
    rel_ang = np.mod(ang - lo, _TWO_PI)
    on_arc = (rel_ang <= span) | (span >= _TWO_PI - 1e-12)
    d_radial = np.abs(np.abs(rel) - c.radius)
    d_ends = np.minimum(np.abs(pts - c.start()), np.abs(pts - c.end()))
    return np.where(on_arc, d_radial, d_ends)


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------

_SCALAR_KINDS = ("dirichlet", "neumann")
_VECTOR_KINDS = ("displacement", "traction")


@dataclass
class BoundaryCondition:
    """Per-curve condition. Scalar g returns a real array; vector g returns
    gx + i gy packed into one complex array."""

    kind: str
    g: Callable[[np.ndarray], np.ndarray]
    weights: tuple = (1.0,)

    def __post_init__(self):
        if self.kind not in _SCALAR_KINDS + _VECTOR_KINDS:
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")
        want = self.dim
        if len(self.weights) != want:
            raise ValueError(
                f"{self.kind} needs {want} weight(s), got {len(self.weights)}"
            )
        if any(w <= 0 for w in self.weights):
            raise ValueError("boundary-condition weights must be positive")

    @property
    def dim(self):
        return 1 if self.kind in _SCALAR_KINDS else 2


def dirichlet(g, weight=1.0):
    return BoundaryCondition("dirichlet", _as_fn(g), (weight,))


def neumann(g, weight=1.0):
    return BoundaryCondition("neumann", _as_fn(g), (weight,))


def displacement(g, weight_x=1.0, weight_y=1.0):
    return BoundaryCondition("displacement", _as_fn(g), (weight_x, weight_y))


def traction(g, weight_x=1.0, weight_y=1.0):
    return BoundaryCondition("traction", _as_fn(g), (weight_x, weight_y))


def _as_fn(g):
    if callable(g):
        return g
    value = complex(g)
    return lambda z: np.full(np.shape(z), value)


# ---------------------------------------------------------------------------
# Boundary sampling
# ---------------------------------------------------------------------------


class SampleBatch:
    """Struct-of-arrays batch of boundary samples."""

    __slots__ = ("z", "normal", "curve_id")

    def __init__(self, z, normal, curve_id):
        self.z = np.asarray(z, dtype=complex)
        self.normal = np.asarray(normal, dtype=complex)
        self.curve_id = np.asarray(curve_id, dtype=np.int64)

    def __len__(self):
        return len(self.z)

    def take(self, idx):
        return SampleBatch(self.z[idx], self.normal[idx], self.curve_id[idx])

    def concat(self, other):
        return SampleBatch(
            np.concatenate([self.z, other.z]),
            np.concatenate([self.normal, other.normal]),
            np.concatenate([self.curve_id, other.curve_id]),
        )


def _samples_at_arclength(domain, s):
    """Samples at arclength positions s in [0, perimeter)."""
    cum = domain._cum
    lengths = domain._lengths
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lengths) - 1)
    t = (s - cum[idx]) / lengths[idx]
    t = np.clip(t, 1e-9, 1.0 - 1e-9)  # keep off exact corners
    z = np.empty(len(s), dtype=complex)
    nrm = np.empty(len(s), dtype=complex)
    for ci in np.unique(idx):
        c = domain.curves[ci]
        m = idx == ci
        z[m] = c.point(t[m])
        n = c.normal(t[m])
        nrm[m] = n / np.abs(n)
    return SampleBatch(z, nrm, idx)


def sample_uniform(domain, n, rng=None):
    """n boundary points with density proportional to arclength.

    With rng=None falls back to deterministic stratified positions.
    """
    if n < 1:
        raise GeometryError("need at least one boundary sample")
    L = domain.perimeter
    if rng is None:
        s = (np.arange(n) + 0.5) / n * L
    else:
        s = rng.random(n) * L
    return _samples_at_arclength(domain, s)


def build_pool(domain, m):
    """m arclength-stratified boundary points (deterministic)."""
    if m < 1:
        raise GeometryError("pool size must be at least 1")
    return sample_uniform(domain, m, rng=None)


def rad_resample(pool, eps, n, k=1.0, c=1.0, rng=None):
    """Residual-based adaptive resampling from a fine boundary pool.

    eps has shape (D, m) with one row per boundary-condition dimension (a
    single row may be passed as shape (m,)). Each dimension independently
    draws ~n/D points with replacement with probability proportional to
    eps**k / mean(eps**k) + c.
    """
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    D, m = eps.shape
    if m != len(pool):
        raise ValueError("residual array does not match the pool size")
    if np.any(eps < 0):
        raise ValueError("residuals must be non-negative")
    if rng is None:
        rng = np.random.default_rng()
    counts = [n // D] * D
    for i in range(n - sum(counts)):
        counts[i] += 1
    picked = []
    for d in range(D):
        p = eps[d] ** k
        mean = p.mean()
        if mean == 0.0:
            if c == 0.0:
                raise ValueError(
                    "all residuals are zero and c=0: degenerate distribution"
                )
            p = np.full(m, c)
        else:
            p = p / mean + c
        p = p / p.sum()
        idx = rng.choice(m, size=counts[d], replace=True, p=p)
        picked.append(idx)
    return pool.take(np.concatenate(picked))


# ---------------------------------------------------------------------------
# Shape helpers
# ---------------------------------------------------------------------------


def polygon(vertices, hole=False):
    """Closed polygon from CCW-ordered vertices (complex or (x, y) pairs)."""
    vs = [complex(*v) if not isinstance(v, complex) else v for v in vertices]
    if len(vs) < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    area2 = sum(
        (vs[i].real * vs[(i + 1) % len(vs)].imag - vs[(i + 1) % len(vs)].real * vs[i].imag)
        for i in range(len(vs))
    )
    if area2 <= 0:
        raise GeometryError("polygon vertices must be ordered counter-clockwise")
    return [
        Segment(vs[i], vs[(i + 1) % len(vs)], normal_left=hole)
        for i in range(len(vs))
    ]


def circle(center, radius, hole=False):
    """Full circle as one CCW arc."""
    return [Arc(complex(center), radius, 0.0, _TWO_PI, normal_left=hole)]


def rectangle(x0, y0, x1, y1):
    """CCW rectangle; curve order: bottom, right, top, left."""
    return polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
