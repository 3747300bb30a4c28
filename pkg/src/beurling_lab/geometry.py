"""Planar domains, dyadic structures and Whitney decompositions.

Domains come in four flavours: the half plane and the disk (handled
analytically), the region above a sampled compactly supported Lipschitz
graph, and the interior of a closed simple polygon.  Every domain exposes the
same small surface used elsewhere in the package: membership, distance to the
boundary, square containment tests for the Whitney builder, an arc-length
parameterization of the boundary, and the boundary as a polyline (possibly
with two horizontal rays for graphs).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

# Whitney admissibility: Q is admissible when (2*WHITNEY_GAP + 1) Q lies in the
# domain.  With gap 7 maximal admissible squares satisfy 5Q in the domain,
# 31Q meets the complement and 5Q-neighbours have side ratio in [1/2, 2].
WHITNEY_GAP = 7
WHITNEY_R = 4 * WHITNEY_GAP + 3
PHI_MULTIPLICITY_C2 = 64

_CHUNK = 1 << 21


class GeometryError(ValueError):
    """Invalid or degenerate geometric input."""


# ---------------------------------------------------------------------------
# sampled functions and Lipschitz graphs


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Real function known on a uniform grid, linear between samples.

    Outside the sampled range the function is zero when ``zero_extended``;
    otherwise evaluating there raises.
    """

    origin: float
    step: float
    values: np.ndarray
    zero_extended: bool = True

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise GeometryError("need at least 2 samples")
        if not self.step > 0:
            raise GeometryError("grid step must be positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, func, lo: float, hi: float, step: float,
                      zero_extended: bool = True) -> "SampledFunction":
        n = int(round((hi - lo) / step)) + 1
        x = lo + step * np.arange(n)
        return cls(lo, step, np.asarray(func(x), dtype=float), zero_extended)

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.values.size)

    @property
    def lo(self) -> float:
        return self.origin

    @property
    def hi(self) -> float:
        return self.origin + self.step * (self.values.size - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.zero_extended:
            tol = 1e-9 * self.step
            if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
                raise GeometryError("evaluation outside the sampled range")
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def slopes(self) -> np.ndarray:
        """Slope of each linear piece (length n-1)."""
        return np.diff(self.values) / self.step

    def derivative(self, x):
        """Piecewise-constant derivative; zero outside the sampled range."""
        x = np.asarray(x, dtype=float)
        s = self.slopes()
        k = np.floor((x - self.origin) / self.step).astype(int)
        inside = (k >= 0) & (k < s.size)
        out = np.zeros_like(x)
        out[inside] = s[k[inside]]
        return out

    def support(self) -> tuple[float, float]:
        nz = np.nonzero(self.values)[0]
        if nz.size == 0:
            return (0.0, 0.0)
        lo = self.origin + self.step * max(nz[0] - 1, 0)
        hi = self.origin + self.step * min(nz[-1] + 1, self.values.size - 1)
        return (lo, hi)

    def shifted(self, a: float) -> "SampledFunction":
        """x -> f(x - a)."""
        return SampledFunction(self.origin + a, self.step, self.values, self.zero_extended)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class LipschitzGraph(SampledFunction):
    """Compactly supported Lipschitz function A with slope bound delta.

    ``support_radius`` is the radius R such that A vanishes outside [-R, R].
    """

    slope_bound: float = 0.0
    support_radius: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if self.slope_bound < 0:
            raise GeometryError("slope bound must be non-negative")
        tol = 1e-12 * max(1.0, self.slope_bound)
        if np.any(np.abs(np.diff(self.values)) > self.slope_bound * self.step + tol):
            raise GeometryError("samples violate the discrete Lipschitz bound")
        x = self.x
        outside = np.abs(x) >= self.support_radius - 1e-12
        if np.any(self.values[outside] != 0.0):
            raise GeometryError("samples must vanish at and beyond the support radius")
        if self.lo > -self.support_radius + 1e-12 or self.hi < self.support_radius - 1e-12:
            raise GeometryError("sampled range must cover [-R, R]")

    @classmethod
    def from_callable(cls, func, support_radius: float, step: float,
                      slope_bound: float | None = None, pad: float = 0.0) -> "LipschitzGraph":
        """Sample ``func`` on [-R-pad, R+pad], forcing zeros outside (-R, R)."""
        n_half = int(math.ceil((support_radius + pad) / step))
        x = step * np.arange(-n_half, n_half + 1)
        vals = np.where(np.abs(x) < support_radius, np.asarray(func(x), dtype=float), 0.0)
        if slope_bound is None:
            slope_bound = float(np.max(np.abs(np.diff(vals)))) / step
        return cls(float(x[0]), step, vals, True, slope_bound, support_radius)

    @property
    def measured_slope(self) -> float:
        return float(np.max(np.abs(self.slopes())))

    def dilated(self, lam: float) -> "LipschitzGraph":
        """Graph of lam * A(x / lam): the lam-dilate of the domain."""
        return LipschitzGraph(self.origin * lam, self.step * lam, self.values * lam, True,
                              self.slope_bound, self.support_radius * lam)

    def range_max(self, x0, x1) -> np.ndarray:
        """Exact maximum of the piecewise-linear A over each [x0, x1]."""
        return _range_extreme(self, np.asarray(x0, float), np.asarray(x1, float), np.maximum)

    def range_min(self, x0, x1) -> np.ndarray:
        return _range_extreme(self, np.asarray(x0, float), np.asarray(x1, float), np.minimum)


def _range_extreme(f: SampledFunction, x0, x1, op):
    vals = f.values
    n = vals.size
    # sparse table for O(1) range queries on the samples
    table = [vals]
    k = 1
    while (1 << k) <= n:
        prev = table[-1]
        half = 1 << (k - 1)
        table.append(op(prev[:-half], prev[half:]))
        k += 1
    out = op(f(x0), f(x1))
    i0 = np.ceil((x0 - f.origin) / f.step - 1e-12).astype(int)
    i1 = np.floor((x1 - f.origin) / f.step + 1e-12).astype(int)
    i0 = np.clip(i0, 0, n)
    i1 = np.clip(i1, -1, n - 1)
    has = i1 >= i0
    if np.any(has):
        a, b = i0[has], i1[has]
        length = b - a + 1
        lev = np.floor(np.log2(length)).astype(int)
        res = np.empty(a.size)
        for lv in np.unique(lev):
            m = lev == lv
            t = table[lv]
            res[m] = op(t[a[m]], t[b[m] - (1 << lv) + 1])
        out = np.array(out, dtype=float)
        out[has] = op(out[has], res)
    # outside the sampled range the function is zero
    if f.zero_extended:
        outside = (x0 < f.lo) | (x1 > f.hi)
        out = np.where(outside, op(out, 0.0), out)
    return out


# ---------------------------------------------------------------------------
# segment helpers


def _point_segment_dist(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """min_k dist(z_i, [a_k, b_k]) for every point z_i."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.full(z.shape, np.inf)
    d = b - a
    dd = np.abs(d) ** 2
    dd = np.where(dd > 0, dd, 1.0)
    flat = z.ravel()
    res = out.ravel()
    step = max(1, _CHUNK // max(a.size, 1))
    for s in range(0, flat.size, step):
        zz = flat[s:s + step, None]
        t = ((zz - a) * np.conj(d)).real / dd
        t = np.clip(t, 0.0, 1.0)
        res[s:s + step] = np.min(np.abs(zz - (a + t * d)), axis=1)
    return res.reshape(z.shape)


def _segments_hit_squares(cx, cy, half, a, b) -> np.ndarray:
    """True where some segment [a_k, b_k] meets the closed square (cx, cy, half)."""
    cx = np.asarray(cx, float)
    cy = np.asarray(cy, float)
    half = np.broadcast_to(np.asarray(half, float), cx.shape)
    hit = np.zeros(cx.shape, dtype=bool)
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag
    sx0, sx1 = np.minimum(ax, bx), np.maximum(ax, bx)
    sy0, sy1 = np.minimum(ay, by), np.maximum(ay, by)
    dx, dy = bx - ax, by - ay
    step = max(1, _CHUNK // max(a.size, 1))
    for s in range(0, cx.size, step):
        X = cx[s:s + step, None]
        Y = cy[s:s + step, None]
        H = half[s:s + step, None]
        box = (sx1 >= X - H) & (sx0 <= X + H) & (sy1 >= Y - H) & (sy0 <= Y + H)
        # separating axis along the segment normal
        c0 = dx * (Y - ay) - dy * (X - ax)
        reach = (np.abs(dx) + np.abs(dy)) * H
        hit[s:s + step] = np.any(box & (np.abs(c0) <= reach), axis=1)
    return hit


def _winding_inside(z: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd point in polygon test (closed vertex loop, no repeat)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    x, y = z.real.ravel(), z.imag.ravel()
    a = verts
    b = np.roll(verts, -1)
    inside = np.zeros(x.size, dtype=bool)
    step = max(1, _CHUNK // verts.size)
    for s in range(0, x.size, step):
        X = x[s:s + step, None]
        Y = y[s:s + step, None]
        cond = (a.imag > Y) != (b.imag > Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a.real + (Y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
        inside[s:s + step] = np.sum(cond & (X < xc), axis=1) % 2 == 1
    return inside.reshape(z.shape)


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class HalfPlane:
    """Region to the left of the oriented line through ``point``."""

    point: complex = 0j
    direction: complex = 1 + 0j

    def __post_init__(self):
        d = complex(self.direction)
        if abs(d) == 0:
            raise GeometryError("direction must be non-zero")
        object.__setattr__(self, "direction", d / abs(d))
        object.__setattr__(self, "point", complex(self.point))

    bounded = False

    def signed_height(self, z):
        return (np.conj(self.direction) * (np.asarray(z, complex) - self.point)).imag

    def contains(self, z):
        return self.signed_height(z) > 0

    def dist(self, z):
        return np.abs(self.signed_height(z))

    def _corner_heights(self, cx, cy, half):
        hs = []
        for sx in (-1, 1):
            for sy in (-1, 1):
                hs.append(self.signed_height((cx + sx * half) + 1j * (cy + sy * half)))
        return np.array(hs)

    def square_inside(self, cx, cy, half):
        return np.min(self._corner_heights(cx, cy, half), axis=0) > 0

    def square_outside(self, cx, cy, half):
        return np.max(self._corner_heights(cx, cy, half), axis=0) <= 0

    @property
    def length(self) -> float:
        return math.inf

    @property
    def diameter(self) -> float:
        return math.inf

    def point_at(self, s):
        return self.point + self.direction * np.asarray(s, float)

    def arclength_of(self, z):
        return (np.conj(self.direction) * (np.asarray(z, complex) - self.point)).real


@dataclass(frozen=True)
class Disk:
    center: complex = 0j
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("disk radius must be positive")
        object.__setattr__(self, "center", complex(self.center))

    bounded = True

    def contains(self, z):
        return np.abs(np.asarray(z, complex) - self.center) < self.radius

    def dist(self, z):
        return np.abs(np.abs(np.asarray(z, complex) - self.center) - self.radius)

    def square_inside(self, cx, cy, half):
        dx = np.abs(np.asarray(cx) - self.center.real) + half
        dy = np.abs(np.asarray(cy) - self.center.imag) + half
        return np.hypot(dx, dy) < self.radius

    def square_outside(self, cx, cy, half):
        dx = np.maximum(np.abs(np.asarray(cx) - self.center.real) - half, 0.0)
        dy = np.maximum(np.abs(np.asarray(cy) - self.center.imag) - half, 0.0)
        return np.hypot(dx, dy) >= self.radius

    @property
    def length(self) -> float:
        return 2 * math.pi * self.radius

    @property
    def diameter(self) -> float:
        return 2 * self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def point_at(self, s):
        return self.center + self.radius * np.exp(1j * np.asarray(s, float) / self.radius)

    def arclength_of(self, z):
        ang = np.angle(np.asarray(z, complex) - self.center) % (2 * math.pi)
        return ang * self.radius

    def polygon(self, n: int) -> "LipschitzPolygon":
        return LipschitzPolygon(self.point_at(self.length * np.arange(n) / n))

    def dilated(self, lam: float) -> "Disk":
        return Disk(self.center * lam, self.radius * lam)


class _PolylineMixin:
    """Shared distance and square tests for polyline boundaries."""

    def _segments(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def dist(self, z):
        a, b = self._segments()
        return _point_segment_dist(z, a, b)


@dataclass(frozen=True, eq=False)
class GraphDomain(_PolylineMixin):
    """Special Lipschitz domain {y > A(x)}."""

    graph: LipschitzGraph

    bounded = False

    def contains(self, z):
        z = np.asarray(z, complex)
        return z.imag > self.graph(z.real)

    def vertices(self) -> np.ndarray:
        g = self.graph
        return g.x + 1j * g.values

    def _segments(self):
        v = self.vertices()
        far = 1e6 * (1.0 + self.graph.support_radius)
        pts = np.concatenate([[v[0] - far], v, [v[-1] + far]])
        return pts[:-1], pts[1:]

    def square_inside(self, cx, cy, half):
        cx = np.asarray(cx, float)
        top = self.graph.range_max(cx - half, cx + half)
        return np.asarray(cy) - half > top

    def square_outside(self, cx, cy, half):
        cx = np.asarray(cx, float)
        bottom = self.graph.range_min(cx - half, cx + half)
        return np.asarray(cy) + half <= bottom

    @property
    def length(self) -> float:
        return math.inf

    @property
    def diameter(self) -> float:
        return math.inf

    def arc_length_between(self, x0, x1):
        """H^1 of the graph over [x0, x1] (vectorized)."""
        g = self.graph
        seg = g.step * np.sqrt(1 + g.slopes() ** 2)
        cum = np.concatenate([[0.0], np.cumsum(seg)])

        def S(x):
            x = np.asarray(x, float)
            u = (x - g.origin) / g.step
            k = np.clip(np.floor(u).astype(int), 0, seg.size - 1)
            inner = cum[k] + (u - k) * seg[k]
            return np.where(x < g.lo, x - g.lo, np.where(x > g.hi, cum[-1] + x - g.hi, inner))

        return S(x1) - S(x0)

    def point_at_x(self, x):
        x = np.asarray(x, float)
        return x + 1j * self.graph(x)

    def dilated(self, lam: float) -> "GraphDomain":
        return GraphDomain(self.graph.dilated(lam))


@dataclass(frozen=True, eq=False)
class LipschitzPolygon(_PolylineMixin):
    """Interior of a closed simple polygon, stored counterclockwise.

    ``chord_arc`` is computed at construction as the maximum over vertex pairs
    of (shorter boundary arc) / (chord).
    """

    vertices: np.ndarray
    chord_arc: float = field(default=0.0)
    flatness_radius: float = field(default=math.inf)

    bounded = True

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex).ravel()
        if v.size < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if np.any(np.abs(np.roll(v, -1) - v) == 0):
            raise GeometryError("repeated vertex: polyline is not rectifiable as given")
        area = 0.5 * np.sum((np.conj(v) * np.roll(v, -1)).imag)
        if abs(area) == 0:
            raise GeometryError("degenerate polygon (zero area)")
        if area < 0:
            v = v[::-1].copy()
        object.__setattr__(self, "vertices", v)
        _check_simple(v)
        object.__setattr__(self, "chord_arc", _chord_arc_constant(v))

    def _segments(self):
        v = self.vertices
        return v, np.roll(v, -1)

    def contains(self, z):
        return _winding_inside(z, self.vertices)

    def square_inside(self, cx, cy, half):
        cx = np.asarray(cx, float)
        cy = np.asarray(cy, float)
        a, b = self._segments()
        inside = self.contains(cx + 1j * cy)
        return inside & ~_segments_hit_squares(cx, cy, half, a, b)

    def square_outside(self, cx, cy, half):
        cx = np.asarray(cx, float)
        cy = np.asarray(cy, float)
        a, b = self._segments()
        out = ~self.contains(cx + 1j * cy)
        return out & ~_segments_hit_squares(cx, cy, half, a, b)

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.abs(np.roll(self.vertices, -1) - self.vertices)

    @property
    def length(self) -> float:
        return float(np.sum(self.edge_lengths))

    @property
    def area(self) -> float:
        v = self.vertices
        return float(0.5 * np.sum((np.conj(v) * np.roll(v, -1)).imag))

    @property
    def diameter(self) -> float:
        v = self.vertices
        return float(np.max(np.abs(v[:, None] - v[None, :])))

    def _cum(self):
        return np.concatenate([[0.0], np.cumsum(self.edge_lengths)])

    def point_at(self, s):
        s = np.mod(np.asarray(s, float), self.length)
        cum = self._cum()
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, self.vertices.size - 1)
        a = self.vertices[k]
        b = np.roll(self.vertices, -1)[k]
        t = (s - cum[k]) / self.edge_lengths[k]
        return a + t * (b - a)

    def arclength_of(self, z):
        """Arc-length coordinate of the boundary point nearest to each z."""
        z = np.atleast_1d(np.asarray(z, complex))
        a, b = self._segments()
        d = b - a
        cum = self._cum()
        out = np.empty(z.shape, float)
        flat = z.ravel()
        res = out.ravel()
        step = max(1, _CHUNK // a.size)
        for s in range(0, flat.size, step):
            zz = flat[s:s + step, None]
            t = np.clip(((zz - a) * np.conj(d)).real / np.abs(d) ** 2, 0, 1)
            dist = np.abs(zz - (a + t * d))
            k = np.argmin(dist, axis=1)
            res[s:s + step] = cum[k] + t[np.arange(k.size), k] * self.edge_lengths[k]
        return out

    def dilated(self, lam: float) -> "LipschitzPolygon":
        return LipschitzPolygon(self.vertices * lam, flatness_radius=self.flatness_radius * lam)

    def rotated(self, angle: float, about: complex = 0j) -> "LipschitzPolygon":
        return LipschitzPolygon(about + (self.vertices - about) * np.exp(1j * angle),
                                flatness_radius=self.flatness_radius)

    def translated(self, a: complex) -> "LipschitzPolygon":
        return LipschitzPolygon(self.vertices + a, flatness_radius=self.flatness_radius)


def _check_simple(v: np.ndarray) -> None:
    n = v.size
    a = v
    b = np.roll(v, -1)

    def orient(p, q, r):
        return np.sign(((q - p) * np.conj(r - p)).imag)

    for i in range(n):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if j.size == 0:
            continue
        o1 = orient(a[i], b[i], a[j])
        o2 = orient(a[i], b[i], b[j])
        o3 = orient(a[j], b[j], a[i])
        o4 = orient(a[j], b[j], b[i])
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            raise GeometryError("polyline is not simple")


def _chord_arc_constant(v: np.ndarray) -> float:
    n = v.size
    lens = np.abs(np.roll(v, -1) - v)
    cum = np.concatenate([[0.0], np.cumsum(lens)])[:-1]
    total = lens.sum()
    worst = 1.0
    step = max(1, _CHUNK // n)
    for s in range(0, n, step):
        arc = np.abs(cum[s:s + step, None] - cum[None, :])
        arc = np.minimum(arc, total - arc)
        chord = np.abs(v[s:s + step, None] - v[None, :])
        mask = chord > 0
        worst = max(worst, float(np.max(arc[mask] / chord[mask])))
    return worst


PlaneDomain = Union[HalfPlane, Disk, GraphDomain, LipschitzPolygon]


def dist_to_boundary(domain: PlaneDomain, z):
    """Distance from z to the boundary.

    Exact for half planes, disks and polygons; for graph domains this is the
    distance to the sampled polyline.
    """
    out = domain.dist(z)
    return float(np.asarray(out).reshape(-1)[0]) if np.ndim(z) == 0 else out


def rounded_square(side: float = 2.0, corner_radius: float = 0.25, n_arc: int = 16,
                   center: complex = 0j, edge_points: int = 16) -> LipschitzPolygon:
    """Square with circular-arc corners, as a polygon."""
    h = side / 2 - corner_radius
    pts = []
    corners = [(h, h, 0.0), (-h, h, 0.5 * math.pi), (-h, -h, math.pi), (h, -h, 1.5 * math.pi)]
    for k, (x, y, a0) in enumerate(corners):
        ang = a0 + 0.5 * math.pi * np.arange(n_arc + 1) / n_arc
        arc = (x + 1j * y) + corner_radius * np.exp(1j * ang)
        pts.extend(arc)
        nx, ny, _ = corners[(k + 1) % 4]
        end = arc[-1]
        nxt = (nx + 1j * ny) + corner_radius * np.exp(1j * (a0 + 0.5 * math.pi))
        for t in np.arange(1, edge_points) / edge_points:
            pts.append(end + t * (nxt - end))
    return LipschitzPolygon(center + np.array(pts))


def square_polygon(side: float = 2.0, per_edge: int = 1, center: complex = 0j) -> LipschitzPolygon:
    h = side / 2
    corners = [h - 1j * h, h + 1j * h, -h + 1j * h, -h - 1j * h]
    pts = []
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        pts.extend(a + (b - a) * np.arange(per_edge) / per_edge)
    return LipschitzPolygon(center + np.array(pts))


# ---------------------------------------------------------------------------
# dyadic structures


@dataclass(frozen=True)
class DyadicNode:
    """Dyadic interval of a line or dyadic arc of a boundary.

    ``start``/``end`` are x-coordinates for line carriers and arc-length
    coordinates for boundary carriers.
    """

    level: int
    index: int
    start: float
    end: float
    carrier: str = "line"

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def center(self) -> float:
        return 0.5 * (self.start + self.end)

    @property
    def parent_key(self) -> tuple[int, int] | None:
        if self.level == 0:
            return None
        return (self.level - 1, self.index // 2)

    def contains(self, other: "DyadicNode") -> bool:
        return (other.level >= self.level
                and other.index >> (other.level - self.level) == self.index)

    def dilate(self, a: float) -> tuple[float, float]:
        c, h = self.center, 0.5 * a * self.length
        return (c - h, c + h)


@dataclass(frozen=True, eq=False)
class DyadicTree:
    """Full binary dyadic tree over a segment or a closed boundary.

    Level-j nodes split the carrier [start, start + total) into 2**j pieces of
    equal parameter length.  For polygons the parameter is arc length, so
    level-j arcs have H^1 exactly total * 2**-j.
    """

    start: float
    total: float
    depth: int
    carrier: str = "line"
    domain: object = None

    def node(self, level: int, index: int) -> DyadicNode:
        if not 0 <= level <= self.depth:
            raise GeometryError(f"level {level} outside tree depth {self.depth}")
        if not 0 <= index < (1 << level):
            raise GeometryError("index out of range")
        w = self.total / (1 << level)
        return DyadicNode(level, index, self.start + index * w, self.start + (index + 1) * w,
                          self.carrier)

    @property
    def root(self) -> DyadicNode:
        return self.node(0, 0)

    def level_nodes(self, level: int) -> list[DyadicNode]:
        return [self.node(level, k) for k in range(1 << level)]

    def nodes(self) -> Iterator[DyadicNode]:
        for j in range(self.depth + 1):
            yield from self.level_nodes(j)

    def children(self, node: DyadicNode) -> list[DyadicNode]:
        if node.level >= self.depth:
            return []
        return [self.node(node.level + 1, 2 * node.index + i) for i in (0, 1)]

    def parent(self, node: DyadicNode) -> DyadicNode | None:
        key = node.parent_key
        return None if key is None else self.node(*key)

    def ancestors(self, node: DyadicNode) -> list[DyadicNode]:
        """node itself followed by its ancestors up to the root."""
        out = [node]
        while out[-1].level > 0:
            out.append(self.parent(out[-1]))
        return out

    def locate(self, param: float, level: int) -> DyadicNode:
        w = self.total / (1 << level)
        u = param - self.start
        if self.carrier == "arc":
            u = u % self.total
        k = int(math.floor(u / w + 1e-12))
        return self.node(level, min(max(k, 0), (1 << level) - 1))

    def arc_h1(self, node: DyadicNode) -> float:
        """One-dimensional Hausdorff measure of the node's image."""
        dom = self.domain
        if isinstance(dom, GraphDomain):
            return float(dom.arc_length_between(node.start, node.end))
        return node.length


def dyadic_tree(carrier, depth: int) -> DyadicTree:
    """Build the dyadic tree of a segment ``(a, b)`` or of a domain boundary.

    For graph domains the carrier parameter is x over the sampled range,
    enlarged to a dyadic-aligned interval so that the tree intervals are
    genuine dyadic intervals of the line.
    """
    if depth < 0:
        raise GeometryError("depth must be non-negative")
    if isinstance(carrier, tuple):
        a, b = map(float, carrier)
        if not b > a:
            raise GeometryError("empty segment")
        return DyadicTree(a, b - a, depth, "line")
    if isinstance(carrier, GraphDomain):
        g = carrier.graph
        half = max(abs(g.lo), abs(g.hi))
        size = 2.0 ** math.ceil(math.log2(2 * half))
        return DyadicTree(-size / 2, size, depth, "line", carrier)
    if isinstance(carrier, (LipschitzPolygon, Disk)):
        return DyadicTree(0.0, carrier.length, depth, "arc", carrier)
    raise GeometryError("carrier has no finite arc-length parameterization")


# ---------------------------------------------------------------------------
# Whitney decomposition


@dataclass(frozen=True)
class WhitneyCube:
    level: int
    ix: int
    iy: int
    side: float
    corner: complex
    capped: bool = False

    @property
    def center(self) -> complex:
        return self.corner + 0.5 * self.side * (1 + 1j)

    @property
    def base(self) -> tuple[float, float]:
        return (self.corner.real, self.corner.real + self.side)

    def dilate(self, a: float) -> tuple[complex, float]:
        """(corner, side) of the concentric a-dilate."""
        side = a * self.side
        return (self.center - 0.5 * side * (1 + 1j), side)


@dataclass(frozen=True, eq=False)
class WhitneyDecomposition:
    cubes: list
    collar: list            # (corner, side) cells at max_level meeting the boundary
    box: tuple
    root_side: float
    min_level: int
    max_level: int
    r: int = WHITNEY_R

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    @property
    def collar_side(self) -> float:
        return self.root_side * 2.0 ** -self.max_level

    @property
    def collar_area(self) -> float:
        return len(self.collar) * self.collar_side ** 2

    def arrays(self):
        """(centers, sides, levels) as numpy arrays."""
        c = np.array([q.center for q in self.cubes], dtype=complex)
        s = np.array([q.side for q in self.cubes], dtype=float)
        lv = np.array([q.level for q in self.cubes], dtype=int)
        return c, s, lv

    def counts_by_level(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for q in self.cubes:
            out[q.level] = out.get(q.level, 0) + 1
        return out


def build_whitney(domain: PlaneDomain, box: Sequence[float], min_level: int = 0,
                  max_level: int = 6) -> WhitneyDecomposition:
    """Whitney squares of ``domain`` covering ``domain ∩ box`` up to a collar.

    ``box`` is (xmin, xmax, ymin, ymax).  Squares live on the global dyadic
    lattice of side ``root_side * 2**-level`` where root_side is the smallest
    power of two not below the box extent.  A square is admissible when its
    (2*WHITNEY_GAP+1)-dilate lies in the domain; the decomposition is the set
    of maximal admissible squares no coarser than ``min_level``.  Lattice
    squares at ``max_level`` that still meet the domain without being
    admissible form the collar, reported separately.
    """
    if min_level > max_level:
        raise GeometryError("min_level must not exceed max_level")
    xmin, xmax, ymin, ymax = map(float, box)
    if not (xmax > xmin and ymax > ymin):
        raise GeometryError("degenerate box")
    if isinstance(domain, LipschitzPolygon) and domain.area <= 0:
        raise GeometryError("degenerate domain")
    root_side = 2.0 ** math.ceil(math.log2(max(xmax - xmin, ymax - ymin)))
    side = root_side * 2.0 ** -min_level
    ix = np.arange(math.floor(xmin / side), math.ceil(xmax / side))
    iy = np.arange(math.floor(ymin / side), math.ceil(ymax / side))
    IX, IY = np.meshgrid(ix, iy, indexing="ij")
    IX, IY = IX.ravel(), IY.ravel()

    cubes: list[WhitneyCube] = []
    collar: list[tuple[complex, float]] = []
    any_inside = False
    gap = WHITNEY_GAP
    for level in range(min_level, max_level + 1):
        if IX.size == 0:
            break
        side = root_side * 2.0 ** -level
        cx = (IX + 0.5) * side
        cy = (IY + 0.5) * side
        outside = domain.square_outside(cx, cy, 0.5 * side)
        keep = ~outside
        IX, IY, cx, cy = IX[keep], IY[keep], cx[keep], cy[keep]
        any_inside = any_inside or IX.size > 0
        adm = domain.square_inside(cx, cy, (gap + 0.5) * side)
        for i, j in zip(IX[adm], IY[adm]):
            cubes.append(WhitneyCube(level, int(i), int(j), side, complex(i * side, j * side),
                                     capped=(level == min_level)))
        rest = ~adm
        IX, IY = IX[rest], IY[rest]
        if level == max_level:
            collar.extend((complex(i * side, j * side), side) for i, j in zip(IX, IY))
            break
        # split the remaining squares; drop children outside the box
        cIX = (2 * IX[:, None] + np.array([0, 1, 0, 1])).ravel()
        cIY = (2 * IY[:, None] + np.array([0, 0, 1, 1])).ravel()
        cs = 0.5 * side
        inbox = ((cIX + 1) * cs > xmin) & (cIX * cs < xmax) & ((cIY + 1) * cs > ymin) & (cIY * cs < ymax)
        IX, IY = cIX[inbox], cIY[inbox]
    if not any_inside:
        raise GeometryError("box does not intersect the domain")
    # capped squares are genuine Whitney squares when 31Q meets the complement
    if cubes:
        fixed = []
        for q in cubes:
            if q.capped:
                c = q.center
                meets = not bool(domain.square_inside(c.real, c.imag, 0.5 * WHITNEY_R * q.side))
                q = WhitneyCube(q.level, q.ix, q.iy, q.side, q.corner, capped=not meets)
            fixed.append(q)
        cubes = fixed
    return WhitneyDecomposition(cubes, collar, (xmin, xmax, ymin, ymax), root_side,
                                min_level, max_level)


def phi_assign(cube: WhitneyCube, tree: DyadicTree, domain: PlaneDomain | None = None) -> DyadicNode:
    """Boundary node assigned to a Whitney square.

    Graph domains use the vertical projection of the square's base, which is
    a dyadic interval of the same length.  Closed boundaries use the arc at
    the level whose length is closest to the square's side, containing the
    boundary point nearest to the square's center.
    """
    domain = domain if domain is not None else tree.domain
    if isinstance(domain, (GraphDomain, HalfPlane)) or tree.carrier == "line":
        level = int(round(math.log2(tree.total / cube.side)))
        if level > tree.depth:
            raise GeometryError("tree too shallow for this cube")
        if level < 0:
            raise GeometryError("cube larger than the tree root")
        node = tree.locate(cube.corner.real + 0.25 * cube.side, level)
        if abs(node.start - cube.corner.real) > 1e-9 * cube.side:
            raise GeometryError("cube is not aligned with the tree's dyadic lattice")
        return node
    level = int(round(math.log2(tree.total / cube.side)))
    if level > tree.depth:
        raise GeometryError("tree too shallow for this cube")
    level = max(level, 0)
    s = float(np.asarray(domain.arclength_of(np.array([cube.center])))[0])
    return tree.locate(s, level)


def phi_multiplicity(cubes: Sequence[WhitneyCube], tree: DyadicTree,
                     domain: PlaneDomain | None = None) -> int:
    counts: dict[tuple[int, int], int] = {}
    for q in cubes:
        n = phi_assign(q, tree, domain)
        counts[(n.level, n.index)] = counts.get((n.level, n.index), 0) + 1
    return max(counts.values()) if counts else 0
