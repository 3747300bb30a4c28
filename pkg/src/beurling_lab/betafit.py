"""beta_1 flatness coefficients of functions and curves.

beta_1(f, I) is the normalized L1 distance from f to its best affine
approximant on the 3-dilate of I; beta_1(Gamma, P) is the analogous
quantity for a curve and the best line.  Both infima are solved exactly up to
a certified optimality gap.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .geometry import (Disk, DyadicNode, DyadicTree, GraphDomain,
                       HalfPlane, LipschitzPolygon, SampledFunction)

EPS_OPT = 1e-6
QUAD_PER_LENGTH = 64
_GOLDEN = (math.sqrt(5) - 1) / 2


class BetaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# weighted L1 regression


def _weighted_median(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise weighted median of r (shape (m, n))."""
    order = np.argsort(r, axis=1)
    rs = np.take_along_axis(r, order, axis=1)
    ws = np.take_along_axis(w, order, axis=1)
    cw = np.cumsum(ws, axis=1)
    half = 0.5 * cw[:, -1]
    k = np.argmax(cw >= half[:, None], axis=1)
    rows = np.arange(r.shape[0])
    out = rs[rows, k]
    # exactly half the weight below: every point of [rs[k], rs[k+1]] is a
    # minimizer, report the middle
    kn = np.minimum(k + 1, r.shape[1] - 1)
    tie = np.abs(cw[rows, k] - half) <= 1e-12 * cw[:, -1]
    return np.where(tie, 0.5 * (out + rs[rows, kn]), out)


def _objective(theta, x, y, w):
    r = y - theta[:, None] * x
    b = _weighted_median(r, w)
    return np.sum(w * np.abs(r - b[:, None]), axis=1), b


def _median_index(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    order = np.argsort(r, axis=1)
    cw = np.cumsum(np.take_along_axis(w, order, axis=1), axis=1)
    k = np.argmax(cw >= 0.5 * cw[:, -1:], axis=1)
    return order[np.arange(r.shape[0]), k]


def _golden_fit(xc, y, w, lo, hi, tol):
    scale = np.maximum(np.abs(lo), np.abs(hi)) + 1.0
    a, b = lo.copy(), hi.copy()
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, _ = _objective(c, xc, y, w)
    fd, _ = _objective(d, xc, y, w)
    for _ in range(200):
        if np.all(b - a <= tol * scale):
            break
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = np.where(left, b - _GOLDEN * (b - a), d)
        nd = np.where(left, c, a + _GOLDEN * (b - a))
        fnc = np.where(left, np.nan, fd)
        fnd = np.where(left, fc, np.nan)
        if np.any(left):
            fnc[left] = _objective(nc[left], xc[left], y[left], w[left])[0]
        if np.any(~left):
            fnd[~left] = _objective(nd[~left], xc[~left], y[~left], w[~left])[0]
        c, d, fc, fd = nc, nd, fnc, fnd
    cands = np.stack([0.5 * (a + b), a, b, c, d])
    vals = np.stack([_objective(t, xc, y, w)[0] for t in cands])
    k = np.argmin(vals, axis=0)
    return cands[k, np.arange(a.size)], b - a


def l1_affine_fit(x, y, w=None, tol: float = 1e-14):
    """Minimize sum_i w_i |y_i - (theta x_i + b)| row by row.

    x, y, w have shape (m, n) (or (n,) for a single problem) with x sorted
    along each row.  Returns (theta, b, objective, gap) where ``gap`` bounds
    objective - optimum.

    For fixed theta the best intercept is a weighted median, which makes the
    reduced objective F(theta) convex and piecewise linear, and some optimal
    line passes through the median data point.  The solver pivots: minimize
    over lines through the current median point (a weighted median of the
    slopes seen from it), recompute the median point, repeat.  Each pivot
    does not increase F.  Optimality is certified by convexity: F(theta) no
    larger than F(theta +/- eta) means theta is a global minimizer.  Rows that
    fail the certificate fall back to golden-section search on the bracket
    of consecutive data slopes, whose width times sum w|x - xbar| bounds the
    remaining gap.
    """
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    w = np.ones_like(x) if w is None else np.atleast_2d(np.asarray(w, float))
    m = x.shape[0]
    xbar = np.mean(x, axis=1, keepdims=True)
    xc = x - xbar
    dx = np.diff(xc, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(dx > 0, np.diff(y, axis=1) / np.where(dx > 0, dx, 1.0), np.nan)
    lo = np.nanmin(s, axis=1)
    hi = np.nanmax(s, axis=1)

    theta = np.zeros(m)
    pivot = _median_index(y, w)
    active = np.ones(m, dtype=bool)
    for _ in range(200):
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        xa, ya, wa = xc[idx], y[idx], w[idx]
        ra = np.arange(idx.size)
        j = pivot[idx]
        ddx = xa - xa[ra, j][:, None]
        ddy = ya - ya[ra, j][:, None]
        ok = ddx != 0
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes = np.where(ok, ddy / np.where(ok, ddx, 1.0), 0.0)
        k = _median_index(slopes, wa * np.abs(ddx))
        new = slopes[ra, k]
        moved = np.abs(new - theta[idx]) > 1e-15 * (1 + np.abs(new))
        theta[idx] = new
        pivot[idx] = k
        active[idx[~moved]] = False

    obj, _ = _objective(theta, xc, y, w)
    eta = 1e-9 * (1 + np.abs(theta))
    f_up, _ = _objective(theta + eta, xc, y, w)
    f_dn, _ = _objective(theta - eta, xc, y, w)
    slack = 1e-13 * (1 + obj)
    gap = np.zeros(m)
    bad = (f_up < obj - slack) | (f_dn < obj - slack)
    if np.any(bad):
        tb, width = _golden_fit(xc[bad], y[bad], w[bad], lo[bad], hi[bad], tol)
        ob, _ = _objective(tb, xc[bad], y[bad], w[bad])
        better = ob < obj[bad]
        idx = np.nonzero(bad)[0]
        theta[idx[better]] = tb[better]
        gap[idx] = np.sum(w[bad] * np.abs(xc[bad]), axis=1) * width
    obj, b0 = _objective(theta, xc, y, w)
    intercept = b0 - theta * xbar[:, 0]
    if single:
        return float(theta[0]), float(intercept[0]), float(obj[0]), float(gap[0])
    return theta, intercept, obj, gap


# ---------------------------------------------------------------------------
# beta_1 of functions


@dataclass(frozen=True)
class AffineFit:
    slope: float
    intercept: float
    residual_l1: float
    node: object = None
    gap: float = 0.0
    clipped: bool = False

    def __call__(self, x):
        return self.slope * np.asarray(x, float) + self.intercept


def _quad_nodes(lo: np.ndarray, hi: np.ndarray, n: int):
    """Midpoint nodes and weights on each [lo, hi] (rows)."""
    t = (np.arange(n) + 0.5) / n
    x = lo[:, None] + (hi - lo)[:, None] * t
    w = np.broadcast_to(((hi - lo) / n)[:, None], x.shape).copy()
    return x, w


def _dilate_bounds(start, length, f: SampledFunction | None, clip: bool):
    lo = start - length
    hi = start + 2 * length
    clipped = np.zeros(np.shape(start), dtype=bool)
    if f is not None and not f.zero_extended:
        out = (lo < f.lo - 1e-12) | (hi > f.hi + 1e-12)
        if np.any(out) and not clip:
            raise BetaError("3I extends beyond the sampled range of f")
        clipped = out
        lo = np.maximum(lo, f.lo)
        hi = np.minimum(hi, f.hi)
    return lo, hi, clipped


def beta1_batch(f: SampledFunction, start, length, per_length: int = QUAD_PER_LENGTH,
                clip: bool = False):
    """beta_1(f, I) for intervals I = [start, start + length) (vectorized).

    Returns (beta, slope, intercept, residual, gap, clipped) arrays.
    """
    start = np.atleast_1d(np.asarray(start, float))
    length = np.broadcast_to(np.asarray(length, float), start.shape)
    lo, hi, clipped = _dilate_bounds(start, length, f, clip)
    n = 3 * per_length
    x, w = _quad_nodes(lo, hi, n)
    y = f(x)
    theta, b, obj, gap = l1_affine_fit(x, y, w)
    beta = obj / length ** 2
    return beta, theta, b, obj, gap, clipped


def beta1_function(f: SampledFunction, I, quad_step: float | None = None,
                   clip: bool = False) -> tuple[float, AffineFit]:
    """beta_1(f, I) = inf_rho (1/l) int_{3I} |f - rho| / l dx.

    ``I`` is a DyadicNode or a (start, end) pair.  The integral uses the
    composite midpoint rule at step l/64 (or ``quad_step`` if finer, which
    must not exceed l/32).
    """
    if isinstance(I, DyadicNode):
        start, end = I.start, I.end
    else:
        start, end = map(float, I)
    ell = end - start
    per = QUAD_PER_LENGTH
    if quad_step is not None:
        if quad_step > ell / 32:
            raise BetaError("quadrature step must not exceed l(I)/32")
        per = max(per, int(math.ceil(ell / quad_step)))
    beta, th, b, obj, gap, cl = beta1_batch(f, start, ell, per, clip)
    fit = AffineFit(float(th[0]), float(b[0]), float(obj[0]), I, float(gap[0]), bool(cl[0]))
    return float(beta[0]), fit


# ---------------------------------------------------------------------------
# beta_1 of curves


def _curve_samples(domain, node: DyadicNode, per_length: int):
    """Quadrature points and H^1 weights on the 3-dilate of a boundary node."""
    ell = node.length
    if isinstance(domain, GraphDomain):
        g = domain.graph
        lo, hi = node.start - ell, node.end + ell
        if 3 * ell / g.step < 8:
            raise BetaError("arc too short relative to the polyline resolution")
        x, w = _quad_nodes(np.array([lo]), np.array([hi]), 3 * per_length)
        x, w = x[0], w[0]
        slope = g.derivative(x)
        pts = x + 1j * g(x)
        return pts, w * np.sqrt(1 + slope ** 2)
    if isinstance(domain, (LipschitzPolygon, Disk)):
        # polygons are exact polylines; arc-length sampling resolves them
        s = node.start - ell + 3 * ell * (np.arange(3 * per_length) + 0.5) / (3 * per_length)
        pts = domain.point_at(s)
        return pts, np.full(s.shape, ell / per_length)
    if isinstance(domain, HalfPlane):
        s = node.start - ell + 3 * ell * (np.arange(3 * per_length) + 0.5) / (3 * per_length)
        return domain.point_at(s), np.full(s.shape, ell / per_length)
    raise BetaError("unsupported curve")


def _line_objective(phi: np.ndarray, pts: np.ndarray, w: np.ndarray):
    """min_c sum w |n_phi . p - c| for each angle phi (rows: problems)."""
    proj = -np.sin(phi)[..., None] * pts.real[..., None, :] + np.cos(phi)[..., None] * pts.imag[..., None, :]
    shape = proj.shape
    P = proj.reshape(-1, shape[-1])
    W = np.broadcast_to(w[..., None, :], shape).reshape(-1, shape[-1])
    c = _weighted_median(P, W)
    val = np.sum(W * np.abs(P - c[:, None]), axis=1)
    return val.reshape(shape[:-1]), c.reshape(shape[:-1])


def best_line(pts: np.ndarray, w: np.ndarray, n_angles: int = 180, tol: float = 1e-12):
    """Line minimizing the weighted L1 distance sum w dist(p, L).

    Candidates: L1 regression in the frame of the chord through the first
    and last point, plus an exhaustive sweep over ``n_angles`` directions;
    each candidate is refined by golden-section search on the direction.
    Returns (value, angle, offset) with the line {p : n . p = offset},
    n = (-sin angle, cos angle).
    """
    pts = np.asarray(pts, complex)
    w = np.asarray(w, float)
    chord = pts[-1] - pts[0]
    rot = np.exp(-1j * np.angle(chord)) if abs(chord) > 0 else 1.0
    q = pts * rot
    order = np.argsort(q.real)
    th, _, _, _ = l1_affine_fit(q.real[order], q.imag[order], w[order])
    cand = [float(np.angle(chord) + math.atan(th))]
    sweep = np.pi * np.arange(n_angles) / n_angles
    vals, _ = _line_objective(sweep, pts, w)
    cand.append(float(sweep[np.argmin(vals)]))
    best = (math.inf, 0.0, 0.0)
    h = np.pi / n_angles
    for phi0 in cand:
        a, b = phi0 - h, phi0 + h
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc = _line_objective(np.array(c), pts, w)[0]
        fd = _line_objective(np.array(d), pts, w)[0]
        while b - a > tol:
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - _GOLDEN * (b - a)
                fc = _line_objective(np.array(c), pts, w)[0]
            else:
                a, c, fc = c, d, fd
                d = a + _GOLDEN * (b - a)
                fd = _line_objective(np.array(d), pts, w)[0]
        for phi in (0.5 * (a + b), phi0):
            v, off = _line_objective(np.array(phi), pts, w)
            v, off = float(np.ravel(v)[0]), float(np.ravel(off)[0])
            if v < best[0]:
                best = (v, float(phi), off)
    return best


def beta1_curve(domain, P: DyadicNode, per_length: int = QUAD_PER_LENGTH):
    """beta_1(Gamma, P) = inf_L (1/l) int_{3P} dist(x, L)/l dH^1.

    For graph domains the node is an x-interval and l(P) is its length, as
    for the vertical projections used by the Whitney assignment.  Returns
    (beta, (angle, offset)).
    """
    pts, w = _curve_samples(domain, P, per_length)
    val, phi, off = best_line(pts, w)
    return val / P.length ** 2, (phi, off)


# ---------------------------------------------------------------------------
# profiles


@dataclass
class LevelBetas:
    level: int
    index: np.ndarray
    start: np.ndarray
    length: np.ndarray
    beta: np.ndarray
    slope: np.ndarray
    intercept: np.ndarray
    clipped: np.ndarray
    shift: np.ndarray


@dataclass
class BetaProfile:
    """beta_1 values over the nodes of a dyadic family, stored per level."""

    levels: dict = field(default_factory=dict)
    carrier: str = "line"
    shifts: int = 1

    def add_level(self, lb: LevelBetas) -> None:
        self.levels[lb.level] = lb

    def beta(self, node: DyadicNode) -> float:
        lb = self.levels.get(node.level)
        if lb is None:
            raise KeyError(f"level {node.level} missing from profile")
        m = (lb.index == node.index) & (lb.shift == 0)
        if not np.any(m):
            raise KeyError("node missing from profile")
        return float(lb.beta[m][0])

    def fit(self, node: DyadicNode) -> AffineFit:
        lb = self.levels[node.level]
        k = int(np.nonzero((lb.index == node.index) & (lb.shift == 0))[0][0])
        return AffineFit(float(lb.slope[k]), float(lb.intercept[k]), float(lb.beta[k] * lb.length[k] ** 2),
                         node, 0.0, bool(lb.clipped[k]))

    def level_max(self) -> dict[int, float]:
        return {j: float(np.max(lb.beta)) if lb.beta.size else 0.0
                for j, lb in sorted(self.levels.items())}

    def items(self) -> Iterable[tuple[DyadicNode, float]]:
        for j, lb in sorted(self.levels.items()):
            for k in range(lb.beta.size):
                yield (DyadicNode(j, int(lb.index[k]), float(lb.start[k]),
                                  float(lb.start[k] + lb.length[k]), self.carrier), float(lb.beta[k]))

    @property
    def depth(self) -> int:
        return max(self.levels) - min(self.levels) if self.levels else -1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["level", "index", "center", "length", "beta1", "slope", "intercept"])
            for j, lb in sorted(self.levels.items()):
                for k in range(lb.beta.size):
                    wr.writerow([j, int(lb.index[k]), repr(float(lb.start[k] + 0.5 * lb.length[k])),
                                 repr(float(lb.length[k])), repr(float(lb.beta[k])),
                                 repr(float(lb.slope[k])), repr(float(lb.intercept[k]))])


def _batched(n: int, size: int):
    for s in range(0, n, size):
        yield slice(s, min(n, s + size))


def beta_profile(source, tree: DyadicTree, depth: int | None = None) -> BetaProfile:
    """beta_1 at every node of ``tree`` down to ``depth``.

    ``source`` is a SampledFunction (function betas) or a domain (curve
    betas of its boundary).  Function nodes whose 3-dilate leaves the sampled
    range are clipped and flagged.
    """
    depth = tree.depth if depth is None else min(depth, tree.depth)
    prof = BetaProfile(carrier=tree.carrier)
    for j in range(depth + 1):
        nodes = tree.level_nodes(j)
        idx = np.arange(len(nodes))
        start = np.array([n.start for n in nodes])
        length = np.array([n.length for n in nodes])
        if isinstance(source, SampledFunction):
            beta = np.empty(len(nodes))
            th = np.empty(len(nodes))
            b = np.empty(len(nodes))
            cl = np.zeros(len(nodes), dtype=bool)
            for sl in _batched(len(nodes), 2048):
                beta[sl], th[sl], b[sl], _, _, cl[sl] = beta1_batch(source, start[sl], length[sl], clip=True)
        else:
            beta = np.empty(len(nodes))
            th = np.empty(len(nodes))
            b = np.empty(len(nodes))
            cl = np.zeros(len(nodes), dtype=bool)
            for k, n in enumerate(nodes):
                beta[k], (th[k], b[k]) = beta1_curve(source, n)
        prof.add_level(LevelBetas(j, idx, start, length, beta, th, b, cl, np.zeros(len(nodes), int)))
    return prof


def line_profile(f: SampledFunction, levels: Iterable[int], shifts: int = 1,
                 per_length: int = QUAD_PER_LENGTH) -> BetaProfile:
    """beta_1 over the dyadic intervals of R (length 2**-j) meeting supp f.

    With ``shifts`` > 1 each level also includes the lattices translated by
    k/shifts of the interval length, k = 1..shifts-1.  Only intervals whose
    3-dilate meets the support are kept; the others have beta_1 = 0.
    """
    lo, hi = f.support()
    prof = BetaProfile(carrier="line", shifts=shifts)
    for j in levels:
        ell = 2.0 ** -j
        starts, idx, sh = [], [], []
        for k in range(shifts):
            off = k / shifts
            i0 = math.floor(lo / ell - off) - 2
            i1 = math.ceil(hi / ell - off) + 1
            ii = np.arange(i0, i1 + 1)
            s = (ii + off) * ell
            keep = (s - ell < hi) & (s + 2 * ell > lo)
            starts.append(s[keep])
            idx.append(ii[keep])
            sh.append(np.full(np.count_nonzero(keep), k))
        start = np.concatenate(starts)
        index = np.concatenate(idx)
        shift = np.concatenate(sh)
        beta = np.empty(start.size)
        th = np.empty(start.size)
        b = np.empty(start.size)
        cl = np.zeros(start.size, dtype=bool)
        for sl in _batched(start.size, 1024):
            beta[sl], th[sl], b[sl], _, _, cl[sl] = beta1_batch(f, start[sl], ell, per_length, clip=True)
        prof.add_level(LevelBetas(j, index, start, np.full(start.size, ell), beta, th, b, cl, shift))
    return prof
