"""Level sets, signed distances, layer widths and curve metrics on 2-D grids."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numba
import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import EmptyLevelSet, OpenCurve
from .field import Field2D, Grid2D


@dataclass
class LevelSet:
    """Marching-squares output plus the polylines assembled from it."""

    segments: np.ndarray  # (n, 2, 2)
    level: float
    loops: List[np.ndarray] = field(default_factory=list)
    closed: List[bool] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return len(self.segments) == 0

    @property
    def all_closed(self) -> bool:
        return bool(self.closed) and all(self.closed)

    def require(self) -> "LevelSet":
        if self.empty:
            raise EmptyLevelSet(f"no crossing of level {self.level}")
        return self

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(self.segments[:, 1] - self.segments[:, 0], axis=1)))

    def rows(self):
        """``(loop_id, x, y)`` rows for CSV export."""
        for k, loop in enumerate(self.loops):
            for x, y in loop:
                yield (k, float(x), float(y))

    @classmethod
    def from_polygon(cls, points, level: float = 0.0, closed: bool = True) -> "LevelSet":
        pts = np.asarray(points, dtype=float)
        nxt = np.roll(pts, -1, axis=0) if closed else pts[1:]
        segs = np.stack([pts[: len(nxt)], nxt], axis=1)
        return cls(segs, level, [pts], [closed])

    @classmethod
    def circle(cls, center, radius: float, n: int = 1024) -> "LevelSet":
        th = 2 * np.pi * np.arange(n) / n
        pts = np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])
        return cls.from_polygon(pts)


# case -> list of (edge_a, edge_b); edges: 0 bottom, 1 right, 2 top, 3 left
_TABLE = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(0, 2)], 11: [(1, 2)], 12: [(3, 1)], 13: [(0, 1)], 14: [(3, 0)],
}
# saddles: (center above level, center below level)
_SADDLE = {
    5: ([(0, 1), (2, 3)], [(3, 0), (1, 2)]),
    10: ([(3, 0), (1, 2)], [(0, 1), (2, 3)]),
}


def extract_level_set(fld: Field2D, level: float) -> LevelSet:
    """Marching squares with linear edge interpolation.

    Saddle cells are split according to the average of their four corners.
    An empty result is returned (not raised) when nothing crosses ``level``.
    """
    u = np.asarray(fld.u, dtype=float)
    g = fld.grid
    nx, ny = u.shape
    x, y = g.x, g.y
    above = u >= level
    # crossing points on horizontal edges (i,j)-(i+1,j) and vertical edges (i,j)-(i,j+1)
    with np.errstate(divide="ignore", invalid="ignore"):
        th = (level - u[:-1, :]) / (u[1:, :] - u[:-1, :])
        tv = (level - u[:, :-1]) / (u[:, 1:] - u[:, :-1])
    hx = x[:-1, None] + th * g.h
    vy = y[None, :-1] + tv * g.h

    b0, b1, b2, b3 = above[:-1, :-1], above[1:, :-1], above[1:, 1:], above[:-1, 1:]
    case = b0 * 1 + b1 * 2 + b2 * 4 + b3 * 8
    center = 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[1:, 1:] + u[:-1, 1:]) >= level
    ii, jj = np.nonzero((case != 0) & (case != 15))
    n_h = (nx - 1) * ny

    def edge_id(e, i, j):
        if e == 0:
            return i * ny + j
        if e == 2:
            return i * ny + j + 1
        if e == 3:
            return n_h + i * (ny - 1) + j
        return n_h + (i + 1) * (ny - 1) + j

    pairs = []
    for i, j in zip(ii.tolist(), jj.tolist()):
        c = int(case[i, j])
        segs = _TABLE.get(c)
        if segs is None:
            segs = _SADDLE[c][0] if center[i, j] else _SADDLE[c][1]
        for ea, eb in segs:
            pairs.append((edge_id(ea, i, j), edge_id(eb, i, j)))
    if not pairs:
        return LevelSet(np.zeros((0, 2, 2)), float(level))
    pairs = np.array(pairs, dtype=np.int64)

    def point(eid):
        eid = np.asarray(eid)
        out = np.empty(eid.shape + (2,))
        hmask = eid < n_h
        hi, hj = np.divmod(eid[hmask], ny)
        out[hmask, 0] = hx[hi, hj]
        out[hmask, 1] = y[hj]
        vi, vj = np.divmod(eid[~hmask] - n_h, ny - 1)
        out[~hmask, 0] = x[vi]
        out[~hmask, 1] = vy[vi, vj]
        return out

    segments = np.stack([point(pairs[:, 0]), point(pairs[:, 1])], axis=1)
    loops, closed = _assemble(pairs, segments)
    return LevelSet(segments, float(level), loops, closed)


def _assemble(pairs: np.ndarray, segments: np.ndarray):
    """Chain segments that share grid edges into ordered polylines."""
    touch = defaultdict(list)
    for k, (a, b) in enumerate(pairs.tolist()):
        touch[a].append(k)
        touch[b].append(k)
    used = np.zeros(len(pairs), dtype=bool)
    loops, closed = [], []
    # start open chains at edges touched once, then sweep the remaining cycles
    starts = [e for e, ks in touch.items() if len(ks) == 1]
    order = [(e, touch[e][0]) for e in sorted(starts)] + [(None, k) for k in range(len(pairs))]
    pts_of = {}
    for k, (a, b) in enumerate(pairs.tolist()):
        pts_of[(k, a)] = segments[k, 0]
        pts_of[(k, b)] = segments[k, 1]
    for start_edge, k0 in order:
        if used[k0]:
            continue
        a, b = pairs[k0]
        cur_edge = a if start_edge is None else start_edge
        first_edge = cur_edge
        chain = [pts_of[(k0, cur_edge)]]
        k = k0
        is_closed = False
        while True:
            used[k] = True
            a, b = pairs[k]
            nxt_edge = b if a == cur_edge else a
            chain.append(pts_of[(k, nxt_edge)])
            if nxt_edge == first_edge and start_edge is None:
                is_closed = True
                chain.pop()
                break
            cands = [q for q in touch[nxt_edge] if not used[q]]
            if not cands:
                break
            k, cur_edge = cands[0], nxt_edge
        pts = np.array(chain)
        if is_closed and _signed_area(pts) < 0:
            pts = pts[::-1].copy()
        loops.append(pts)
        closed.append(is_closed)
    return loops, closed


def _signed_area(pts) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def enclosed_area(loop) -> float:
    return abs(_signed_area(np.asarray(loop)))


def loop_centroid(loop) -> np.ndarray:
    pts = np.asarray(loop)
    x, y = pts[:, 0], pts[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    a = 0.5 * cross.sum()
    if abs(a) < 1e-300:
        return pts.mean(axis=0)
    cx = ((x + np.roll(x, -1)) * cross).sum() / (6 * a)
    cy = ((y + np.roll(y, -1)) * cross).sum() / (6 * a)
    return np.array([cx, cy])


def loop_radius(loop) -> float:
    """Mean distance from the area centroid to the vertices."""
    pts = np.asarray(loop)
    return float(np.mean(np.linalg.norm(pts - loop_centroid(pts), axis=1)))


def largest_loop(ls: LevelSet) -> np.ndarray:
    ls.require()
    return max(ls.loops, key=lambda p: (enclosed_area(p), len(p)))


# ---------------------------------------------------------------- distances


@numba.njit(cache=True)
def _seg_dist(px, py, ax, ay, bx, by):
    n = px.size
    m = ax.size
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        x, y = px[i], py[i]
        for k in range(m):
            dx, dy = bx[k] - ax[k], by[k] - ay[k]
            l2 = dx * dx + dy * dy
            t = 0.0
            if l2 > 0.0:
                t = ((x - ax[k]) * dx + (y - ay[k]) * dy) / l2
                t = min(1.0, max(0.0, t))
            ex = ax[k] + t * dx - x
            ey = ay[k] + t * dy - y
            d2 = ex * ex + ey * ey
            if d2 < best:
                best = d2
        out[i] = np.sqrt(best)
    return out


def distance_to_segments(points, segments) -> np.ndarray:
    """Exact Euclidean distance from each point to a set of segments."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    s = np.asarray(segments, dtype=float)
    return _seg_dist(np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
                     np.ascontiguousarray(s[:, 0, 0]), np.ascontiguousarray(s[:, 0, 1]),
                     np.ascontiguousarray(s[:, 1, 0]), np.ascontiguousarray(s[:, 1, 1]))


@dataclass
class SignedDistanceField:
    grid: Grid2D
    values: np.ndarray
    level: float

    def gradient_norm(self) -> np.ndarray:
        gx, gy = np.gradient(self.values, self.grid.h)
        return np.hypot(gx, gy)

    def eikonal_residual(self, min_dist: float, max_dist: float = np.inf) -> float:
        """Max of ``| |grad d| - 1 |`` at interior nodes with ``min_dist <= |d| <= max_dist``.

        The upper bound keeps the check off the medial axis, where ``d`` has kinks.
        """
        g = np.abs(self.gradient_norm() - 1.0)
        mask = (np.abs(self.values) >= min_dist) & (np.abs(self.values) <= max_dist)
        mask[[0, -1], :] = False
        mask[:, [0, -1]] = False
        return float(g[mask].max()) if mask.any() else 0.0


def signed_distance(target: LevelSet, grid: Grid2D, sign_source: Field2D,
                    level: Optional[float] = None) -> SignedDistanceField:
    """Brute-force point-to-segment distance, negative where ``sign_source < level``."""
    target.require()
    level = target.level if level is None else level
    X, Y = grid.mesh()
    d = distance_to_segments(np.column_stack([X.ravel(), Y.ravel()]), target.segments).reshape(X.shape)
    sign = np.where(sign_source.u < level, -1.0, 1.0)
    return SignedDistanceField(grid, sign * d, float(level))


def point_in_polygons(points, loops) -> np.ndarray:
    """Even-odd rule over all loops."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    inside = np.zeros(len(p), dtype=bool)
    for loop in loops:
        L = np.asarray(loop, dtype=float)
        inside ^= _pip(np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
                       np.ascontiguousarray(L[:, 0]), np.ascontiguousarray(L[:, 1]))
    return inside


@numba.njit(cache=True)
def _pip(px, py, vx, vy):
    n = px.size
    m = vx.size
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        x, y = px[i], py[i]
        c = False
        j = m - 1
        for k in range(m):
            if (vy[k] > y) != (vy[j] > y):
                xc = vx[k] + (y - vy[k]) * (vx[j] - vx[k]) / (vy[j] - vy[k])
                if x < xc:
                    c = not c
            j = k
        out[i] = c
    return out


# ---------------------------------------------------------------- widths


def _vertex_normals(loop: np.ndarray, closed: bool) -> np.ndarray:
    if closed:
        tang = np.roll(loop, -1, axis=0) - np.roll(loop, 1, axis=0)
    else:
        tang = np.gradient(loop, axis=0)
    nrm = np.column_stack([tang[:, 1], -tang[:, 0]])
    length = np.linalg.norm(nrm, axis=1, keepdims=True)
    return nrm / np.where(length > 0, length, 1.0)


def _sample(fld: Field2D, pts: np.ndarray) -> np.ndarray:
    g = fld.grid
    ci = (pts[..., 0] - g.x0) / g.h
    cj = (pts[..., 1] - g.y0) / g.h
    return ndimage.map_coordinates(fld.u, [ci.ravel(), cj.ravel()], order=1, mode="nearest").reshape(ci.shape)


@dataclass
class WidthReport:
    width: float
    proxy: float
    per_point: np.ndarray
    capped: int


def layer_width(fld: Field2D, eta: float, level_set: LevelSet, zeros, reach: float = 0.2,
                step: Optional[float] = None, sdf: Optional[SignedDistanceField] = None) -> WidthReport:
    """Extent of ``{a_minus + eta <= u <= a_plus - eta}`` along the local normal.

    The normal comes from the gradient of ``sdf`` when given, otherwise from
    the polyline itself (the two agree on the curve).  Samples are taken every
    ``step`` (default ``h/4``) out to ``reach`` on both sides.  Points whose
    walk meets the domain edge, or no band exit within ``reach``, get no
    width and are counted in ``capped``.
    """
    level_set.require()
    am, _, ap = zeros
    if not 0 < eta < min(zeros[1] - am, ap - zeros[1]):
        raise ValueError("eta must lie in (0, eta0)")
    lo, hi = am + eta, ap - eta
    h = fld.grid.h
    step = h / 4.0 if step is None else step
    s = np.arange(-int(reach / step), int(reach / step) + 1) * step
    mid = s.size // 2
    widths = []
    capped = 0
    for loop, closed in zip(level_set.loops, level_set.closed):
        if sdf is not None:
            gx, gy = np.gradient(sdf.values, h)
            nx_ = _sample(Field2D(fld.grid, gx), loop)
            ny_ = _sample(Field2D(fld.grid, gy), loop)
            nn = np.hypot(nx_, ny_)
            nrm = np.column_stack([nx_, ny_]) / np.where(nn > 0, nn, 1.0)[:, None]
        else:
            nrm = _vertex_normals(loop, closed)
        pts = loop[:, None, :] + s[None, :, None] * nrm[:, None, :]
        vals = _sample(fld, pts)
        x0, x1, y0, y1 = fld.grid.extent
        tol = 1e-9 * h
        outside = ((pts[..., 0] < x0 - tol) | (pts[..., 0] > x1 + tol)
                   | (pts[..., 1] < y0 - tol) | (pts[..., 1] > y1 + tol))
        inband = (vals >= lo) & (vals <= hi) & ~outside
        for row, ok, off in zip(vals, inband, outside):
            # walk outward from the curve point until the band is left on each side
            right = np.argmax(~ok[mid:]) if not ok[mid:].all() else -1
            left = np.argmax(~ok[:mid + 1][::-1]) if not ok[:mid + 1].all() else -1
            # no exit within reach, or the wall came first: the width is not measurable here
            if right < 0 or left < 0 or off[mid + right] or off[mid - left]:
                capped += 1
                continue
            widths.append(_exit(row, s, mid, right, +1, lo, hi) - _exit(row, s, mid, left, -1, lo, hi))
    per_point = np.array(widths)
    if per_point.size == 0:
        return WidthReport(float("nan"), float("nan"), per_point, capped)
    band = (fld.u >= lo) & (fld.u <= hi)
    proxy = float(band.sum() * h * h / max(level_set.length(), 1e-300))
    return WidthReport(float(per_point.max()), proxy, per_point, capped)


def _exit(row, s, mid, k, direction, lo, hi):
    """Position where the sampled profile leaves ``[lo, hi]``, linearly interpolated."""
    i_out = mid + direction * k
    i_in = i_out - direction
    v_in, v_out = row[i_in], row[i_out]
    bound = hi if v_out > hi else lo
    if v_out == v_in:
        return s[i_out]
    t = (bound - v_in) / (v_out - v_in)
    return s[i_in] + t * (s[i_out] - s[i_in])


# ---------------------------------------------------------------- curve metrics


def resample_polyline(loop: np.ndarray, spacing: float, closed: bool = True) -> np.ndarray:
    pts = np.vstack([loop, loop[:1]]) if closed else np.asarray(loop)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(int(np.ceil(arc[-1] / spacing)), 2)
    t = np.linspace(0.0, arc[-1], n, endpoint=not closed)
    return np.column_stack([np.interp(t, arc, pts[:, 0]), np.interp(t, arc, pts[:, 1])])


def hausdorff(A: LevelSet, B: LevelSet, h: float) -> float:
    """Symmetric Hausdorff distance after resampling both curves at ``h/2``."""
    A.require()
    B.require()
    pa = np.vstack([resample_polyline(l, h / 2, c) for l, c in zip(A.loops, A.closed)])
    pb = np.vstack([resample_polyline(l, h / 2, c) for l, c in zip(B.loops, B.closed)])
    dab = cKDTree(pb).query(pa)[0].max()
    dba = cKDTree(pa).query(pb)[0].max()
    return float(max(dab, dba))


def trapezoid_weights(grid: Grid2D) -> np.ndarray:
    wx = np.ones(grid.nx)
    wx[[0, -1]] = 0.5
    wy = np.ones(grid.ny)
    wy[[0, -1]] = 0.5
    return np.outer(wx, wy) * grid.h**2


def step_function(grid: Grid2D, reference: LevelSet, zeros) -> np.ndarray:
    """``a_minus`` inside the closed reference curve(s), ``a_plus`` outside."""
    if not reference.all_closed:
        raise OpenCurve("the reference curve is not closed")
    X, Y = grid.mesh()
    inside = point_in_polygons(np.column_stack([X.ravel(), Y.ravel()]), reference.loops).reshape(X.shape)
    return np.where(inside, zeros[0], zeros[2])


def l2_step_distance(fld: Field2D, reference: LevelSet, zeros) -> float:
    """``||u - Phi||_{L^2}`` with ``Phi`` the two-phase step of ``reference``."""
    phi = step_function(fld.grid, reference, zeros)
    return float(np.sqrt(np.sum(trapezoid_weights(fld.grid) * (fld.u - phi) ** 2)))
