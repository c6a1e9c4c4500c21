"""Sharp-interface reference dynamics in the plane.

* :class:`GaussMapCurve` with :func:`step_kappa_spde` evolves the curvature of
  a convex curve as a function of the normal angle under
  ``dk = (k^2 k_thth + k^3) dt + b k^2 o dW`` (Stratonovich, Heun steps).
* :class:`FrontCurve` with :func:`step_front` moves marker particles with
  inward normal speed ``kappa + forcing``.
* :func:`radius_sde` is the circle reduction ``dR = -dt/R - forcing dt`` or
  ``dR = -dt/R - b dW``.
* :func:`monitor_stopping` watches curvature and boundary proximity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import Collapse, ConvexityLost, SelfIntersection


# ---------------------------------------------------------------- Gauss map


@dataclass
class GaussMapCurve:
    theta: np.ndarray
    kappa: np.ndarray
    base_point: Tuple[float, float] = (0.0, 0.0)
    time: float = 0.0

    @classmethod
    def uniform(cls, kappa_fn, n: int = 256, base_point=(0.0, 0.0)) -> "GaussMapCurve":
        th = 2 * np.pi * np.arange(n) / n
        k = np.broadcast_to(np.asarray(kappa_fn(th) if callable(kappa_fn) else kappa_fn, dtype=float), th.shape)
        return cls(th, k.copy(), tuple(base_point))

    @property
    def h(self) -> float:
        return 2 * np.pi / self.theta.size

    def kappa_theta(self) -> np.ndarray:
        return (np.roll(self.kappa, -1, axis=-1) - np.roll(self.kappa, 1, axis=-1)) / (2 * self.h)

    def roundness(self) -> float:
        return float(self.kappa.max() / self.kappa.min())


def _kappa_drift(k: np.ndarray, h: float) -> np.ndarray:
    k_tt = (np.roll(k, -1, axis=-1) - 2.0 * k + np.roll(k, 1, axis=-1)) / (h * h)
    return k * k * k_tt + k**3


def step_kappa_spde(curve: GaussMapCurve, dt: float, c0alpha0: float, dW) -> GaussMapCurve:
    """One Heun step of the Stratonovich curvature equation.

    ``curve.kappa`` may be a stack of independent curves (shape ``(paths, n)``)
    with ``dW`` holding one increment per row.
    """
    k = curve.kappa
    if k.ndim == 2:
        dW = np.asarray(dW, dtype=float).reshape(-1, 1)
    if np.any(k <= 0):
        raise ConvexityLost("curvature must be positive")
    h = curve.h
    if dt > 0.1 * h * h / float(k.max()) ** 2:
        raise ValueError("dt violates the parabolic step limit 0.1 h^2 / max(kappa)^2")
    a0 = _kappa_drift(k, h)
    b0 = c0alpha0 * k * k
    pred = k + a0 * dt + b0 * dW
    new = k + 0.5 * (a0 + _kappa_drift(pred, h)) * dt + 0.5 * (b0 + c0alpha0 * pred * pred) * dW
    if np.any(new <= 0) or not np.all(np.isfinite(new)):
        raise ConvexityLost(f"curvature lost positivity at t={curve.time + dt:.6g}")
    return GaussMapCurve(curve.theta, new, curve.base_point, curve.time + dt)


def run_kappa_spde(curve: GaussMapCurve, dt: float, c0alpha0: float, dW: Sequence[float]):
    """Apply :func:`step_kappa_spde` once per increment; returns the list of states."""
    states = [curve]
    for w in dW:
        curve = step_kappa_spde(curve, dt, c0alpha0, w)
        states.append(curve)
    return states


def _periodic_antiderivative(values: np.ndarray) -> Tuple[np.ndarray, complex]:
    """Spectral antiderivative of periodic samples on [0, 2pi) with zero value at 0.

    Returns the zero-mean part's antiderivative and the mean (the closure term).
    """
    n = values.size
    c = np.fft.fft(values)
    mean = c[0] / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(k != 0, c / (1j * k), 0.0)
    if n % 2 == 0:
        coef[n // 2] = 0.0
    prim = np.fft.ifft(coef)
    return prim - prim[0], mean


def reconstruct_curve(curve: GaussMapCurve, n_markers: Optional[int] = None) -> "FrontCurve":
    """Points ``x(theta) = x(0) + int_0^theta (1/kappa)(-sin, cos)``.

    The periodic integrand is integrated spectrally; its mean (the closure
    defect) is removed by a linear-in-theta correction and reported.
    """
    k = curve.kappa
    if np.any(k <= 0):
        raise ConvexityLost("cannot reconstruct a non-convex curve")
    th = curve.theta
    z = (1.0 / k) * (-np.sin(th) + 1j * np.cos(th))
    prim, mean = _periodic_antiderivative(z)
    # the mean term would integrate to mean*theta; dropping it redistributes the defect
    defect = abs(mean) * 2 * np.pi
    perimeter = float(np.mean(1.0 / k) * 2 * np.pi)
    pts = np.column_stack([prim.real, prim.imag]) + np.asarray(curve.base_point, dtype=float)
    fc = FrontCurve(pts, time=curve.time)
    fc.closure_defect = float(defect / perimeter)
    return fc


# ---------------------------------------------------------------- markers


@dataclass
class FrontCurve:
    """Closed polyline, counter-clockwise, with marker-based geometry."""

    points: np.ndarray
    time: float = 0.0
    steps: int = 0
    closure_defect: float = 0.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        x, y = self.points[:, 0], self.points[:, 1]
        if 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
            self.points = self.points[::-1].copy()

    @classmethod
    def circle(cls, center, radius: float, n: int = 256) -> "FrontCurve":
        th = 2 * np.pi * np.arange(n) / n
        return cls(np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def spacing(self) -> np.ndarray:
        return np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)

    @property
    def h_marker(self) -> float:
        return float(self.spacing().mean())

    def area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def length(self) -> float:
        return float(self.spacing().sum())

    def tangents(self) -> np.ndarray:
        t = np.roll(self.points, -1, axis=0) - np.roll(self.points, 1, axis=0)
        return t / np.linalg.norm(t, axis=1, keepdims=True)

    def inward_normals(self) -> np.ndarray:
        t = self.tangents()
        return np.column_stack([-t[:, 1], t[:, 0]])

    def curvature(self) -> np.ndarray:
        """Signed curvature through consecutive marker triples (Menger formula).

        Positive where the curve bends toward its interior.
        """
        P = self.points
        a = P - np.roll(P, 1, axis=0)
        b = np.roll(P, -1, axis=0) - P
        c = np.roll(P, -1, axis=0) - np.roll(P, 1, axis=0)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        denom = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1) * np.linalg.norm(c, axis=1)
        return 2.0 * cross / denom

    def is_simple(self) -> bool:
        return not _self_intersects(self.points)

    def redistribute(self, n: Optional[int] = None) -> "FrontCurve":
        """Resample at uniform arclength through a periodic cubic spline."""
        n = self.n if n is None else n
        P = np.vstack([self.points, self.points[:1]])
        s = np.concatenate([[0.0], np.cumsum(self.spacing())])
        sp = CubicSpline(s, P, bc_type="periodic")
        t = np.linspace(0.0, s[-1], n, endpoint=False)
        return FrontCurve(sp(t), self.time, self.steps)

    def rows(self, marker_offset: int = 0):
        for i, (x, y) in enumerate(self.points):
            yield (self.time, i + marker_offset, float(x), float(y))


def _self_intersects(P: np.ndarray) -> bool:
    n = P.shape[0]
    A = P
    B = np.roll(P, -1, axis=0)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    for i in range(n):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if j.size == 0:
            continue
        a, b = A[i], B[i]
        c, d = A[j], B[j]
        o1 = orient(a, b, c)
        o2 = orient(a, b, d)
        o3 = orient(c, d, a[None, :])
        o4 = orient(c, d, b[None, :])
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            return True
    return False


REDISTRIBUTE_EVERY = 10


def step_front(curve: FrontCurve, dt: float, forcing: float, check_dt: bool = True) -> FrontCurve:
    """Move markers by ``dt * (kappa + forcing)`` along the inward normal."""
    h = curve.h_marker
    if check_dt and dt > 0.1 * h * h * (1 + 1e-9):
        raise ValueError(f"dt={dt:.3g} exceeds 0.1 h_marker^2={0.1 * h * h:.3g}")
    if not np.isfinite(forcing):
        raise ValueError("forcing must be finite")
    speed = curve.curvature() + forcing
    pts = curve.points + dt * speed[:, None] * curve.inward_normals()
    out = FrontCurve(pts, curve.time + dt, curve.steps + 1)
    if out.steps % REDISTRIBUTE_EVERY == 0:
        out = out.redistribute()
        if not out.is_simple():
            raise SelfIntersection(f"front self-intersects at t={out.time:.6g}")
    if out.area() < (3.0 * out.h_marker) ** 2:
        raise Collapse(f"front collapsed at t={out.time:.6g}")
    return out


def run_front(curve: FrontCurve, dt: float, forcing: Sequence[float], record_every: int = 0):
    """Advance with one forcing value per step; returns final curve and recorded history."""
    history = [curve] if record_every else []
    for k, F in enumerate(forcing):
        curve = step_front(curve, dt, float(F))
        if record_every and (k + 1) % record_every == 0:
            history.append(curve)
    return curve, history


# ---------------------------------------------------------------- circles


@dataclass
class RadiusPath:
    t: np.ndarray
    R: np.ndarray
    extinct: object  # bool, or a boolean array for several paths
    t_ext: object
    guard: float

    def rows(self):
        R = self.R if self.R.ndim == 1 else self.R[0]
        for t, r in zip(self.t, R):
            yield (float(t), float(r))


def interface_forcing(noise, eps: float, speed, dt: float, n_steps: int, t0: float = 0.0) -> np.ndarray:
    """Per-step forcing ``-c(eps xi)/eps`` with the noise at step midpoints."""
    xi = noise.midpoints(dt, n_steps, t0)
    return -np.asarray(speed(eps * xi), dtype=float) / eps


def radius_sde(R0: float, dt: float, t_end: float, forcing: Optional[np.ndarray] = None,
               dW: Optional[np.ndarray] = None, coef: float = 0.0, t0: float = 0.0) -> RadiusPath:
    """Euler steps of ``dR = -dt/R - forcing dt - coef dW``.

    ``dW`` may hold several paths (one per row).  A path stops, keeping its
    last value, once ``R < 10 sqrt(dt)``.
    """
    if R0 <= 0:
        raise ValueError("R0 must be positive")
    n = int(round(t_end / dt))
    multi = dW is not None and np.asarray(dW).ndim == 2
    if dW is not None:
        dW = np.atleast_2d(np.asarray(dW, dtype=float))[:, :n]
        paths = dW.shape[0]
    else:
        paths = 1
    F = np.zeros(n) if forcing is None else np.asarray(forcing, dtype=float)[:n]
    if F.size < n:
        raise ValueError(f"forcing has {F.size} values, {n} steps requested")
    guard = 10.0 * np.sqrt(dt)
    R = np.empty((paths, n + 1))
    R[:, 0] = R0
    alive = np.ones(paths, dtype=bool)
    t_ext = np.full(paths, np.nan)
    r = np.full(paths, float(R0))
    for k in range(n):
        step = -dt / r - F[k] * dt
        if dW is not None:
            step = step - coef * dW[:, k]
        r = np.where(alive, r + step, r)
        died = alive & (r < guard)
        t_ext[died] = t0 + (k + 1) * dt
        alive &= ~died
        R[:, k + 1] = r
    t = t0 + np.arange(n + 1) * dt
    if multi:
        return RadiusPath(t, R, ~alive, t_ext, guard)
    return RadiusPath(t, R[0], bool(~alive[0]), float(t_ext[0]), guard)


def stratonovich_gap(dW: np.ndarray, dt: float, coef: float, N: float = 5.0, R0: float = 1.0,
                     n_theta: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Pathwise sup gap between the constant-curvature SPDE and :func:`radius_sde`.

    ``dW`` has one row per path.  Each comparison runs until the stopping time
    ``sigma_N`` of that path (``kappa > N`` or ``1/kappa > N``); afterwards the
    path is frozen.  Returns ``(gap, stopped)``.
    """
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    paths, n = dW.shape
    rp = radius_sde(R0, dt, n * dt, dW=dW, coef=coef)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    curve = GaussMapCurve(theta, np.full((paths, n_theta), 1.0 / R0))
    gap = np.zeros(paths)
    alive = np.ones(paths, dtype=bool)
    for j in range(n):
        k0 = curve.kappa[:, 0]
        alive &= (k0 < N) & (k0 > 1.0 / N)
        if not alive.any():
            break
        frozen = np.where(alive[:, None], curve.kappa, 1.0)
        curve = step_kappa_spde(GaussMapCurve(theta, frozen, time=curve.time), dt, coef, dW[:, j])
        g = np.abs(1.0 / curve.kappa[:, 0] - rp.R[:, j + 1])
        gap = np.where(alive, np.maximum(gap, g), gap)
    return gap, ~alive


# ---------------------------------------------------------------- stopping


@dataclass
class StoppingMonitor:
    N: float
    times: List[float] = field(default_factory=list)
    kappa_bar: List[float] = field(default_factory=list)
    boundary_distance: List[float] = field(default_factory=list)
    triggered_at: Optional[float] = None
    clause: Optional[str] = None
    nonconvex_at: List[float] = field(default_factory=list)

    def record(self, t: float, kbar: float, bdist: float, convex: bool = True) -> bool:
        self.times.append(float(t))
        self.kappa_bar.append(float(kbar))
        self.boundary_distance.append(float(bdist))
        if not convex:
            self.nonconvex_at.append(float(t))
        if self.triggered_at is None:
            if kbar > self.N:
                self.triggered_at, self.clause = float(t), "curvature"
            elif bdist < 1.0 / self.N:
                self.triggered_at, self.clause = float(t), "boundary"
        return self.triggered_at is not None

    def summary(self) -> dict:
        return {"N": self.N, "triggered_at": self.triggered_at, "clause": self.clause,
                "max_kappa_bar": max(self.kappa_bar) if self.kappa_bar else None,
                "min_boundary_distance": min(self.boundary_distance) if self.boundary_distance else None,
                "nonconvex_events": len(self.nonconvex_at)}


def _box_distance(points: np.ndarray, domain) -> float:
    x0, x1, y0, y1 = domain
    d = np.minimum.reduce([points[:, 0] - x0, x1 - points[:, 0], points[:, 1] - y0, y1 - points[:, 1]])
    return float(d.min())


def kappa_bar_front(curve: FrontCurve) -> Tuple[float, bool]:
    """``max(kappa, 1/kappa, |d kappa / d theta|)`` over markers, plus a convexity flag."""
    k = curve.curvature()
    convex = bool(np.all(k > 0))
    if not convex:
        return np.inf, False
    ds = 0.5 * (curve.spacing() + np.roll(curve.spacing(), 1))
    dk_ds = (np.roll(k, -1) - np.roll(k, 1)) / (2 * ds)
    dk_dth = dk_ds / k
    return float(np.max(np.maximum.reduce([k, 1.0 / k, np.abs(dk_dth)]))), True


def kappa_bar_gauss(curve: GaussMapCurve) -> float:
    k = curve.kappa
    return float(np.max(np.maximum.reduce([k, 1.0 / k, np.abs(curve.kappa_theta())])))


def monitor_stopping(history, N: float, domain=(0.0, 1.0, 0.0, 1.0)) -> StoppingMonitor:
    """Scan ``(t, curve)`` pairs and report the first stopping event."""
    if len(history) == 0:
        raise ValueError("history is empty")
    mon = StoppingMonitor(float(N))
    for t, curve in history:
        if isinstance(curve, GaussMapCurve):
            kb = kappa_bar_gauss(curve) if np.all(curve.kappa > 0) else np.inf
            pts = reconstruct_curve(curve).points
            convex = bool(np.all(curve.kappa > 0))
        else:
            kb, convex = kappa_bar_front(curve)
            pts = curve.points
        mon.record(t, kb, _box_distance(pts, domain), convex)
    return mon


def monitor_circle(times, radii, N: float, center=(0.5, 0.5), domain=(0.0, 1.0, 0.0, 1.0)) -> StoppingMonitor:
    """Stopping monitor for a circle given by its radius history."""
    mon = StoppingMonitor(float(N))
    x0, x1, y0, y1 = domain
    room = min(center[0] - x0, x1 - center[0], center[1] - y0, y1 - center[1])
    for t, R in zip(times, radii):
        if not np.isfinite(R) or R <= 0:
            mon.record(t, np.inf, room, False)
            continue
        mon.record(t, max(1.0 / R, R), room - R)
    return mon
