"""Traveling waves ``m'' + c m' + f(m) + delta = 0`` connecting the outer zeros.

The speed is found by two-sided shooting: one branch leaves ``a_minus(delta)``
along its unstable direction, the other arrives at ``a_plus(delta)`` along its
stable direction, both stop on the plane ``m = a(delta)``, and Brent's method
zeroes the slope mismatch there.  The resulting profile is pinned by
``m(0) = a(delta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline, CubicSpline, RectBivariateSpline

from .errors import NoConnection, NotBistable, OutOfCalibratedRange, ShiftTooLarge
from .reaction import Bistable, bistable_shift_limit, require_balanced, shifted_zeros

_RTOL = 1e-12
_ATOL = 1e-14


@dataclass(eq=False)
class WaveProfile:
    delta: float
    z: np.ndarray
    m: np.ndarray
    m_z: np.ndarray
    c: float
    lambda_fit: float
    a_minus_delta: float
    a_delta: float
    a_plus_delta: float
    _spline: object = field(default=None, repr=False)

    @property
    def m_zz(self) -> np.ndarray:
        """Second derivative from the profile equation itself."""
        return -self.c * self.m_z - self._f(self.m) - self.delta

    _f: object = field(default=None, repr=False)

    def _hermite(self):
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.z, self.m, self.m_z)
        return self._spline

    def __call__(self, z):
        """Profile value; constant extension by the end states outside the grid."""
        z = np.asarray(z, dtype=float)
        out = self._hermite()(np.clip(z, self.z[0], self.z[-1]))
        out = np.where(z < self.z[0], self.a_minus_delta, out)
        return np.where(z > self.z[-1], self.a_plus_delta, out)

    def derivative(self, z):
        z = np.asarray(z, dtype=float)
        out = self._hermite().derivative()(np.clip(z, self.z[0], self.z[-1]))
        return np.where((z < self.z[0]) | (z > self.z[-1]), 0.0, out)

    def sidecar(self) -> dict:
        return {"delta": self.delta, "c": self.c, "lambda_fit": self.lambda_fit,
                "zeros": [self.a_minus_delta, self.a_delta, self.a_plus_delta],
                "Z": float(self.z[-1]), "n_pts": int(self.z.size)}

    def to_csv(self, path) -> None:
        from .harness.io import write_csv, write_json
        path = Path(path)
        write_csv(path, ["z", "m", "m_z"], zip(self.z, self.m, self.m_z))
        write_json(path.with_suffix(".json"), self.sidecar())


def delta_max(f: Bistable, margin: float = 0.8) -> float:
    """Largest admissible ``|delta|``: a fraction of the distance to loss of bistability."""
    lo, hi = bistable_shift_limit(f)
    return margin * min(-lo, hi)


def _branches(f: Bistable, delta: float, c: float, zeros, s0: float, dense: bool = False):
    am, a, ap = zeros
    g = lambda u: f.f(u) + delta
    rhs = lambda z, y: (y[1], -c * y[1] - g(y[0]))
    hit = lambda z, y: y[0] - a
    hit.terminal = True
    span = 200.0

    lam_l = 0.5 * (-c + np.sqrt(c * c - 4.0 * f.fprime(am)))
    hit.direction = 1.0
    left = integrate.solve_ivp(rhs, (0.0, span), (am + s0, lam_l * s0), method="DOP853",
                               rtol=_RTOL, atol=_ATOL, events=hit, dense_output=dense)
    lam_r = 0.5 * (-c - np.sqrt(c * c - 4.0 * f.fprime(ap)))
    hit.direction = -1.0
    right = integrate.solve_ivp(rhs, (0.0, -span), (ap - s0, -lam_r * s0), method="DOP853",
                                rtol=_RTOL, atol=_ATOL, events=hit, dense_output=dense)
    if left.t_events[0].size == 0 or right.t_events[0].size == 0:
        return None
    return left, right, lam_l, lam_r


def _mismatch(f, delta, c, zeros, s0):
    br = _branches(f, delta, c, zeros, s0)
    if br is None:
        return None
    left, right, _, _ = br
    return float(left.y_events[0][0][1] - right.y_events[0][0][1])


def _find_speed(f, delta, zeros, s0):
    scale = np.sqrt(max(abs(f.fprime(zeros[0])), abs(f.fprime(zeros[2]))))
    g = lambda c: _mismatch(f, delta, c, zeros, s0)
    if g(0.0) == 0.0:
        return 0.0
    bound = 0.5 * scale
    for _ in range(12):
        lo, hi = g(-bound), g(bound)
        if lo is not None and hi is not None and lo > 0 > hi:
            break
        bound *= 2.0
    else:
        raise NoConnection(f"could not bracket the wave speed for delta={delta}")
    return optimize.brentq(g, -bound, bound, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _fit_tail(z, m, target):
    gap = np.abs(target - m)
    sel = (gap > 1e-7) & (gap < 1e-3)
    if sel.sum() < 10:
        return np.nan
    slope, _ = np.polyfit(np.abs(z[sel]), np.log(gap[sel]), 1)
    return float(-slope)


def solve_wave(f: Bistable, delta: float = 0.0, Z: Optional[float] = None, n_pts: Optional[int] = None,
               tol: float = 1e-8, dz: float = 0.0025) -> WaveProfile:
    """Traveling wave for ``f + delta`` on a uniform grid over ``[-Z, Z]``."""
    if abs(delta) > delta_max(f, 1.0):
        raise NotBistable(f"f + {delta} is not bistable")
    try:
        zeros = shifted_zeros(f, delta) if delta != 0.0 else tuple(f.zeros)
    except ShiftTooLarge as exc:
        raise NotBistable(str(exc)) from exc
    am, a, ap = zeros
    s0 = 1e-10 * (ap - am)
    c = _find_speed(f, delta, zeros, s0)
    left, right, lam_l, lam_r = _branches(f, delta, c, zeros, s0, dense=True)
    zl, zr = left.t_events[0][0], right.t_events[0][0]

    def profile(zz):
        zz = np.asarray(zz, dtype=float)
        m = np.empty_like(zz)
        mz = np.empty_like(zz)
        neg = zz <= 0.0
        # left branch, local time zl + z; before its start use the linear tail
        tl = zl + zz[neg]
        inside = tl >= 0.0
        mneg = np.empty(tl.size)
        pneg = np.empty(tl.size)
        if inside.any():
            yl = left.sol(tl[inside])
            mneg[inside], pneg[inside] = yl[0], yl[1]
        tail = s0 * np.exp(lam_l * tl[~inside])
        mneg[~inside], pneg[~inside] = am + tail, lam_l * tail
        m[neg], mz[neg] = mneg, pneg
        tr = zr + zz[~neg]
        inside = tr <= 0.0
        mpos = np.empty(tr.size)
        ppos = np.empty(tr.size)
        if inside.any():
            yr = right.sol(tr[inside])
            mpos[inside], ppos[inside] = yr[0], yr[1]
        tail = s0 * np.exp(lam_r * tr[~inside])
        mpos[~inside], ppos[~inside] = ap - tail, -lam_r * tail
        m[~neg], mz[~neg] = mpos, ppos
        return m, mz

    if Z is None:
        Z = 10.0 / np.sqrt(min(abs(f.fprime(am)), abs(f.fprime(ap))))
        for _ in range(8):
            mb, _ = profile(np.array([-Z, Z]))
            if abs(mb[0] - am) < tol and abs(ap - mb[1]) < tol:
                break
            Z *= 2.0
    if n_pts is None:
        n_pts = 2 * int(np.ceil(Z / dz)) + 1
    z = np.linspace(-Z, Z, n_pts)
    z[n_pts // 2] = 0.0 if n_pts % 2 == 1 else z[n_pts // 2]
    m, mz = profile(z)
    lam = np.nanmin([_fit_tail(z[z > 0], m[z > 0], ap), _fit_tail(z[z < 0], m[z < 0], am)])
    prof = WaveProfile(float(delta), z, m, mz, float(c), lam, float(am), float(a), float(ap))
    prof._f = f.f
    return prof


def wave_speed_curve(f: Bistable, deltas: Sequence[float]):
    """``[(delta, c(delta)), ...]`` by direct shooting at each delta."""
    out = []
    for d in deltas:
        zeros = shifted_zeros(f, d) if d != 0.0 else tuple(f.zeros)
        s0 = 1e-10 * (zeros[2] - zeros[0])
        out.append((float(d), float(_find_speed(f, float(d), zeros, s0))))
    return out


def c0(f: Bistable) -> float:
    """``(a_plus - a_minus) / int sqrt(2F)`` by adaptive quadrature."""
    require_balanced(f)
    am, _, ap = f.zeros
    integrand = lambda u: np.sqrt(max(2.0 * f.F(u), 0.0))
    # sqrt(2F) behaves like |u - a_pm| near the wells; splitting there keeps quad accurate
    pad = 0.05 * (ap - am)
    pieces = [(am, am + pad), (am + pad, ap - pad), (ap - pad, ap)]
    total = sum(integrate.quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
                for lo, hi in pieces)
    return (ap - am) / total


class SpeedCurve:
    """Cubic-spline interpolant of ``c(delta)`` on ``[-delta_cal, delta_cal]``."""

    def __init__(self, f: Bistable, delta_cal: Optional[float] = None, n: int = 41):
        self.f = f
        self.delta_cal = float(delta_cal if delta_cal is not None else delta_max(f))
        self.deltas = np.linspace(-self.delta_cal, self.delta_cal, n)
        self.speeds = np.array([c for _, c in wave_speed_curve(f, self.deltas)])
        self._spline = CubicSpline(self.deltas, self.speeds)

    def __call__(self, delta):
        d = np.asarray(delta, dtype=float)
        if np.any(np.abs(d) > self.delta_cal * (1 + 1e-12)):
            raise OutOfCalibratedRange(f"|delta| exceeds the calibrated range {self.delta_cal}")
        return self._spline(d)


@lru_cache(maxsize=16)
def speed_curve(f: Bistable, delta_cal: Optional[float] = None, n: int = 41) -> SpeedCurve:
    return SpeedCurve(f, delta_cal, n)


def c_of(f: Bistable, delta, delta_cal: Optional[float] = None):
    """Cached interpolated wave speed."""
    return speed_curve(f, delta_cal)(delta)


class WaveFamily:
    """Profiles ``m(z; delta)`` on a common z-grid for a set of deltas.

    Values between deltas come from a bicubic spline; ``m_delta`` is its
    derivative in delta.  Outside ``[-Z, Z]`` the end states are used.
    """

    def __init__(self, f: Bistable, delta_cal: float, n_delta: int = 21, Z: Optional[float] = None,
                 dz: float = 0.01):
        self.f = f
        self.delta_cal = float(delta_cal)
        if n_delta < 4:
            raise ValueError("need at least four deltas for the bicubic spline")
        self.deltas = np.linspace(-delta_cal, delta_cal, n_delta)
        first = solve_wave(f, 0.0)
        Zw = first.z[-1] if Z is None else Z
        n_pts = 2 * int(np.ceil(Zw / dz)) + 1
        self.profiles = [solve_wave(f, float(d), Z=Zw, n_pts=n_pts) for d in self.deltas]
        self.z = self.profiles[0].z
        self.Z = float(Zw)
        M = np.array([p.m for p in self.profiles])
        self._m = RectBivariateSpline(self.deltas, self.z, M, kx=3, ky=3, s=0)
        self._am = CubicSpline(self.deltas, [p.a_minus_delta for p in self.profiles])
        self._ap = CubicSpline(self.deltas, [p.a_plus_delta for p in self.profiles])
        self._a = CubicSpline(self.deltas, [p.a_delta for p in self.profiles])
        self._c = CubicSpline(self.deltas, [p.c for p in self.profiles])

    def _check(self, delta):
        if np.any(np.abs(delta) > self.delta_cal * (1 + 1e-12)):
            raise OutOfCalibratedRange(f"|delta| exceeds {self.delta_cal}")

    def ends(self, delta):
        return self._am(delta), self._a(delta), self._ap(delta)

    def speed(self, delta):
        self._check(delta)
        return self._c(delta)

    def _eval(self, z, delta, dz=0, dd=0):
        z = np.asarray(z, dtype=float)
        delta = np.broadcast_to(np.asarray(delta, dtype=float), z.shape)
        self._check(delta)
        zc = np.clip(z, -self.Z, self.Z)
        val = self._m.ev(delta, zc, dx=dd, dy=dz)
        if dz == 0:
            am, ap = self._am(delta, dd), self._ap(delta, dd)
            val = np.where(z < -self.Z, am, np.where(z > self.Z, ap, val))
        else:
            val = np.where(np.abs(z) > self.Z, 0.0, val)
        return val

    def m(self, z, delta):
        return self._eval(z, delta)

    def m_z(self, z, delta):
        return self._eval(z, delta, dz=1)

    def m_zz(self, z, delta):
        return self._eval(z, delta, dz=2)

    def m_delta(self, z, delta):
        return self._eval(z, delta, dd=1)
