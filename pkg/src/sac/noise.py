"""Mild noise paths: mollified Brownian derivatives and rescaled stationary processes.

Two families are provided.

* ``mn2``: the time derivative of a Brownian path convolved with a bump of
  width ``eps**gamma2``.  The path is piecewise linear between grid nodes, so
  the convolution integrals reduce to per-cell kernel moments computed once
  by Gauss-Legendre quadrature and applied with FFT convolutions.
* ``mn1``: ``eps**-gamma1 * xi(eps**(-2*gamma1) * t)`` for a bounded, smooth,
  stationary base ``xi`` built from a clipped Ornstein-Uhlenbeck path.

Every path is a pure function of its inputs and seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate, signal
from scipy.interpolate import CubicHermiteSpline

from .errors import InsufficientSupport, NegativeVarianceEstimate

# ---------------------------------------------------------------- mollifier


def _bump_raw(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


@lru_cache(maxsize=None)
def bump_mass() -> float:
    """Normalization of ``exp(-1/(1-s^2))`` on (-1, 1)."""
    val, _ = integrate.quad(lambda s: np.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0,
                            epsabs=1e-15, epsrel=1e-13, limit=200)
    return val


def bump(s):
    """Unit-mass symmetric bump supported on [-1, 1]."""
    return _bump_raw(s) / bump_mass()


def bump_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    one = 1.0 - si * si
    out[inside] = np.exp(-1.0 / one) * (-2.0 * si / one**2)
    return out / bump_mass()


def bump_second(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    one = 1.0 - si * si
    g1 = -2.0 * si / one**2
    g2 = -2.0 / one**2 - 8.0 * si * si / one**3
    out[inside] = np.exp(-1.0 / one) * (g1 * g1 + g2)
    return out / bump_mass()


def smooth_cutoff(t, width):
    """C-infinity step: 1 at t<=0 with zero slope there, 0 for t>=width."""
    t = np.asarray(t, dtype=float)
    x = np.clip(t / width, 0.0, 1.0)
    a = np.where(x < 1.0, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
    b = np.where(x > 0.0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    return a / (a + b)


def smooth_cutoff_prime(t, width):
    t = np.asarray(t, dtype=float)
    x = np.clip(t / width, 0.0, 1.0)
    inside = (x > 0.0) & (x < 1.0)
    out = np.zeros_like(x)
    xi = x[inside]
    a = np.exp(-1.0 / (1.0 - xi))
    b = np.exp(-1.0 / xi)
    da = -a / (1.0 - xi) ** 2
    db = b / xi**2
    out[inside] = (da * (a + b) - a * (da + db)) / (a + b) ** 2 / width
    return out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _cell_moments(width: float, dt: float):
    """Per-cell kernel integrals for a width-``width`` bump on a ``dt`` grid.

    Returns ``(j, G, H, D, E)`` where for cell ``[j dt, (j+1) dt]``:
    ``G = int rho_w``, ``H = int ((j+1)dt - u) rho_w``,
    ``D = rho_w((j+1)dt) - rho_w(j dt)`` and ``E`` the same for ``rho_w'``.
    """
    jmax = int(np.ceil(width / dt))
    j = np.arange(-jmax - 1, jmax + 1)
    lo = j * dt
    mid = lo + 0.5 * dt
    u = mid[:, None] + 0.5 * dt * _GL_X[None, :]
    rw = bump(u / width) / width
    G = 0.5 * dt * (rw * _GL_W).sum(axis=1)
    H = 0.5 * dt * (((lo + dt)[:, None] - u) * rw * _GL_W).sum(axis=1)
    node = bump(np.append(lo, lo[-1] + dt) / width) / width
    dnode = bump_prime(np.append(lo, lo[-1] + dt) / width) / width**2
    D = node[1:] - node[:-1]
    E = dnode[1:] - dnode[:-1]
    return j, G, H, D, E


# ---------------------------------------------------------------- Brownian


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Brownian samples on a uniform grid that contains ``t = 0`` as a node."""

    times: np.ndarray
    values: np.ndarray
    dt: float
    n_neg: int
    seed: Optional[int] = None

    @property
    def t_neg(self) -> float:
        return self.n_neg * self.dt

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def increments(self, t0: float = 0.0):
        """Increments on the positive branch starting at node ``t0``."""
        k0 = self.n_neg + int(round(t0 / self.dt))
        return np.diff(self.values[k0:])

    @classmethod
    def from_function(cls, fn: Callable, t_neg: float, t_end: float, dt: float):
        """Deterministic path with values ``fn(t) - fn(0)`` on the grid (for testing)."""
        n_neg = int(np.ceil(t_neg / dt - 1e-9))
        n_pos = int(np.ceil(t_end / dt - 1e-9))
        times = np.arange(-n_neg, n_pos + 1) * dt
        vals = np.asarray(fn(times), dtype=float) - float(fn(0.0))
        vals[n_neg] = 0.0
        return cls(times, vals, float(dt), n_neg, None)


def sample_brownian(t_neg: float, t_end: float, dt: float, seed: int) -> BrownianPath:
    """Two-sided Brownian path with independent streams for each time direction."""
    if dt <= 0 or t_end <= 0 or t_neg < 0:
        raise ValueError("need dt > 0, t_end > 0, t_neg >= 0")
    n_neg = int(np.ceil(t_neg / dt - 1e-9))
    n_pos = int(np.ceil(t_end / dt - 1e-9))
    pos_ss, neg_ss = np.random.SeedSequence(int(seed)).spawn(2)
    sd = np.sqrt(dt)
    w_pos = np.concatenate(([0.0], np.cumsum(np.random.default_rng(pos_ss).standard_normal(n_pos) * sd)))
    w_neg = np.concatenate(([0.0], np.cumsum(np.random.default_rng(neg_ss).standard_normal(n_neg) * sd)))
    values = np.concatenate((w_neg[::-1][:-1], w_pos))
    times = np.arange(-n_neg, n_pos + 1) * dt
    return BrownianPath(times, values, float(dt), n_neg, int(seed))


def mollifier_width(eps: float, gamma: float) -> float:
    return float(eps**gamma)


def _check_support(W: BrownianPath, width: float, t_end: Optional[float]):
    t_end = W.t_end - width if t_end is None else t_end
    if W.t_neg + 1e-12 < width or W.t_end + 1e-12 < t_end + width or t_end < 0:
        raise InsufficientSupport(
            f"path covers [{-W.t_neg}, {W.t_end}] but the window needs [{-width}, {t_end + width}]")
    return t_end


def _conv_window(data, kernel, j, n_out, offset):
    """``out[i] = sum_j kernel[j] * data[offset + i - j - 1]`` for ``i < n_out``."""
    full = signal.fftconvolve(data, kernel)
    # data index k = offset + i - jj - 1 with jj = j[idx]; full[k + idx] pairs data[k] with kernel[idx]
    start = offset - 1 - int(j[0])
    return full[start:start + n_out]


def mollify(W: BrownianPath, eps: float, gamma2: float, t_end: Optional[float] = None):
    """Samples of the mollified path on the non-negative grid nodes ``[0, t_end]``."""
    width = mollifier_width(eps, gamma2)
    t_end = _check_support(W, width, t_end)
    n_out = int(np.floor(t_end / W.dt + 1e-9)) + 1
    j, G, H, _, _ = _cell_moments(width, W.dt)
    slopes = np.diff(W.values) / W.dt
    # cell k covers [s_k, s_{k+1}]; node i is time index n_neg + i
    wv = _conv_window(W.values[:-1], G, j, n_out, W.n_neg)
    ws = _conv_window(slopes, H, j, n_out, W.n_neg)
    return np.arange(n_out) * W.dt, wv + ws


def _mn2_samples(W: BrownianPath, width: float, n_out: int):
    j, G, _, D, E = _cell_moments(width, W.dt)
    slopes = np.diff(W.values) / W.dt
    xi = _conv_window(slopes, G, j, n_out, W.n_neg)
    xi_dot = _conv_window(slopes, D, j, n_out, W.n_neg)
    return xi, xi_dot


# ---------------------------------------------------------------- stationary base


@dataclass(frozen=True, eq=False)
class StationaryBase:
    """Clipped Ornstein-Uhlenbeck process smoothed by a bump of fixed width.

    ``variance`` is the stationary variance of the underlying OU path; a zero
    variance (or zero clip level) gives the degenerate base ``xi = 0``.
    """

    ou_rate: float = 1.0
    clip_level: float = 3.0
    mollifier_width: float = 0.05
    seed: int = 0
    variance: float = 1.0
    ds: Optional[float] = None

    @property
    def step(self) -> float:
        return self.ds if self.ds is not None else self.mollifier_width / 32.0

    @property
    def derivative_bound(self) -> float:
        """Deterministic bound on ``|xi'|``: clip level times the L1 norm of the kernel slope."""
        s = np.linspace(-1, 1, 20001)
        l1 = np.trapezoid(np.abs(bump_prime(s)), s)
        return self.clip_level * l1 / self.mollifier_width

    def sample(self, s_end: float, stream: int = 0):
        """Return ``(s, xi, xi_dot)`` on a uniform grid over ``[0, s_end]``."""
        ds = self.step
        w = self.mollifier_width
        n = int(np.ceil(s_end / ds - 1e-9)) + 1
        s = np.arange(n) * ds
        if self.variance == 0.0 or self.clip_level == 0.0:
            z = np.zeros(n)
            return s, z, z.copy()
        m = int(np.ceil(w / ds))
        rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), int(stream)]))
        total = n + 2 * m
        phi = np.exp(-self.ou_rate * ds)
        innov = np.sqrt(self.variance * (1.0 - phi * phi))
        noise = rng.standard_normal(total)
        y = signal.lfilter([innov], [1.0, -phi], noise[1:], zi=[phi * np.sqrt(self.variance) * noise[0]])[0]
        y = np.concatenate(([np.sqrt(self.variance) * noise[0]], y))
        y = np.clip(y, -self.clip_level, self.clip_level)
        # Riemann-sum kernels sharing one mass factor, so xi_dot is the exact
        # derivative of the discrete convolution and constants are reproduced
        tau = np.arange(-m, m + 1) * ds
        raw = bump(tau / w)
        mass = raw.sum()
        k0 = raw / mass
        k1 = bump_prime(tau / w) / (w * mass)
        xi = np.convolve(y, k0, mode="valid")
        xi_dot = np.convolve(y, k1, mode="valid")
        return s, xi[:n], xi_dot[:n]


# ---------------------------------------------------------------- mild noise path


@dataclass(eq=False)
class MildNoisePath:
    """A sampled realization of the mild noise with Hermite interpolation between samples."""

    kind: str
    eps: float
    gamma: float
    t: np.ndarray
    xi_samples: np.ndarray
    xi_dot_samples: np.ndarray
    seed: Optional[int] = None
    base: object = None
    M: Optional[float] = None
    zeroed: bool = False
    _rate: float = 1.0
    _amp: float = 1.0
    _base_interp: object = field(default=None, repr=False)
    _interp: object = field(default=None, repr=False)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def _spline(self):
        if self._interp is None:
            self._interp = CubicHermiteSpline(self.t, self.xi_samples, self.xi_dot_samples)
        return self._interp

    def xi(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.t_end * (1 + 1e-12)):
            raise InsufficientSupport("noise evaluated outside its sampled window")
        if self._base_interp is not None and not self.zeroed:
            return self._amp * self._base_interp(self._rate * t)
        return self._spline()(t)

    def xi_dot(self, t):
        t = np.asarray(t, dtype=float)
        if self._base_interp is not None and not self.zeroed:
            return (self._amp * self._rate) * self._base_interp.derivative()(self._rate * t)
        return self._spline().derivative()(t)

    def midpoints(self, dt: float, n_steps: int, t0: float = 0.0):
        """Noise at step midpoints ``t0 + (k + 1/2) dt`` for ``k < n_steps``."""
        return self.xi(t0 + (np.arange(n_steps) + 0.5) * dt)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for arr in (self.t, self.xi_samples, self.xi_dot_samples):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()[:16]

    def with_zero_start(self, cutoff_width: Optional[float] = None) -> "MildNoisePath":
        """Copy with ``xi(0)`` removed through a smooth cutoff near ``t = 0``."""
        width = cutoff_width if cutoff_width is not None else 4.0 * (self.t[1] - self.t[0]) * 16
        x0 = float(self.xi_samples[0])
        xi = self.xi_samples - x0 * smooth_cutoff(self.t, width)
        xd = self.xi_dot_samples - x0 * smooth_cutoff_prime(self.t, width)
        return MildNoisePath(self.kind, self.eps, self.gamma, self.t, xi, xd, self.seed,
                             self.base, self.M, True)

    def sidecar(self) -> dict:
        return {"kind": self.kind, "eps": self.eps, "gamma": self.gamma, "seed": self.seed,
                "M": self.M, "zeroed": self.zeroed, "checksum": self.checksum()}

    def to_csv(self, path) -> None:
        from .harness.io import write_csv, write_json
        path = Path(path)
        write_csv(path, ["t", "xi", "xi_dot"], zip(self.t, self.xi_samples, self.xi_dot_samples))
        write_json(path.with_suffix(".json"), self.sidecar())

    @classmethod
    def from_csv(cls, path) -> "MildNoisePath":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(meta["kind"], meta["eps"], meta["gamma"], data[:, 0], data[:, 1], data[:, 2],
                   meta.get("seed"), None, meta.get("M"), meta.get("zeroed", False))


def zero_noise(t_end: float, n: int = 2) -> MildNoisePath:
    t = np.linspace(0.0, t_end, n)
    return MildNoisePath("none", 0.0, 0.0, t, np.zeros(n), np.zeros(n))


def mn2_noise(W: BrownianPath, eps: float, gamma2: float, t_end: Optional[float] = None) -> MildNoisePath:
    """Derivative of the mollified Brownian path, sampled on the Brownian grid."""
    if not 0.0 < gamma2 < 2.0 / 3.0:
        raise ValueError("gamma2 must lie in (0, 2/3)")
    width = mollifier_width(eps, gamma2)
    if t_end is not None:
        # round up to a grid node so the samples cover the whole requested window
        t_end = np.ceil(t_end / W.dt - 1e-9) * W.dt
    t_end = _check_support(W, width, t_end)
    n_out = int(np.floor(t_end / W.dt + 1e-9)) + 1
    xi, xi_dot = _mn2_samples(W, width, n_out)
    t = np.arange(n_out) * W.dt
    return MildNoisePath("MN2", float(eps), float(gamma2), t, xi, xi_dot, W.seed, W)


def make_mn2(eps: float, gamma2: float, t_end: float, seed: int, resolution: int = 128) -> MildNoisePath:
    """Sample a Brownian path at ``width / resolution`` and build the MN2 noise on ``[0, t_end]``."""
    width = mollifier_width(eps, gamma2)
    dt = width / resolution
    W = sample_brownian(width + 2 * dt, t_end + width + 2 * dt, dt, seed)
    return mn2_noise(W, eps, gamma2, t_end)


def mn1_noise(base: StationaryBase, eps: float, gamma1: float, t_end: float, stream: int = 0) -> MildNoisePath:
    """Rescaled stationary noise ``eps**-gamma1 * xi(eps**(-2 gamma1) t)`` on ``[0, t_end]``."""
    if not 0.0 < gamma1 < 1.0 / 3.0:
        raise ValueError("gamma1 must lie in (0, 1/3)")
    rate = eps ** (-2.0 * gamma1)
    amp = eps ** (-gamma1)
    s, xb, xbd = base.sample(rate * t_end + base.step, stream)
    base_interp = CubicHermiteSpline(s, xb, xbd)
    t = s / rate
    path = MildNoisePath("MN1", float(eps), float(gamma1), t, amp * xb, amp * rate * xbd,
                         base.seed, base, base.clip_level, _rate=rate, _amp=amp,
                         _base_interp=base_interp)
    return path


# ---------------------------------------------------------------- statistics


def alpha0(base: StationaryBase, n_paths: int = 200, horizon: float = 10.0,
           path_length: Optional[float] = None):
    """Estimate ``sqrt(2 * int_0^horizon C(t) dt)`` from empirical autocovariances.

    Returns ``(alpha0, standard_error)``.
    """
    if base.variance == 0.0 or base.clip_level == 0.0:
        return 0.0, 0.0
    length = path_length if path_length is not None else 20.0 * horizon
    ds = base.step
    lag = int(round(horizon / ds))
    integrals = np.empty(n_paths)
    for p in range(n_paths):
        _, x, _ = base.sample(length, stream=p)
        x = x - x.mean()
        n = x.size
        fx = np.fft.rfft(x, 2 * n)
        ac = np.fft.irfft(fx * np.conj(fx))[: lag + 1] / (n - np.arange(lag + 1))
        integrals[p] = np.trapezoid(ac, dx=ds)
    mean = float(integrals.mean())
    if mean < 0:
        raise NegativeVarianceEstimate("autocovariance integral is negative; increase the horizon")
    a = np.sqrt(2.0 * mean)
    se_sq = 2.0 * integrals.std(ddof=1) / np.sqrt(n_paths)
    se = se_sq / (2.0 * a) if a > 0 else 0.0
    return float(a), float(se)


def sup_abs_mn2(eps: float, gamma2: float, t_end: float, seeds, resolution: int = 32):
    """Sup over ``[0, t_end]`` of ``|xi|`` for each seed."""
    out = []
    for s in seeds:
        path = make_mn2(eps, gamma2, t_end, int(s), resolution=resolution)
        out.append(float(np.max(np.abs(path.xi_samples))))
    return np.array(out)


def fit_sup_exponent(eps_list, gamma2: float = 0.5, n_paths: int = 200, t_end: float = 1.0,
                     seed: int = 0, resolution: int = 32) -> dict:
    """Fit ``sup|xi| ~ eps^(-k) |ln eps|^(1/2)`` over an eps sweep.

    The log factor is divided out before a least-squares fit of the log-mean
    sup against ``log eps``; ``k`` should be close to ``gamma2 / 2``.
    """
    eps_list = [float(e) for e in eps_list]
    means, ses = [], []
    for i, eps in enumerate(eps_list):
        seeds = [seed * 1_000_003 + i * 100_003 + k for k in range(n_paths)]
        sups = sup_abs_mn2(eps, gamma2, t_end, seeds, resolution)
        scaled = sups / np.sqrt(abs(np.log(eps)))
        means.append(float(scaled.mean()))
        ses.append(float(scaled.std(ddof=1) / np.sqrt(n_paths)))
    x = np.log(eps_list)
    y = np.log(means)
    slope, intercept = np.polyfit(x, y, 1)
    return {"eps": eps_list, "mean_scaled_sup": means, "stderr": ses,
            "exponent": float(-slope), "M_fit": float(np.exp(intercept)), "target": gamma2 / 2}
