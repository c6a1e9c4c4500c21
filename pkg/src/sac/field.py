"""Explicit finite differences for ``u_t = Lap u + f(u)/eps^2 + xi(t)/eps``.

Two geometries are supported: a rectangle with mirror Neumann boundaries and
a radial grid ``[0, r_max]`` for radially symmetric data.  Polynomial
reaction terms run through fused numba kernels that keep the whole time loop
compiled; any other ``f`` falls back to a numpy loop with identical
arithmetic order per node.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numba
import numpy as np

from .errors import BlowUp
from .noise import MildNoisePath
from .reaction import Bistable


_MAX_DEGREE = 5  # compiled kernels evaluate polynomials up to this degree
_CHECK_EVERY = 16  # steps between range checks inside compiled loops

# ---------------------------------------------------------------- geometry


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    h: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.nx < 16 or self.ny < 16:
            raise ValueError("grids need at least 16 nodes per axis")
        if self.h <= 0:
            raise ValueError("spacing must be positive")

    @classmethod
    def unit_square(cls, n: int = 256) -> "Grid2D":
        return cls(n, n, 1.0 / (n - 1))

    @property
    def extent(self):
        return (self.x0, self.x0 + (self.nx - 1) * self.h, self.y0, self.y0 + (self.ny - 1) * self.h)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def describe(self) -> dict:
        return {"kind": "rect", "nx": self.nx, "ny": self.ny, "h": self.h, "x0": self.x0, "y0": self.y0}


@dataclass(frozen=True)
class RadialGrid:
    nr: int
    r_max: float

    @property
    def h(self) -> float:
        return self.r_max / (self.nr - 1)

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(self.nr)

    def describe(self) -> dict:
        return {"kind": "radial", "nr": self.nr, "r_max": self.r_max}


@dataclass
class Field2D:
    grid: Grid2D
    u: np.ndarray
    time: float = 0.0

    def copy(self) -> "Field2D":
        return Field2D(self.grid, self.u.copy(), self.time)


@dataclass
class FieldRadial:
    grid: RadialGrid
    u: np.ndarray
    time: float = 0.0

    @property
    def nr(self) -> int:
        return self.grid.nr

    @property
    def r_max(self) -> float:
        return self.grid.r_max

    def copy(self) -> "FieldRadial":
        return FieldRadial(self.grid, self.u.copy(), self.time)


# ---------------------------------------------------------------- config


def reaction_dt_cap(f: Bistable, eps: float) -> float:
    """``0.2 eps^2 / max|f'|`` on ``[a_minus - 1, a_plus + 1]``."""
    return 0.2 * eps**2 / f.sup_abs("fprime", pad=1.0)


def max_dt(f: Bistable, eps: float, h: float) -> float:
    """Admissible explicit step: ``min(h^2/4, 0.2 eps^2 / max|f'|)``."""
    return min(h * h / 4.0, reaction_dt_cap(f, eps))


def stable_dt(f: Bistable, eps: float, grid, safety: float = 1.0) -> float:
    """Largest step that keeps the explicit scheme monotone.

    The five-point stencil needs ``dt <= h^2/8`` for a nonnegative diagonal
    (``h^2/4`` sits on the edge of linear stability), the radial stencil
    needs ``h^2/4`` because of the ``4/h^2`` weight at the origin.
    """
    h = grid.h
    geo = h * h / 8.0 if isinstance(grid, Grid2D) else h * h / 4.0
    return safety * min(geo, reaction_dt_cap(f, eps))


@dataclass
class SimConfig:
    eps: float
    f: Bistable
    dt: float
    t_end: float
    grid: Union[Grid2D, RadialGrid]
    initial: dict = field(default_factory=lambda: {"kind": "circle"})
    noise: Optional[MildNoisePath] = None
    snapshot_times: Sequence[float] = ()
    seed: Optional[int] = None
    record_every: int = 1

    def __post_init__(self):
        cap = max_dt(self.f, self.eps, self.grid.h)
        if self.dt > cap * (1 + 1e-12):
            raise ValueError(f"dt={self.dt:.3g} exceeds the stability cap {cap:.3g}")
        if self.noise is not None and self.noise.t_end < self.t_end - 1e-12:
            raise ValueError("noise path is shorter than the simulation horizon")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def describe(self) -> dict:
        return {
            "eps": self.eps, "dt": self.dt, "t_end": self.t_end, "n_steps": self.n_steps,
            "grid": self.grid.describe(), "initial": dict(self.initial), "f": self.f.describe(),
            "noise": None if self.noise is None else self.noise.sidecar(),
            "snapshot_times": [float(t) for t in self.snapshot_times], "seed": self.seed,
            "record_every": self.record_every,
        }


# ---------------------------------------------------------------- initial data


def _signed_profile(f: Bistable, s):
    """Map ``tanh`` of a signed coordinate to ``[a_minus, a_plus]`` with value ``a`` at 0."""
    am, a, ap = f.zeros
    t = np.tanh(s)
    return np.where(t >= 0, a + (ap - a) * t, a + (a - am) * t)


def initial_values(init: dict, grid, f: Bistable) -> np.ndarray:
    """Named initial conditions; the minus phase is placed inside closed curves."""
    kind = init.get("kind", "circle")
    w0 = float(init.get("w0", 0.1))
    if isinstance(grid, RadialGrid):
        r = grid.r
        if kind == "circle":
            return _signed_profile(f, (r - float(init.get("R0", 0.3))) / w0)
        if kind == "uniform":
            return np.full(grid.nr, float(init["value"]))
        raise ValueError(f"initial kind {kind!r} is not available on a radial grid")
    X, Y = grid.mesh()
    if kind == "circle":
        cx, cy = init.get("center", (0.5, 0.5))
        dist = np.hypot(X - cx, Y - cy) - float(init.get("R0", 0.3))
        return _signed_profile(f, dist / w0)
    if kind == "ellipse":
        cx, cy = init.get("center", (0.5, 0.5))
        ax, by = float(init.get("a", 0.3)), float(init.get("b", 0.2))
        rho = np.hypot((X - cx) / ax, (Y - cy) / by)
        return _signed_profile(f, (rho - 1.0) * min(ax, by) / w0)
    if kind == "planar":
        nx_, ny_ = init.get("normal", (1.0, 0.0))
        nrm = np.hypot(nx_, ny_)
        dist = ((X - float(init.get("x0", 0.5))) * nx_ + (Y - float(init.get("y0", 0.0))) * ny_) / nrm
        if init.get("profile") == "wave":
            eps = float(init["eps"])
            from .wave import solve_wave
            return solve_wave(f, 0.0)(dist / eps)
        return _signed_profile(f, dist / w0)
    if kind == "uniform":
        return np.full((grid.nx, grid.ny), float(init["value"]))
    if kind == "csv":
        data = np.loadtxt(init["path"], delimiter=",", skiprows=1, ndmin=2)
        return data[:, 2].reshape(grid.nx, grid.ny)
    raise ValueError(f"unknown initial condition {kind!r}")


def initial_state(cfg: SimConfig):
    u = initial_values(cfg.initial, cfg.grid, cfg.f)
    if isinstance(cfg.grid, RadialGrid):
        return FieldRadial(cfg.grid, u, 0.0)
    return Field2D(cfg.grid, u, 0.0)


# ---------------------------------------------------------------- stencils


def laplacian_neumann(phi: Field2D) -> Field2D:
    """Five-point Laplacian with ghost nodes mirrored across the boundary."""
    u = phi.u
    p = np.pad(u, 1, mode="reflect")
    lap = (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * u) / phi.grid.h**2
    return Field2D(phi.grid, lap, phi.time)


def laplacian_radial(u: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(u)
    n = u.size
    out[0] = 4.0 * (u[1] - u[0]) / h**2
    i = np.arange(1, n - 1)
    out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2 + (u[2:] - u[:-2]) / (2.0 * i * h * h)
    out[-1] = 2.0 * (u[-2] - u[-1]) / h**2
    return out


def _poly_coeffs(f: Bistable) -> Optional[np.ndarray]:
    """Coefficients padded to degree five, or ``None`` for the numpy fallback."""
    if f.poly is None or len(f.poly) > _MAX_DEGREE + 1:
        return None
    c = np.zeros(_MAX_DEGREE + 1)
    c[: len(f.poly)] = f.poly
    return c


def _noise_at(cfg: SimConfig, t_mid) -> np.ndarray:
    if cfg.noise is None:
        return np.zeros_like(np.asarray(t_mid, dtype=float))
    return cfg.noise.xi(t_mid)


def step_ac(state: Field2D, cfg: SimConfig) -> Field2D:
    """One forward-Euler step with the noise taken at the step midpoint."""
    xi = float(_noise_at(cfg, state.time + 0.5 * cfg.dt))
    lap = laplacian_neumann(state).u
    u = state.u + cfg.dt * (lap + cfg.f.f(state.u) / cfg.eps**2 + xi / cfg.eps)
    _guard(u, cfg.f, state.time + cfg.dt)
    return Field2D(state.grid, u, state.time + cfg.dt)


def step_ac_radial(state: FieldRadial, cfg: SimConfig) -> FieldRadial:
    xi = float(_noise_at(cfg, state.time + 0.5 * cfg.dt))
    lap = laplacian_radial(state.u, state.grid.h)
    u = state.u + cfg.dt * (lap + cfg.f.f(state.u) / cfg.eps**2 + xi / cfg.eps)
    _guard(u, cfg.f, state.time + cfg.dt)
    return FieldRadial(state.grid, u, state.time + cfg.dt)


def _guard(u, f: Bistable, t):
    lo, hi = f.a_minus - 2.0, f.a_plus + 2.0
    if not np.all(np.isfinite(u)) or u.min() < lo or u.max() > hi:
        raise BlowUp(f"solution left [{lo}, {hi}] at t={t:.6g}")


@numba.njit(cache=True, inline="always")
def _poly5(v, c):
    return ((((c[5] * v + c[4]) * v + c[3]) * v + c[2]) * v + c[1]) * v + c[0]


@numba.njit(cache=True)
def _rect_step(a, b, c, dt, inv_h2, inv_e2, src):
    nx, ny = a.shape
    c0, c1, c2, c3, c4, c5 = c[0], c[1], c[2], c[3], c[4], c[5]
    for i in range(nx):
        im = i - 1 if i > 0 else 1
        ip = i + 1 if i < nx - 1 else nx - 2
        ai = a[i]
        am_ = a[im]
        ap_ = a[ip]
        bi = b[i]
        for j in range(1, ny - 1):
            v = ai[j]
            fv = ((((c5 * v + c4) * v + c3) * v + c2) * v + c1) * v + c0
            lap = (ap_[j] + am_[j] + ai[j + 1] + ai[j - 1] - 4.0 * v) * inv_h2
            bi[j] = v + dt * (lap + fv * inv_e2 + src)
        for j in (0, ny - 1):
            jn = 1 if j == 0 else ny - 2
            v = ai[j]
            lap = (ap_[j] + am_[j] + 2.0 * ai[jn] - 4.0 * v) * inv_h2
            bi[j] = v + dt * (lap + _poly5(v, c) * inv_e2 + src)


@numba.njit(cache=True)
def _in_range(a, lo, hi):
    mn = np.min(a)
    mx = np.max(a)
    return mn >= lo and mx <= hi


@numba.njit(cache=True)
def _run_rect(u, coef, h, dt, eps, forcing, lo, hi, snap_steps, snaps):
    """Advance ``len(forcing)`` steps; ``forcing[k] = xi(t_k + dt/2)``."""
    a = u.copy()
    b = np.empty_like(a)
    inv_h2 = 1.0 / (h * h)
    inv_e2 = 1.0 / (eps * eps)
    inv_e = 1.0 / eps
    s = 0
    while s < snap_steps.size and snap_steps[s] == 0:
        snaps[s] = a
        s += 1
    n = forcing.size
    for k in range(n):
        _rect_step(a, b, coef, dt, inv_h2, inv_e2, forcing[k] * inv_e)
        a, b = b, a
        if ((k + 1) % _CHECK_EVERY == 0 or k == n - 1) and not _in_range(a, lo, hi):
            return a, k + 1
        while s < snap_steps.size and snap_steps[s] == k + 1:
            snaps[s] = a
            s += 1
    return a, -1


@numba.njit(cache=True)
def _crossing(u, h, level):
    n = u.size
    for i in range(n - 1):
        if u[i] < level and u[i + 1] >= level:
            return (i + (level - u[i]) / (u[i + 1] - u[i])) * h
    return np.nan


@numba.njit(cache=True)
def _run_radial(u, coef, h, dt, eps, forcing, lo, hi, level, rec_every, radii, snap_steps, snaps):
    n = u.size
    a = u.copy()
    b = np.empty_like(a)
    inv_h2 = 1.0 / (h * h)
    inv_e2 = 1.0 / (eps * eps)
    inv_e = 1.0 / eps
    radii[0] = _crossing(a, h, level)
    s = 0
    while s < snap_steps.size and snap_steps[s] == 0:
        snaps[s] = a
        s += 1
    nsteps = forcing.size
    for k in range(nsteps):
        src = forcing[k] * inv_e
        v = a[0]
        b[0] = v + dt * (4.0 * (a[1] - v) * inv_h2 + _poly5(v, coef) * inv_e2 + src)
        for i in range(1, n - 1):
            v = a[i]
            lap = (a[i + 1] - 2.0 * v + a[i - 1]) * inv_h2 + (a[i + 1] - a[i - 1]) / (2.0 * i) * inv_h2
            b[i] = v + dt * (lap + _poly5(v, coef) * inv_e2 + src)
        v = a[n - 1]
        b[n - 1] = v + dt * (2.0 * (a[n - 2] - v) * inv_h2 + _poly5(v, coef) * inv_e2 + src)
        a, b = b, a
        if (k + 1) % rec_every == 0:
            radii[(k + 1) // rec_every] = _crossing(a, h, level)
        if ((k + 1) % _CHECK_EVERY == 0 or k == nsteps - 1) and not _in_range(a, lo, hi):
            return a, k + 1
        while s < snap_steps.size and snap_steps[s] == k + 1:
            snaps[s] = a
            s += 1
    return a, -1


# ---------------------------------------------------------------- driver


@dataclass
class Trajectory:
    snapshots: List[Union[Field2D, FieldRadial]]
    manifest: dict
    final: Union[Field2D, FieldRadial, None] = None
    radius_t: Optional[np.ndarray] = None
    radius: Optional[np.ndarray] = None
    wall_time: float = 0.0

    def at(self, t: float, tol: Optional[float] = None):
        """Snapshot closest to ``t`` (raises ``KeyError`` beyond ``tol``)."""
        times = np.array([s.time for s in self.snapshots])
        i = int(np.argmin(np.abs(times - t)))
        if tol is not None and abs(times[i] - t) > tol:
            raise KeyError(f"no snapshot within {tol} of t={t}")
        return self.snapshots[i]


def snapshot_steps(times: Sequence[float], dt: float, n_steps: int) -> np.ndarray:
    steps = np.array(sorted({min(max(int(round(t / dt)), 0), n_steps) for t in times}), dtype=np.int64)
    return steps


def run_simulation(cfg: SimConfig, state0=None) -> Trajectory:
    """Run ``cfg`` from its named initial condition (or ``state0``).

    Snapshots are stored at the steps nearest to ``cfg.snapshot_times``.
    Radial runs also record the first ``a``-crossing radius every
    ``cfg.record_every`` steps.
    """
    state = initial_state(cfg) if state0 is None else state0.copy()
    n = cfg.n_steps
    steps = snapshot_steps(cfg.snapshot_times, cfg.dt, n) if len(cfg.snapshot_times) else np.zeros(0, np.int64)
    if cfg.t_end == 0 and steps.size == 0:
        steps = np.zeros(1, np.int64)
    t0 = state.time
    forcing = np.ascontiguousarray(_noise_at(cfg, t0 + (np.arange(n) + 0.5) * cfg.dt), dtype=np.float64)
    f = cfg.f
    lo, hi = f.a_minus - 2.0, f.a_plus + 2.0
    coef = _poly_coeffs(f)
    radial = isinstance(state, FieldRadial)
    snaps = np.empty((steps.size,) + state.u.shape)
    radii = None
    tic = _time.perf_counter()
    if coef is not None:
        u0 = np.ascontiguousarray(state.u, dtype=np.float64)
        if radial:
            radii = np.full(n // cfg.record_every + 1, np.nan)
            final, bad = _run_radial(u0, coef, cfg.grid.h, cfg.dt, cfg.eps, forcing, lo, hi, f.a,
                                     cfg.record_every, radii, steps, snaps)
        else:
            final, bad = _run_rect(u0, coef, cfg.grid.h, cfg.dt, cfg.eps, forcing, lo, hi, steps, snaps)
        if bad >= 0:
            raise BlowUp(f"solution left [{lo}, {hi}] at step {bad}")
    else:
        final, radii = _run_python(state, cfg, forcing, steps, snaps)
    wall = _time.perf_counter() - tic
    cls = FieldRadial if radial else Field2D
    snapshots = [cls(state.grid, snaps[i].copy(), t0 + steps[i] * cfg.dt) for i in range(steps.size)]
    manifest = {"config": cfg.describe(), "steps": n, "t0": t0,
                "snapshot_steps": [int(s) for s in steps]}
    traj = Trajectory(snapshots, manifest, cls(state.grid, final, t0 + n * cfg.dt), wall_time=wall)
    if radial:
        traj.radius_t = t0 + np.arange(radii.size) * cfg.record_every * cfg.dt
        traj.radius = radii
    return traj


def _run_python(state, cfg, forcing, steps, snaps):
    radial = isinstance(state, FieldRadial)
    u = state.u.copy()
    h = cfg.grid.h
    radii = np.full(cfg.n_steps // cfg.record_every + 1, np.nan) if radial else None
    if radial:
        radii[0] = _crossing(u, h, cfg.f.a)
    s = 0
    while s < steps.size and steps[s] == 0:
        snaps[s] = u
        s += 1
    for k in range(forcing.size):
        if radial:
            lap = laplacian_radial(u, h)
        else:
            lap = laplacian_neumann(Field2D(state.grid, u)).u
        u = u + cfg.dt * (lap + cfg.f.f(u) / cfg.eps**2 + forcing[k] / cfg.eps)
        _guard(u, cfg.f, state.time + (k + 1) * cfg.dt)
        if radial and (k + 1) % cfg.record_every == 0:
            radii[(k + 1) // cfg.record_every] = _crossing(u, h, cfg.f.a)
        while s < steps.size and steps[s] == k + 1:
            snaps[s] = u
            s += 1
    return u, radii
