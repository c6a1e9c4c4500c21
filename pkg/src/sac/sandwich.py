"""Wave-shaped comparison functions around a moving reference front.

The pair is

    u_pm(x, t) = m((d(x, t) +- eps p(t)) / eps; eps xi(t)) +- q(t)

with ``p = -exp(-beta t / eps^2) + exp(L t) + K`` and ``q = sigma eps^2 p'``.
``d`` is a smoothed signed distance to the reference front (negative inside).

:func:`certified_residual` evaluates the operator
``L u = u_t - lap u - f(u)/eps^2 - xi/eps`` on the pair through its exact
four-term split.  :func:`residual_check` recomputes it by finite differences on
a grid, which is an independent check.  :func:`sandwich_check` compares a
simulated trajectory against the pair node by node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .errors import DeltaOutOfRange, MisalignedTimes, NoValidSigma, SideConditionFail
from .field import Field2D, Grid2D, laplacian_neumann
from .interface_flow import FrontCurve, interface_forcing, radius_sde
from .reaction import Bistable
from .wave import WaveFamily, WaveProfile, solve_wave


# ------------------------------------------------------------------ constants


@dataclass(frozen=True)
class SandwichParams:
    rho: float
    b: float
    a1: float
    beta: float
    sigma: float
    sigma0: float
    sigma1: float
    sigma2: float
    K: float
    L: float
    d0: float
    eps0: float
    T: float
    lam: float
    sup_fp: float
    sup_fpp: float
    delta_max: float = 0.0
    eps0_checks: Dict[str, object] = field(default_factory=dict, compare=False)

    def p(self, t, eps):
        t = np.asarray(t, dtype=float)
        return -np.exp(-self.beta * t / eps**2) + np.exp(self.L * t) + self.K

    def p_t(self, t, eps):
        t = np.asarray(t, dtype=float)
        return self.beta / eps**2 * np.exp(-self.beta * t / eps**2) + self.L * np.exp(self.L * t)

    def q(self, t, eps):
        t = np.asarray(t, dtype=float)
        return self.sigma * (self.beta * np.exp(-self.beta * t / eps**2) + eps**2 * self.L * np.exp(self.L * t))

    def q_t(self, t, eps):
        t = np.asarray(t, dtype=float)
        return self.sigma * (-self.beta**2 / eps**2 * np.exp(-self.beta * t / eps**2)
                             + eps**2 * self.L**2 * np.exp(self.L * t))

    def with_(self, **changes) -> "SandwichParams":
        """Copy with new ``K``, ``L``, ``eps0``, ``T`` or ``d0``; side conditions are re-evaluated."""
        new = replace(self, **changes)
        return replace(new, eps0_checks=side_conditions(new.L, new.K, new.T, new.eps0, new.d0))

    def describe(self) -> dict:
        keys = ("rho", "b", "a1", "beta", "sigma", "sigma0", "sigma1", "sigma2", "K", "L", "d0",
                "eps0", "T", "lam", "sup_fp", "sup_fpp", "delta_max")
        out = {k: float(getattr(self, k)) for k in keys}
        out["eps0_checks"] = dict(self.eps0_checks)
        return out


def side_conditions(L: float, K: float, T: float, eps0: float, d0: float) -> dict:
    """The two smallness conditions tying ``eps0`` to ``L``, ``K``, ``T`` and ``d0``."""
    small = eps0**2 * L * np.exp(L * T)
    lhs = np.exp(L * T) + K
    rhs = d0 / (2 * eps0)
    return {"eps0_sq_L_expLT": float(small), "eps0_sq_L_expLT_ok": bool(small <= 1.0),
            "expLT_plus_K": float(lhs), "d0_over_2eps0": float(rhs), "band_ok": bool(lhs <= rhs)}


def _sup_abs(fn, lo: float, hi: float, n: int) -> float:
    u = np.linspace(lo, hi, n)
    return float(np.max(np.abs(fn(u))))


def margin_rho(f: Bistable, b: float, n: int = 1000) -> float:
    """``min(-f')`` over ``[a- - b, a- + b]`` and ``[a+ - b, a+ + b]``."""
    am, _, ap = f.zeros
    u = np.concatenate([np.linspace(am - b, am + b, n), np.linspace(ap - b, ap + b, n)])
    return float(np.min(-f.fprime(u)))


def _profile_a1(prof: WaveProfile, lo: float, hi: float) -> float:
    z, m = prof.z, prof.m
    z_lo, z_hi = np.interp([lo, hi], m, z)
    inner = (m >= lo) & (m <= hi)
    ends = prof.derivative(np.array([z_lo, z_hi]))
    vals = np.concatenate([prof.m_z[inner], ends])
    return float(vals.min())


def slope_floor(f: Bistable, b: float, family: Optional[WaveFamily] = None, delta_max: float = 0.0) -> float:
    """``a1``: the smallest ``m_z`` where ``m`` lies in ``[a- + b, a+ - b]``, over ``|delta| <= delta_max``."""
    am, _, ap = f.zeros
    lo, hi = am + b, ap - b
    if delta_max == 0.0:
        profs = [family.profiles[int(np.argmin(np.abs(family.deltas)))] if family else solve_wave(f, 0.0)]
    elif family is not None:
        profs = [p for d, p in zip(family.deltas, family.profiles) if abs(d) <= delta_max * (1 + 1e-12)]
    else:
        profs = [solve_wave(f, float(d)) for d in np.linspace(-delta_max, delta_max, 5)]
    return min(_profile_a1(p, lo, hi) for p in profs)


def compute_params(f: Bistable, family: Optional[WaveFamily] = None, T_horizon: float = 1.0,
                   eps0: float = 0.02, K: float = 2.0, b: Optional[float] = None, d0: float = 0.1,
                   delta_max: float = 0.0, L: Optional[float] = None,
                   probe: Optional[Callable[[SandwichParams], float]] = None,
                   strict: bool = False, n_scan: int = 1000) -> SandwichParams:
    """Scan the margins and assemble ``beta``, the three sigma bounds and ``sigma``.

    ``L`` is taken as given, else chosen by :func:`select_L` when ``probe`` is
    supplied, else set to 1.  The side conditions are always evaluated and
    stored in ``eps0_checks``; with ``strict=True`` a violation raises.
    """
    am, _, ap = f.zeros
    b = 0.2 * (ap - am) / 2 if b is None else float(b)
    rho = margin_rho(f, b, n_scan)
    a1 = slope_floor(f, b, family, delta_max)
    sup_fp = _sup_abs(f.fprime, am - 1, ap + 1, 10 * n_scan + 1)
    sup_fpp = _sup_abs(f.fsecond, am - 1, ap + 1, 10 * n_scan + 1)
    beta = rho / 4
    s0 = a1 / (rho + sup_fp)
    s1 = 1.0 / (2 * (beta + 1))
    s2 = 4 * beta / (sup_fpp * (beta + 1)) if sup_fpp > 0 else np.inf
    if min(s0, s1, s2) <= 0 or rho <= 0:
        raise NoValidSigma(f"rho={rho:.4g}, a1={a1:.4g}, sigma bounds=({s0:.4g}, {s1:.4g}, {s2:.4g})")
    lam = float(family.profiles[0].lambda_fit) if family is not None else float(solve_wave(f, 0.0).lambda_fit)
    params = SandwichParams(rho, b, a1, beta, min(s0, s1, s2), s0, s1, s2, float(K), 1.0, float(d0),
                            float(eps0), float(T_horizon), lam, sup_fp, sup_fpp, float(delta_max))
    if L is not None:
        params = params.with_(L=float(L))
    elif probe is not None:
        params = select_L(params, probe)
    else:
        params = params.with_()
    if strict:
        chk = params.eps0_checks
        if not chk["eps0_sq_L_expLT_ok"]:
            raise SideConditionFail(f"eps0^2 L exp(L T) = {chk['eps0_sq_L_expLT']:.4g} > 1")
        if not chk["band_ok"]:
            raise SideConditionFail(f"exp(L T) + K = {chk['expLT_plus_K']:.4g} > d0/(2 eps0) = {chk['d0_over_2eps0']:.4g}")
    return params


def select_L(params: SandwichParams, probe: Callable[[SandwichParams], float], max_power: int = 10) -> SandwichParams:
    """Smallest ``L = 2^k`` (``k <= max_power``) whose probe value is nonnegative."""
    last = None
    for k in range(max_power + 1):
        trial = params.with_(L=float(2**k))
        last = probe(trial)
        if last >= 0:
            return trial
    raise SideConditionFail(f"no L <= 2^{max_power} gives a nonnegative residual (last min {last:.4g})")


# ------------------------------------------------------------------ distance


def smooth_cap(s, d0: float):
    """Odd C^2 map equal to ``s`` on ``|s| <= d0`` and to ``+-2 d0`` beyond ``2 d0``.

    Returns ``(phi, phi', phi'')``.
    """
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    x = np.clip((a - d0) / d0, 0.0, 1.0)
    P = x + 4 * x**3 - 7 * x**4 + 3 * x**5
    P1 = 1 + 12 * x**2 - 28 * x**3 + 15 * x**4
    P2 = (24 * x - 84 * x**2 + 60 * x**3) / d0
    inner = a <= d0
    phi = np.where(inner, a, d0 + d0 * P)
    d1 = np.where(inner, 1.0, P1)
    d2 = np.where(inner, 0.0, P2)
    sg = np.sign(s)
    return sg * phi, d1, sg * d2


class CircleFlow:
    """Reference circle driven by ``dR/dt = -1/R + c(eps xi)/eps``.

    ``noise`` is read at ``t + t_shift``.  Radius values between stored steps
    are interpolated linearly; the rate uses the law itself.
    """

    def __init__(self, center, R0: float, t_end: float, dt: float, eps: float = 1.0,
                 noise=None, speed=None, t_shift: float = 0.0):
        self.center = (float(center[0]), float(center[1]))
        self.eps = float(eps)
        self.noise = noise
        self.speed = speed
        self.t_shift = float(t_shift)
        n = int(round(t_end / dt))
        forcing = None
        if noise is not None:
            forcing = interface_forcing(noise, eps, speed, dt, n, t_shift)
        self.path = radius_sde(R0, dt, n * dt, forcing=forcing)
        self.t_end = n * dt

    def R(self, t):
        return np.interp(t, self.path.t, self.path.R)

    def R_t(self, t):
        rate = -1.0 / self.R(t)
        if self.noise is not None:
            rate = rate + self.speed(self.eps * self.noise.xi(t + self.t_shift)) / self.eps
        return rate

    def raw(self, X, Y, t):
        """Signed distance, its time derivative, Laplacian and squared gradient."""
        r = np.hypot(X - self.center[0], Y - self.center[1])
        r_safe = np.maximum(r, 1e-300)
        return r - self.R(t), -self.R_t(t) * np.ones_like(r), 1.0 / r_safe, np.ones_like(r)

    def kappa_max(self) -> float:
        return float(1.0 / self.path.R.min())


class PolylineFlow:
    """Reference front given by stored marker curves; distances on a grid.

    Time derivatives come from neighbouring stored curves and the Laplacian
    from the five-point stencil, so this is meant for grids, not point probes.
    """

    def __init__(self, history: Sequence[FrontCurve], grid: Grid2D):
        from .geometry import distance_to_segments, point_in_polygons
        self.grid = grid
        self.times = np.array([c.time for c in history])
        X, Y = grid.mesh()
        pts = np.column_stack([X.ravel(), Y.ravel()])
        fields = []
        for c in history:
            P = c.points
            seg = np.stack([P, np.roll(P, -1, axis=0)], axis=1)
            d = distance_to_segments(pts, seg)
            inside = point_in_polygons(pts, [P])
            fields.append(np.where(inside, -d, d).reshape(X.shape))
        self.fields = np.array(fields)

    def raw(self, X, Y, t):
        i = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2))
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        d = (1 - w) * self.fields[i] + w * self.fields[i + 1]
        dt = (self.fields[i + 1] - self.fields[i]) / (t1 - t0)
        lap = laplacian_neumann(Field2D(self.grid, d)).u
        gx, gy = np.gradient(d, self.grid.h)
        return d, dt, lap, gx * gx + gy * gy


# ------------------------------------------------------------------ the pair


@dataclass
class SubSuperPair:
    params: SandwichParams
    eps: float
    family: WaveFamily
    flow: object
    noise: object = None
    t_shift: float = 0.0

    def xi(self, t):
        if self.noise is None:
            return 0.0 * np.asarray(t, dtype=float)
        return self.noise.xi(np.asarray(t, dtype=float) + self.t_shift)

    def xi_dot(self, t):
        if self.noise is None:
            return 0.0 * np.asarray(t, dtype=float)
        return self.noise.xi_dot(np.asarray(t, dtype=float) + self.t_shift)

    def delta(self, t) -> float:
        d = float(self.eps * self.xi(t))
        if abs(d) > self.family.delta_cal:
            raise DeltaOutOfRange(f"|eps xi| = {abs(d):.4g} exceeds {self.family.delta_cal:.4g} at t={t:.6g}")
        return d

    def distance(self, X, Y, t):
        """Smoothed ``d`` with ``d_t``, ``lap d`` and ``|grad d|^2``."""
        s, s_t, s_lap, s_g2 = self.flow.raw(X, Y, t)
        phi, p1, p2 = smooth_cap(s, self.params.d0)
        return phi, p1 * s_t, p2 * s_g2 + p1 * s_lap, p1 * p1 * s_g2

    def eval(self, X, Y, t):
        """``(u_minus, u_plus)`` at the points ``(X, Y)`` and time ``t``."""
        d = self.distance(X, Y, t)[0]
        dl = self.delta(t)
        P = self.params
        p, q = P.p(t, self.eps), P.q(t, self.eps)
        lo = self.family.m((d - self.eps * p) / self.eps, dl) - q
        hi = self.family.m((d + self.eps * p) / self.eps, dl) + q
        return lo, hi

    def error_terms(self, X, Y, t, sign: int = 1) -> Dict[str, np.ndarray]:
        """The four pieces of ``L u`` for ``u_plus`` (``sign=1``) or ``u_minus`` (``sign=-1``)."""
        P, eps, fam = self.params, self.eps, self.family
        f = fam.f
        d, d_t, lap, g2 = self.distance(X, Y, t)
        dl = self.delta(t)
        p, pt, q, qt = P.p(t, eps), P.p_t(t, eps), P.q(t, eps), P.q_t(t, eps)
        z = (d + sign * eps * p) / eps
        m = fam.m(z, dl)
        mz = fam.m_z(z, dl)
        c = float(fam.speed(dl))
        m_zz = -c * mz - f.f(m) - dl
        E1 = sign * (mz * pt + qt) - (f.f(m + sign * q) - f.f(m)) / eps**2
        E2 = (1.0 - g2) * m_zz / eps**2
        E3 = (d_t - lap + c / eps) * mz / eps
        E4 = eps * float(self.xi_dot(t)) * fam.m_delta(z, dl)
        return {"E1": E1, "E2": E2, "E3": E3, "E4": E4, "total": E1 + E2 + E3 + E4}


REGIONS = ("band", "shell", "far")


def regions(pair: SubSuperPair, X, Y, t, inset: float = 0.0) -> Dict[str, np.ndarray]:
    """Masks for ``|d~| < d0`` (band), ``d0 <= |d~| < 2 d0`` (shell) and beyond (far).

    ``inset`` pulls band and far away from the shell, which keeps finite
    difference stencils off the points where the smoothing has limited
    regularity.  Points in the gap belong to no region.
    """
    a = np.abs(pair.flow.raw(X, Y, t)[0])
    d0 = pair.params.d0
    return {"band": a < d0 - inset, "shell": (a >= d0) & (a < 2 * d0), "far": a >= 2 * d0 + inset}


def _region_min(values, masks, acc):
    for k in REGIONS:
        if masks[k].any():
            acc[k] = min(acc[k], float(values[masks[k]].min()))


def certified_residual(pair: SubSuperPair, X, Y, times, checked=("band", "far")) -> dict:
    """Minima of ``L u_plus`` and ``-L u_minus`` from the exact split, per region.

    ``min`` covers the ``checked`` regions only.  In the shell the smoothing of
    ``d`` makes the second-order term large unless ``d0 / eps`` is well above
    ``p``; that minimum is reported but not folded in by default.
    """
    acc = {k: np.inf for k in REGIONS}
    for t in times:
        masks = regions(pair, X, Y, t)
        _region_min(pair.error_terms(X, Y, t, 1)["total"], masks, acc)
        _region_min(-pair.error_terms(X, Y, t, -1)["total"], masks, acc)
    out = {f"min_{k}": acc[k] for k in REGIONS}
    out["min"] = min(acc[k] for k in checked)
    return out


def probe_for(pair_factory: Callable[[SandwichParams], SubSuperPair], X, Y, times, checked=("band", "far")):
    """Probe callable for :func:`select_L`: the certified residual minimum on fixed points."""
    def probe(params: SandwichParams) -> float:
        return certified_residual(pair_factory(params), X, Y, times, checked)["min"]
    return probe


# ------------------------------------------------------------------ numerical checks


def _fd_operator(pair: SubSuperPair, grid: Grid2D, t: float, dt_probe: float):
    X, Y = grid.mesh()
    f, eps = pair.family.f, pair.eps
    lo_m, hi_m = pair.eval(X, Y, t - dt_probe)
    lo_p, hi_p = pair.eval(X, Y, t + dt_probe)
    lo, hi = pair.eval(X, Y, t)
    xi = float(pair.xi(t))
    out = []
    for a, u, b in ((lo_m, lo, lo_p), (hi_m, hi, hi_p)):
        ut = (b - a) / (2 * dt_probe)
        lap = laplacian_neumann(Field2D(grid, u)).u
        out.append(ut - lap - f.f(u) / eps**2 - xi / eps)
    return out


def residual_check(pair: SubSuperPair, grid: Grid2D, times: Sequence[float], dt_probe: float = 1e-5,
                   checked=("band", "far")) -> dict:
    """Finite-difference ``L u_pm`` on ``grid`` with a refinement-based error budget.

    Band and far nodes within ``2 h`` of the shell are skipped, and probe
    times are raised to at least ``dt_probe``.  The budget is twice the largest change between ``(h, dt_probe)`` and
    ``(h/2, dt_probe/2)`` at shared nodes of the checked regions.  PASS means
    ``min L u_plus >= -budget`` and ``max L u_minus <= budget`` there.
    Region minima of ``min(L u_plus, -L u_minus)`` are reported for all regions.
    """
    fine = Grid2D(2 * grid.nx - 1, 2 * grid.ny - 1, grid.h / 2, grid.x0, grid.y0)
    X, Y = grid.mesh()
    acc = {k: np.inf for k in REGIONS}
    min_plus, max_minus, diff = np.inf, -np.inf, 0.0
    times = [max(float(t), dt_probe) for t in times]
    for t in times:
        masks = regions(pair, X, Y, t, inset=2 * grid.h)
        sel = np.zeros(X.shape, dtype=bool)
        for k in checked:
            sel |= masks[k]
        Lm, Lp = _fd_operator(pair, grid, t, dt_probe)
        Fm, Fp = _fd_operator(pair, fine, t, dt_probe / 2)
        _region_min(np.minimum(Lp, -Lm), masks, acc)
        if sel.any():
            min_plus = min(min_plus, float(Lp[sel].min()))
            max_minus = max(max_minus, float(Lm[sel].max()))
            diff = max(diff, float(np.abs(Lp - Fp[::2, ::2])[sel].max()),
                       float(np.abs(Lm - Fm[::2, ::2])[sel].max()))
    budget = 2.0 * diff
    out = {"min_plus": min_plus, "max_minus": max_minus, "budget": budget, "h": grid.h,
           "dt_probe": dt_probe, "times": [float(t) for t in times], "checked": list(checked),
           "passed": bool(min_plus >= -budget and max_minus <= budget)}
    out.update({f"min_{k}": acc[k] for k in REGIONS})
    return out


def sandwich_check(traj, pair: SubSuperPair, t_eps: float, dt: float, times: Optional[Sequence[float]] = None) -> dict:
    """Count nodes where ``u(t + t_eps)`` leaves ``[u_minus(t), u_plus(t)]`` by more than ``2 (h + dt)``."""
    snaps = traj.snapshots
    snap_t = np.array([s.time for s in snaps])
    if times is None:
        times = [float(s - t_eps) for s in snap_t if s >= t_eps - 0.5 * dt]
    tol = None
    rows = []
    total = 0
    worst = np.inf
    for t in times:
        i = int(np.argmin(np.abs(snap_t - (t + t_eps))))
        if abs(snap_t[i] - (t + t_eps)) > 0.5 * dt + 1e-12:
            raise MisalignedTimes(f"no snapshot at t + t_eps = {t + t_eps:.6g}")
        snap = snaps[i]
        grid = snap.grid
        tol = 2.0 * (grid.h + dt)
        X, Y = grid.mesh()
        lo, hi = pair.eval(X, Y, max(t, 0.0))
        margin = np.minimum(snap.u - lo, hi - snap.u)
        bad = int(np.count_nonzero(margin < -tol))
        total += bad
        worst = min(worst, float(margin.min()))
        rows.append({"t": float(t), "violations": bad, "worst_margin": float(margin.min())})
    return {"violations": total, "worst_margin": worst, "tol": tol, "per_time": rows, "passed": total == 0}


# ------------------------------------------------------------------ initial layer


def calibrate_K(u0: np.ndarray, d_init: np.ndarray, a_eps: float, M0: float, eps: float) -> dict:
    """Smallest ``M1`` with ``d >= M1 eps => u0 >= a_eps + M0 eps`` (and the mirror), and ``K = max(2, 4 M1)``."""
    u0 = np.asarray(u0, dtype=float)
    d = np.asarray(d_init, dtype=float)
    low = u0 < a_eps + M0 * eps
    high = u0 > a_eps - M0 * eps
    m_plus = float(d[low].max() / eps) if low.any() else 0.0
    m_minus = float(-d[high].min() / eps) if high.any() else 0.0
    M1 = max(m_plus, m_minus, 0.0)
    return {"M1": M1, "K": max(2.0, 4.0 * M1)}


def h_bounds(d_init: np.ndarray, params: SandwichParams, M1: float, eps: float, zeros) -> tuple:
    """Step functions ``H_minus``, ``H_plus`` that bracket the solution right after generation."""
    am, _, ap = zeros
    s = params.sigma * params.beta / 2
    Hp = np.where(d_init >= -M1 * eps, ap + s, am + s)
    Hm = np.where(d_init >= M1 * eps, ap - s, am - s)
    return Hm, Hp


def h_check(u: np.ndarray, d_init: np.ndarray, params: SandwichParams, M1: float, eps: float, zeros,
            tol: float = 0.0) -> dict:
    """Diagnostic: how often ``H_minus <= u <= H_plus`` fails by more than ``tol``."""
    Hm, Hp = h_bounds(d_init, params, M1, eps, zeros)
    below = np.count_nonzero(u < Hm - tol)
    above = np.count_nonzero(u > Hp + tol)
    return {"below": int(below), "above": int(above), "nodes": int(u.size),
            "worst": float(min((u - Hm).min(), (Hp - u).min()))}


def e3_constants(family: WaveFamily, kappa_max: float, n_dim: int = 2, delta_max: float = 0.0) -> tuple:
    """``(C3, C3')`` in the band bound ``|E3| <= C3 + C3' (exp(L t) + K)``."""
    C = 2 * (n_dim - 1) * kappa_max**2
    z = family.z
    zmz, mz = 0.0, 0.0
    for d in family.deltas[np.abs(family.deltas) <= delta_max + 1e-12]:
        g = family.m_z(z, d)
        zmz = max(zmz, float(np.max(np.abs(z * g))))
        mz = max(mz, float(np.max(g)))
    return C * zmz, C * mz
