"""Bistable nonlinearities, their constant shifts, and the pure reaction ODE.

The cubic ``u - u**3`` is the reference instance.  Polynomial nonlinearities
carry their coefficients so the compiled stencil kernels in :mod:`sac.field`
can evaluate them without Python callbacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, optimize

from .errors import NoSignChange, NotBistable, ShiftTooLarge, StepTooLarge, UnbalancedNonlinearity

ROOT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Bistable:
    """A reaction term with three zeros ``a_minus < a < a_plus``.

    ``poly`` holds coefficients in increasing powers when ``f`` is a
    polynomial, otherwise it is ``None``.
    """

    f: Callable
    fprime: Callable
    fsecond: Callable
    zeros: Tuple[float, float, float]
    F: Callable
    poly: Optional[np.ndarray] = None
    name: str = "custom"

    @property
    def a_minus(self) -> float:
        return self.zeros[0]

    @property
    def a(self) -> float:
        return self.zeros[1]

    @property
    def a_plus(self) -> float:
        return self.zeros[2]

    @property
    def mu(self) -> float:
        """Linear growth rate ``f'(a)`` at the unstable zero."""
        return float(self.fprime(self.a))

    @property
    def eta0(self) -> float:
        return min(self.a - self.a_minus, self.a_plus - self.a)

    def sup_abs(self, which: str = "fprime", pad: float = 1.0, n: int = 10001) -> float:
        """Sup of ``|f'|`` (or ``|f''|``) on ``[a_minus - pad, a_plus + pad]`` by dense scan."""
        g = self.fprime if which == "fprime" else self.fsecond
        u = np.linspace(self.a_minus - pad, self.a_plus + pad, n)
        return float(np.max(np.abs(g(u))))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "zeros": [float(z) for z in self.zeros],
            "poly": None if self.poly is None else [float(c) for c in self.poly],
        }


def from_polynomial(coeffs: Sequence[float], brackets=None, name: str = "polynomial") -> Bistable:
    """Build a :class:`Bistable` from polynomial coefficients (increasing powers)."""
    c = np.asarray(coeffs, dtype=float)
    dc = P.polyder(c)
    ddc = P.polyder(c, 2)
    f = lambda u: P.polyval(u, c)
    fp = lambda u: P.polyval(u, dc)
    fpp = lambda u: P.polyval(u, ddc)
    if brackets is None:
        roots = np.sort(np.real(P.polyroots(c)[np.abs(np.imag(P.polyroots(c))) < 1e-9]))
        if roots.size != 3:
            raise NotBistable(f"expected three real zeros, found {roots.size}")
        gaps = np.diff(roots)
        half = 0.5 * np.min(gaps)
        brackets = [(r - half * 0.99, r + half * 0.99) for r in roots]
    zeros = find_zeros(f, brackets, fprime=fp)
    antider = P.polyint(c)
    top = P.polyval(zeros[2], antider)
    F = lambda u: top - P.polyval(u, antider)
    return Bistable(f=f, fprime=fp, fsecond=fpp, zeros=zeros, F=F, poly=c, name=name)


def make_cubic() -> Bistable:
    """The balanced cubic ``u - u^3`` with zeros ``(-1, 0, 1)``."""
    c = np.array([0.0, 1.0, 0.0, -1.0])
    return Bistable(
        f=lambda u: u - u**3,
        fprime=lambda u: 1.0 - 3.0 * u**2,
        fsecond=lambda u: -6.0 * u,
        zeros=(-1.0, 0.0, 1.0),
        F=lambda u: 0.25 * (1.0 - u**2) ** 2,
        poly=c,
        name="cubic",
    )


def _refine_root(f, lo, hi, tol, fprime=None):
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise NoSignChange(f"no sign change on [{lo}, {hi}]")
    root = optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    if fprime is not None:
        # a couple of Newton polishes, kept only while they stay in the bracket
        for _ in range(2):
            d = fprime(root)
            if d == 0.0:
                break
            cand = root - f(root) / d
            if not lo <= cand <= hi or abs(f(cand)) > abs(f(root)):
                break
            root = cand
    return float(root)


def find_zeros(f: Callable, brackets, tol: float = ROOT_TOL, fprime: Optional[Callable] = None):
    """Return the three zeros of ``f`` located in ``brackets`` (sorted).

    Raises :class:`NoSignChange` when a bracket holds no sign change and
    :class:`NotBistable` when the derivative signs are not (-, +, -).
    """
    if len(brackets) != 3:
        raise ValueError("three brackets are required")
    br = sorted((float(min(b)), float(max(b))) for b in brackets)
    for (l1, h1), (l2, h2) in zip(br, br[1:]):
        if h1 > l2:
            raise ValueError("brackets must be disjoint")
    roots = tuple(_refine_root(f, lo, hi, tol, fprime) for lo, hi in br)
    if fprime is None:
        step = 1e-6
        slopes = [(f(r + step) - f(r - step)) / (2 * step) for r in roots]
    else:
        slopes = [fprime(r) for r in roots]
    if not (slopes[0] < 0 and slopes[1] > 0 and slopes[2] < 0):
        raise NotBistable(f"derivative signs at zeros are {np.sign(slopes)}, expected (-, +, -)")
    return roots


def critical_points(base: Bistable) -> Tuple[float, float]:
    """Local minimum of ``f`` in (a_minus, a) and local maximum in (a, a_plus)."""
    am, a, ap = base.zeros
    c1 = optimize.brentq(base.fprime, am, a, xtol=1e-14)
    c2 = optimize.brentq(base.fprime, a, ap, xtol=1e-14)
    return c1, c2


def bistable_shift_limit(base: Bistable) -> Tuple[float, float]:
    """Open interval of constant shifts ``delta`` keeping ``f + delta`` bistable."""
    c1, c2 = critical_points(base)
    return -float(base.f(c2)), -float(base.f(c1))


def shifted_zeros(base: Bistable, shift: float, tol: float = ROOT_TOL):
    """Zeros of ``f + shift``, bracketed by the critical points of ``f``."""
    c1, c2 = critical_points(base)
    am, a, ap = base.zeros
    span = ap - am
    g = lambda u: base.f(u) + shift
    brackets = [(am - span, c1), (c1, c2), (c2, ap + span)]
    try:
        return find_zeros(g, brackets, tol=tol, fprime=base.fprime)
    except (NoSignChange, NotBistable) as exc:
        raise ShiftTooLarge(f"shift {shift} destroys bistability") from exc


@dataclass(frozen=True, eq=False)
class ShiftedBistable:
    """``f + shift`` together with its recomputed zeros and growth rate."""

    base: Bistable
    shift: float
    zeros_eps: Tuple[float, float, float]
    mu_eps: float

    def f(self, u):
        return self.base.f(u) + self.shift

    def fprime(self, u):
        return self.base.fprime(u)


def shift_nonlinearity(base: Bistable, shift: float) -> ShiftedBistable:
    if shift == 0.0:
        return ShiftedBistable(base, 0.0, tuple(base.zeros), base.mu)
    zeros = shifted_zeros(base, shift)
    return ShiftedBistable(base, float(shift), zeros, float(base.fprime(zeros[1])))


def check_balanced(f: Bistable, tol: float = 1e-10) -> bool:
    """True when the integral of ``f`` between the outer zeros vanishes."""
    val, _ = integrate.quad(f.f, f.a_minus, f.a_plus, epsabs=1e-14, epsrel=1e-13, limit=200)
    return abs(val) <= tol


def require_balanced(f: Bistable, tol: float = 1e-10) -> None:
    if not check_balanced(f, tol):
        raise UnbalancedNonlinearity("the two wells of f have different depths")


def _rk4_path(g, y0, tau_end, dtau, lo, hi, keep_path):
    n = int(np.ceil(tau_end / dtau - 1e-12)) if tau_end > 0 else 0
    y = np.array(y0, dtype=float, copy=True)
    taus = [0.0]
    path = [y.copy()] if keep_path else None
    t = 0.0
    for k in range(n):
        h = min(dtau, tau_end - t)
        k1 = g(y)
        k2 = g(y + 0.5 * h * k1)
        k3 = g(y + 0.5 * h * k2)
        k4 = g(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = tau_end if k == n - 1 else t + h
        if np.any(y < lo) or np.any(y > hi) or not np.all(np.isfinite(y)):
            raise StepTooLarge(f"reaction ODE left [{lo}, {hi}] at tau={t:.4g}")
        if keep_path:
            taus.append(t)
            path.append(y.copy())
    if keep_path:
        return np.array(taus), np.array(path)
    return np.array([0.0, t]), np.array([np.array(y0, dtype=float), y])


def solve_reaction_ode(fe: ShiftedBistable, delta: float, xi0, tau_end: float, dtau: float,
                       keep_path: bool = True):
    """Integrate ``Y' = f_eps(Y) + delta`` from ``Y(0) = xi0`` by classical RK4.

    ``xi0`` may be an array; every entry is advanced independently.  Returns
    ``(tau, Y)`` where ``Y[k]`` is the state at ``tau[k]``.  With
    ``keep_path=False`` only the initial and final states are returned.
    """
    if dtau <= 0:
        raise ValueError("dtau must be positive")
    am, _, ap = fe.base.zeros
    g = lambda y: fe.f(y) + delta
    return _rk4_path(g, np.asarray(xi0, dtype=float), float(tau_end), float(dtau),
                     am - 2.0, ap + 2.0, keep_path)


def cubic_reaction_exact(tau, xi0):
    """Closed-form flow of ``Y' = Y - Y^3`` (useful as an oracle)."""
    tau = np.asarray(tau, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    e2 = np.exp(2.0 * tau)
    return xi0 * np.exp(tau) / np.sqrt(1.0 - xi0**2 + xi0**2 * e2)


@dataclass
class EnvelopeTable:
    """Flow map ``xi -> Y(tau, xi; delta)`` tabulated on a uniform xi grid."""

    xi: np.ndarray
    y: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.xi, self.y)


def reaction_flow_table(fe: ShiftedBistable, delta: float, tau: float, lo: float, hi: float,
                        n: int = 2049, dtau: float = 1e-3) -> EnvelopeTable:
    xi = np.linspace(lo, hi, n)
    if tau <= 0:
        return EnvelopeTable(xi, xi.copy())
    _, ys = solve_reaction_ode(fe, delta, xi, tau, min(dtau, tau), keep_path=False)
    return EnvelopeTable(xi, ys[-1])


def generation_envelopes(fe: ShiftedBistable, u0, t: float, eps: float, C: float,
                         mu_tilde: Optional[float] = None, n_table: int = 2049, dtau: float = 1e-3):
    """Sub and super envelopes of the generation stage.

    ``w_pm(x, t) = Y(t/eps^2, u0(x) +- eps^2 C (exp(mu_tilde t / eps^2) - 1); +-eps)``
    with ``Y`` the flow of ``f_eps + delta``.  The flow maps are tabulated
    over initial values and interpolated linearly, which keeps them monotone.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    if mu_tilde is None:
        mu_tilde = fe.mu_eps * (1.0 + eps)
    u0 = np.asarray(u0, dtype=float)
    tau = t / eps**2
    bump = eps**2 * C * np.expm1(mu_tilde * tau)
    if tau == 0.0:
        return u0.copy(), u0.copy()
    am, _, ap = fe.base.zeros
    lo = min(am - 1.0, float(u0.min()) - bump)
    hi = max(ap + 1.0, float(u0.max()) + bump)
    lo, hi = max(lo, am - 2.0 + 1e-9), min(hi, ap + 2.0 - 1e-9)
    minus = reaction_flow_table(fe, -eps, tau, lo, hi, n_table, dtau)
    plus = reaction_flow_table(fe, +eps, tau, lo, hi, n_table, dtau)
    return minus(u0 - bump), plus(u0 + bump)
