import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.errors import InsufficientSupport
from sac.noise import (BrownianPath, MildNoisePath, StationaryBase, alpha0, bump, bump_prime, make_mn2,
                       mn1_noise, mn2_noise, mollifier_width, sample_brownian, smooth_cutoff, zero_noise)

EPS, G2 = 0.04, 0.5
WIDTH = mollifier_width(EPS, G2)


def _path(fn, dt=None):
    dt = dt or WIDTH / 64
    return BrownianPath.from_function(fn, WIDTH + 2 * dt, 0.3 + WIDTH + 2 * dt, dt)


def test_bump_is_a_unit_mass_kernel():
    s = np.linspace(-1.2, 1.2, 240001)
    assert np.trapezoid(bump(s), s) == pytest.approx(1.0, abs=1e-9)
    assert np.all(bump(s[np.abs(s) >= 1]) == 0)
    assert np.allclose(bump(s), bump(-s))
    h = 1e-6
    x = np.linspace(-0.9, 0.9, 37)
    assert np.allclose(bump_prime(x), (bump(x + h) - bump(x - h)) / (2 * h), atol=1e-5)


def test_mollifier_width():
    assert mollifier_width(0.01, 0.5) == pytest.approx(0.1)


def test_linear_path_gives_constant_noise():
    xi = mn2_noise(_path(lambda t: 1.7 * t), EPS, G2, 0.3)
    assert np.allclose(xi.xi_samples, 1.7, atol=1e-10)
    assert np.allclose(xi.xi_dot_samples, 0.0, atol=1e-8)


def test_quadratic_path_gives_linear_noise():
    xi = mn2_noise(_path(lambda t: t**2), EPS, G2, 0.3)
    assert np.allclose(xi.xi_samples, 2 * xi.t, atol=1e-8)
    assert np.allclose(xi.xi_dot_samples, 2.0, atol=1e-6)
    # Hermite interpolation between samples reproduces the line
    t = np.linspace(0, 0.29, 57)
    assert np.allclose(xi.xi(t), 2 * t, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(1.0, 20.0))
def test_mn2_is_linear_in_the_path(a, b, omega):
    f1 = lambda t: np.sin(omega * t)
    f2 = lambda t: t**3
    x1 = mn2_noise(_path(f1), EPS, G2, 0.3).xi_samples
    x2 = mn2_noise(_path(f2), EPS, G2, 0.3).xi_samples
    x12 = mn2_noise(_path(lambda t: a * f1(t) + b * f2(t)), EPS, G2, 0.3).xi_samples
    assert np.allclose(x12, a * x1 + b * x2, atol=1e-9 * (1 + abs(a) * omega + abs(b)))


def test_short_path_raises():
    W = BrownianPath.from_function(lambda t: t, WIDTH / 2, 0.3, WIDTH / 64)
    with pytest.raises(InsufficientSupport):
        mn2_noise(W, EPS, G2, 0.2)
    with pytest.raises(ValueError):
        mn2_noise(_path(lambda t: t), EPS, 0.7)


def test_mn2_is_deterministic_per_seed():
    a = make_mn2(EPS, G2, 0.05, seed=11, resolution=32)
    b = make_mn2(EPS, G2, 0.05, seed=11, resolution=32)
    c = make_mn2(EPS, G2, 0.05, seed=12, resolution=32)
    assert a.checksum() == b.checksum() != c.checksum()
    with pytest.raises(InsufficientSupport):
        a.xi(0.06)


def test_brownian_increment_variance():
    W = sample_brownian(0.0, 10.0, 1e-3, seed=3)
    inc = W.increments()
    assert inc.size == 10000
    assert inc.var() / 1e-3 == pytest.approx(1.0, abs=0.05)
    assert W.values[W.n_neg] == 0.0


def test_zero_start_and_csv_roundtrip(tmp_path):
    p = make_mn2(EPS, G2, 0.05, seed=4, resolution=32).with_zero_start()
    assert p.xi(0.0) == pytest.approx(0.0, abs=1e-12)
    p.to_csv(tmp_path / "xi.csv")
    q = MildNoisePath.from_csv(tmp_path / "xi.csv")
    assert q.checksum() == p.checksum()
    assert smooth_cutoff(np.array([0.0, 10.0]), 1.0).tolist() == [1.0, 0.0]


@pytest.mark.parametrize("eps", [0.04, 0.01])
def test_mn1_respects_its_deterministic_bounds(eps):
    base = StationaryBase(seed=5)
    g1 = 0.25
    p = mn1_noise(base, eps, g1, 0.05)
    assert np.abs(p.xi_samples).max() <= base.clip_level * eps**-g1 + 1e-12
    assert np.abs(p.xi_dot_samples).max() <= base.derivative_bound * eps ** (-3 * g1) + 1e-9
    # the spline carries the rescaling
    t = p.t[5]
    assert float(p.xi(t)) == pytest.approx(p.xi_samples[5], rel=1e-10)


def test_degenerate_base_is_silent():
    base = StationaryBase(variance=0.0)
    assert alpha0(base) == (0.0, 0.0)
    p = mn1_noise(base, 0.02, 0.25, 0.01)
    assert not np.any(p.xi_samples)
    assert not np.any(zero_noise(1.0).xi(np.linspace(0, 1, 5)))
