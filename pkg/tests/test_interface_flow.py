import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.errors import ConvexityLost
from sac.interface_flow import (FrontCurve, GaussMapCurve, monitor_circle, monitor_stopping, radius_sde,
                                reconstruct_curve, run_front, run_kappa_spde, step_front, step_kappa_spde,
                                stratonovich_gap)


def test_deterministic_radius_extinction():
    rp = radius_sde(1.0, 1e-6, 0.6)
    assert rp.extinct
    assert rp.t_ext == pytest.approx(0.5, abs=1e-3)


def test_deterministic_radius_value():
    rp = radius_sde(0.4, 1e-6, 0.05)
    assert rp.R[-1] == pytest.approx(np.sqrt(0.06), abs=1e-4)
    assert not rp.extinct


def test_ito_second_moment():
    # d(R^2) = -(2 - b^2) dt + martingale, so E R^2 is linear in t
    b, t_end, dt, paths = 0.5, 0.1, 1e-4, 4000
    dW = np.random.default_rng(0).standard_normal((paths, int(round(t_end / dt)))) * np.sqrt(dt)
    rp = radius_sde(1.0, dt, t_end, dW=dW, coef=b)
    assert not rp.extinct.any()
    assert np.mean(rp.R[:, -1] ** 2) == pytest.approx(1.0 - (2 - b * b) * t_end, abs=0.02)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 1.0), st.floats(0.2, 1.0), st.integers(0, 2**32 - 1))
def test_radius_sde_preserves_order(r1, r2, seed):
    dt = 1e-4
    dW = np.random.default_rng(seed).standard_normal(200) * np.sqrt(dt)
    lo = radius_sde(min(r1, r2), dt, 0.02, dW=dW, coef=0.3).R
    hi = radius_sde(max(r1, r2), dt, 0.02, dW=dW, coef=0.3).R
    assert np.all(lo <= hi + 1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 3.0), st.integers(8, 300))
def test_menger_curvature_of_polygon_on_circle(R, n):
    fc = FrontCurve.circle((0.3, -0.2), R, n)
    assert np.allclose(fc.curvature(), 1.0 / R, rtol=1e-10)
    # clockwise input is reoriented, so the sign convention survives
    assert np.allclose(FrontCurve(fc.points[::-1]).curvature(), 1.0 / R, rtol=1e-10)


def test_front_area_law():
    fc = FrontCurve.circle((0.5, 0.5), 0.3, 128)
    dt = 0.05 * fc.h_marker**2  # markers crowd as the circle shrinks
    n = 400
    out, hist = run_front(fc, dt, np.full(n, 2.0), record_every=100)
    # dA/dt = -2 pi - F * length; integrate with the recorded lengths
    lengths = np.array([h.length() for h in hist])
    expected = fc.area() - n * dt * (2 * np.pi + 2.0 * lengths.mean())
    assert out.area() == pytest.approx(expected, rel=2e-3)
    with pytest.raises(ValueError):
        step_front(fc, 20 * dt, 0.0)


def test_kappa_spde_closed_form():
    curve = GaussMapCurve.uniform(1.0, n=64)
    dt = 0.1 * curve.h**2 / 2.0**2
    n = int(round(0.25 / dt))
    final = run_kappa_spde(curve, 0.25 / n, 0.0, np.zeros(n))[-1]
    assert final.kappa == pytest.approx(np.full(64, np.sqrt(2)), rel=1e-4)
    assert final.time == pytest.approx(0.25)


def test_reconstruction_of_a_circle():
    fc = reconstruct_curve(GaussMapCurve.uniform(1 / 0.3, n=128, base_point=(0.5, 0.2)))
    r = np.linalg.norm(fc.points - fc.points.mean(axis=0), axis=1)
    assert np.allclose(r, 0.3, atol=1e-10)
    assert fc.closure_defect < 1e-12


def test_convexity_loss_and_step_limit():
    bad = GaussMapCurve.uniform(lambda th: np.cos(th), n=32)
    with pytest.raises(ConvexityLost):
        step_kappa_spde(bad, 1e-6, 0.0, 0.0)
    with pytest.raises(ValueError):
        step_kappa_spde(GaussMapCurve.uniform(1.0, n=32), 1.0, 0.0, 0.0)


def test_circle_monitor_clauses():
    t = np.linspace(0, 0.06, 7)
    shrink = monitor_circle(t, np.sqrt(0.12 - 2 * t), N=10)
    assert shrink.clause == "curvature"
    assert shrink.triggered_at == pytest.approx(0.06)
    grow = monitor_circle(t, 0.3 + 3 * t, N=10)
    assert grow.clause == "boundary" and grow.triggered_at == pytest.approx(0.04)
    assert monitor_circle(t, np.full(7, 0.3), N=10).triggered_at is None


def test_front_monitor_flags_nonconvex_curves():
    th = 2 * np.pi * np.arange(200) / 200
    r = 0.25 * (1 + 0.4 * np.cos(3 * th))
    star = FrontCurve(np.column_stack([0.5 + r * np.cos(th), 0.5 + r * np.sin(th)]))
    mon = monitor_stopping([(0.0, star)], N=10)
    assert mon.clause == "curvature" and mon.summary()["nonconvex_events"] == 1


def test_stratonovich_gap_vanishes_without_noise():
    gap, stopped = stratonovich_gap(np.zeros((2, 100)), 1e-5, 1.0)
    assert np.all(gap < 1e-8) and not stopped.any()
