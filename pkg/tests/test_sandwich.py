import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.errors import DeltaOutOfRange, SideConditionFail
from sac.field import Grid2D
from sac.noise import BrownianPath, mn2_noise
from sac.reaction import make_cubic
from sac.sandwich import (CircleFlow, SubSuperPair, calibrate_K, compute_params, h_bounds, select_L,
                          side_conditions, smooth_cap)
from sac.wave import WaveFamily, c_of

F = make_cubic()


@pytest.fixture(scope="module")
def params():
    return compute_params(F, None, T_horizon=0.05, eps0=0.02, K=2.0, L=1.0)


@pytest.fixture(scope="module")
def family():
    return WaveFamily(F, 0.2, n_delta=9)


def test_constants_against_hand_values(params):
    # the cubic gives closed forms: -f'(0.8) = 0.92, sup|f'| = 11, sup|f''| = 12 on [-2, 2],
    # and the tanh slope at m = 0.8 is 0.36 / sqrt 2
    rho, a1 = 0.92, 0.36 / np.sqrt(2)
    beta = rho / 4
    assert params.rho == pytest.approx(rho, rel=1e-6)
    assert params.a1 == pytest.approx(a1, rel=1e-4)
    assert params.beta == pytest.approx(beta, rel=1e-6)
    assert params.sigma0 == pytest.approx(a1 / (rho + 11), rel=1e-4)
    assert params.sigma1 == pytest.approx(1 / (2 * (beta + 1)), rel=1e-6)
    assert params.sigma2 == pytest.approx(4 * beta / (12 * (beta + 1)), rel=1e-6)
    assert params.sigma == min(params.sigma0, params.sigma1, params.sigma2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.05), st.floats(0.005, 0.05))
def test_q_is_sigma_eps2_pt(params, t, eps):
    assert params.q(t, eps) == pytest.approx(params.sigma * eps**2 * params.p_t(t, eps), rel=1e-12)
    h = 1e-4 * eps**2
    fd = (params.q(t + h, eps) - params.q(t - h, eps)) / (2 * h) if t > h else None
    if fd is not None:
        assert params.q_t(t, eps) == pytest.approx(fd, rel=1e-5)


def test_p_starts_at_K(params):
    assert params.p(0.0, 0.02) == pytest.approx(params.K)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.02, 0.3))
def test_smooth_cap_properties(s, d0):
    phi, p1, p2 = smooth_cap(s, d0)
    assert float(smooth_cap(-s, d0)[0]) == pytest.approx(-float(phi))
    # slope starts at 1 and ends at 0 with mean 1 over [d0, 2 d0], so it overshoots in between
    assert 0.0 <= p1 <= 1.5
    assert abs(phi) <= 2 * d0 + 1e-12
    if abs(s) <= d0:
        assert phi == s and p1 == 1.0 and p2 == 0.0
    if abs(s) >= 2 * d0:
        assert phi == pytest.approx(np.sign(s) * 2 * d0) and p1 == pytest.approx(0.0, abs=1e-12)
    h = 1e-6 * d0
    fd = (smooth_cap(s + h, d0)[0] - smooth_cap(s - h, d0)[0]) / (2 * h)
    assert float(p1) == pytest.approx(float(fd), abs=1e-5)


def test_smooth_cap_is_c2_at_the_joints():
    d0 = 0.1
    for joint in (d0, 2 * d0):
        lo, hi = smooth_cap(np.array([joint - 1e-9, joint + 1e-9]), d0)[1:]
        assert abs(lo[0] - lo[1]) < 1e-6 and abs(hi[0] - hi[1]) < 1e-4


def test_side_conditions_and_strict_mode():
    chk = side_conditions(L=1.0, K=2.0, T=0.05, eps0=0.02, d0=0.1)
    assert chk["eps0_sq_L_expLT"] == pytest.approx(4e-4 * np.exp(0.05))
    assert chk["expLT_plus_K"] == pytest.approx(np.exp(0.05) + 2)
    assert chk["d0_over_2eps0"] == pytest.approx(2.5)
    assert chk["eps0_sq_L_expLT_ok"]
    # 3.05 > 2.5: this eps0 is too coarse for d0 = 0.1 with K = 2
    assert not chk["band_ok"]
    assert side_conditions(L=1.0, K=2.0, T=0.05, eps0=0.01, d0=0.1)["band_ok"]
    with pytest.raises(SideConditionFail):
        compute_params(F, T_horizon=0.05, eps0=0.02, K=2.0, L=1.0, strict=True)
    compute_params(F, T_horizon=0.05, eps0=0.01, K=2.0, L=1.0, strict=True)


def test_select_L_takes_the_first_power_of_two(params):
    assert select_L(params, lambda P: P.L - 5.0).L == 8.0
    with pytest.raises(SideConditionFail):
        select_L(params, lambda P: -1.0, max_power=3)


def test_calibrate_K_on_a_tanh_layer():
    eps = 0.02
    d = np.linspace(-0.3, 0.3, 600001)
    u0 = np.tanh(d / (np.sqrt(2) * eps))
    out = calibrate_K(u0, d, 0.0, 1.0, eps)
    # u0 = eps exactly at d = sqrt 2 eps artanh(eps)
    assert out["M1"] == pytest.approx(np.sqrt(2) * np.arctanh(eps), abs=1e-4)
    assert out["K"] == 2.0
    assert calibrate_K(u0, d, 0.0, 30.0, eps)["K"] == pytest.approx(4 * calibrate_K(u0, d, 0.0, 30.0, eps)["M1"])


def test_h_bounds_are_ordered(params):
    d = np.linspace(-0.2, 0.2, 101)
    Hm, Hp = h_bounds(d, params, 1.5, 0.02, F.zeros)
    assert np.all(Hm <= Hp)


def test_pair_is_ordered(params, family):
    eps = 0.02
    flow = CircleFlow((0.5, 0.5), 0.3, 0.02, 1e-5)
    pair = SubSuperPair(params.with_(L=4.0), eps, family, flow)
    g = Grid2D.unit_square(65)
    X, Y = g.mesh()
    for t in (0.0, 0.005, 0.02):
        lo, hi = pair.eval(X, Y, t)
        assert np.all(lo <= hi)
    # far from the front both bounds sit near the stable states
    lo, hi = pair.eval(np.array([0.5, 0.0]), np.array([0.5, 0.0]), 0.01)
    assert lo[0] < -0.9 and hi[1] > 0.9


def test_flow_rate_uses_the_speed_curve():
    eps = 0.02
    W = BrownianPath.from_function(lambda t: 3.0 * t, 0.2, 0.3, 1e-3)
    xi = mn2_noise(W, eps, 0.5, 0.05)
    speed = lambda d: c_of(F, d, 0.3)
    flow = CircleFlow((0.5, 0.5), 0.3, 0.02, 1e-5, eps, xi, speed)
    # constant noise 3: dR/dt = -1/R + c(0.06) / eps
    assert flow.R_t(0.01) == pytest.approx(-1 / flow.R(0.01) + float(speed(0.06)) / eps, rel=1e-6)


def test_delta_out_of_range(params, family):
    W = BrownianPath.from_function(lambda t: 20.0 * t, 0.2, 0.3, 1e-3)
    xi = mn2_noise(W, 0.02, 0.5, 0.05)
    pair = SubSuperPair(params, 0.02, family, CircleFlow((0.5, 0.5), 0.3, 0.01, 1e-5), noise=xi)
    with pytest.raises(DeltaOutOfRange):
        pair.eval(np.array([0.5]), np.array([0.5]), 0.001)
