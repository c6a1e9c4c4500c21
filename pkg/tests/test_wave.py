import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.errors import NotBistable, OutOfCalibratedRange
from sac.reaction import make_cubic, shifted_zeros
from sac.wave import SpeedCurve, WaveFamily, c0, solve_wave, wave_speed_curve

F = make_cubic()


def _exact_speed(delta):
    # the shifted cubic -(u - am)(u - a)(u - ap) has an explicit logistic front
    am, a, ap = shifted_zeros(F, delta)
    return (2 * a - am - ap) / np.sqrt(2)


def test_balanced_profile_is_tanh():
    U = solve_wave(F, 0.0)
    z = np.linspace(-10, 10, 2001)
    assert np.abs(U(z) - np.tanh(z / np.sqrt(2))).max() < 1e-6
    assert abs(U.c) < 1e-8
    assert U(0.0) == pytest.approx(0.0, abs=1e-8)


def test_c0_closed_form():
    assert c0(F) == pytest.approx(3 / np.sqrt(2), abs=1e-9)


@pytest.mark.parametrize("delta", [-0.2, -0.05, 0.1, 0.25])
def test_shifted_speed_matches_logistic_front(delta):
    U = solve_wave(F, delta)
    assert U.c == pytest.approx(_exact_speed(delta), abs=1e-6)
    # logistic front: m' = (m - am)(ap - m) / sqrt 2, independent of the centering
    rhs = (U.m - U.a_minus_delta) * (U.a_plus_delta - U.m) / np.sqrt(2)
    assert np.abs(U.m_z - rhs).max() < 1e-6


def test_profile_is_monotone_with_correct_limits():
    U = solve_wave(F, 0.15)
    assert np.all(np.diff(U.m) >= -1e-12)
    assert U(-1e3) == U.a_minus_delta and U(1e3) == U.a_plus_delta
    assert U.derivative(1e3) == 0.0


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 0.3))
def test_speed_is_odd(delta):
    (_, cm), (_, cp) = wave_speed_curve(F, [-delta, delta])
    assert cm == pytest.approx(-cp, abs=1e-8)
    assert cp < 0


def test_speed_curve_interpolates_and_guards_range():
    sc = SpeedCurve(F, 0.3, n=21)
    for d in (-0.27, 0.033, 0.21):
        assert float(sc(d)) == pytest.approx(_exact_speed(d), abs=1e-5)
    with pytest.raises(OutOfCalibratedRange):
        sc(0.31)


def test_too_large_shift_is_not_bistable():
    with pytest.raises(NotBistable):
        solve_wave(F, 0.5)


def test_wave_family_matches_single_profiles():
    fam = WaveFamily(F, 0.2, n_delta=9)
    z = np.linspace(-6, 6, 101)
    for d in (0.05, -0.125):
        U = solve_wave(F, d)
        assert np.abs(fam.m(z, d) - U(z)).max() < 1e-4
        assert float(fam.speed(d)) == pytest.approx(U.c, abs=1e-4)  # spline over 9 nodes
    # m_delta against a centred difference of the family itself
    h = 1e-4
    fd = (fam.m(z, 0.1 + h) - fam.m(z, 0.1 - h)) / (2 * h)
    assert np.abs(fam.m_delta(z, 0.1) - fd).max() < 1e-5
    with pytest.raises(OutOfCalibratedRange):
        fam.m(z, 0.25)
