import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.errors import NotBistable, ShiftTooLarge, UnbalancedNonlinearity
from sac.reaction import (bistable_shift_limit, check_balanced, critical_points, cubic_reaction_exact,
                          from_polynomial, make_cubic, require_balanced, shift_nonlinearity, shifted_zeros,
                          solve_reaction_ode)

F = make_cubic()


def test_cubic_zeros_and_rate():
    assert F.zeros == pytest.approx((-1.0, 0.0, 1.0), abs=1e-12)
    assert F.mu == pytest.approx(1.0)
    assert F.eta0 == pytest.approx(1.0)
    assert check_balanced(F)


def test_critical_points_of_cubic():
    c1, c2 = critical_points(F)
    assert c1 == pytest.approx(-1 / np.sqrt(3), abs=1e-10)
    assert c2 == pytest.approx(1 / np.sqrt(3), abs=1e-10)
    lo, hi = bistable_shift_limit(F)
    assert hi == pytest.approx(2 / (3 * np.sqrt(3)), abs=1e-10)
    assert lo == pytest.approx(-hi)


def test_unbalanced_polynomial_is_rejected_where_balance_is_needed():
    # f = -(u + 1)(u)(u - 0.5): zeros -1, 0, 0.5, unequal wells
    g = from_polynomial(np.polynomial.polynomial.polyfromroots([-1.0, 0.0, 0.5]) * -1)
    assert g.zeros == pytest.approx((-1.0, 0.0, 0.5), abs=1e-10)
    assert not check_balanced(g)
    with pytest.raises(UnbalancedNonlinearity):
        require_balanced(g)


def test_reversed_cubic_is_not_bistable():
    # u^3 - u has the right zeros but the outer ones are unstable
    with pytest.raises(NotBistable):
        from_polynomial([0.0, -1.0, 0.0, 1.0])


def test_shift_beyond_limit():
    with pytest.raises(ShiftTooLarge):
        shifted_zeros(F, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.35, 0.35))
def test_shifted_zeros_solve_the_shifted_equation(delta):
    z = shifted_zeros(F, delta)
    assert np.all(np.abs(F.f(np.array(z)) + delta) < 1e-10)
    assert z[0] < z[1] < z[2]
    # the shifted growth rate is f' at the middle zero
    assert shift_nonlinearity(F, delta).mu_eps == pytest.approx(float(F.fprime(z[1])))


def test_reaction_ode_matches_closed_form():
    _, Y = solve_reaction_ode(shift_nonlinearity(F, 0.0), 0.0, 0.1, 2.0, 1e-4, keep_path=False)
    assert abs(Y[-1] - cubic_reaction_exact(2.0, 0.1)) < 1e-6


def test_reaction_ode_fourth_order():
    fe = shift_nonlinearity(F, 0.0)
    errs = []
    for dtau in (0.1, 0.05):
        _, Y = solve_reaction_ode(fe, 0.0, 0.3, 2.0, dtau, keep_path=False)
        errs.append(abs(Y[-1] - cubic_reaction_exact(2.0, 0.3)))
    assert 12 < errs[0] / errs[1] < 20


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.3, 0.3))
def test_equilibria_are_preserved(delta):
    fe = shift_nonlinearity(F, 0.0)
    z = np.array(shifted_zeros(F, delta))
    dtau = 1e-2
    _, Y = solve_reaction_ode(fe, delta, z, 1.0, dtau, keep_path=False)
    assert np.all(np.abs(Y[-1] - z) <= 10 * dtau**4 * 1.0 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_reaction_flow_is_order_preserving(x, y):
    fe = shift_nonlinearity(F, 0.0)
    _, Y = solve_reaction_ode(fe, 0.0, np.array([min(x, y), max(x, y)]), 1.0, 1e-3, keep_path=False)
    assert Y[-1][0] <= Y[-1][1] + 1e-12
