import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.field import (Field2D, Grid2D, RadialGrid, SimConfig, laplacian_neumann, laplacian_radial, max_dt,
                       run_simulation, stable_dt)
from sac.noise import make_mn2, zero_noise
from sac.reaction import make_cubic

F = make_cubic()


def test_neumann_laplacian_oracles():
    g = Grid2D.unit_square(65)
    X, Y = g.mesh()
    assert np.abs(laplacian_neumann(Field2D(g, np.full(X.shape, 3.0))).u).max() == 0.0
    q = laplacian_neumann(Field2D(g, X**2 + 3 * Y**2)).u
    assert np.allclose(q[1:-1, 1:-1], 8.0)
    # cos(pi x) already satisfies the mirror condition, so the boundary rows are second order too
    c = laplacian_neumann(Field2D(g, np.cos(np.pi * X))).u
    assert np.abs(c + np.pi**2 * np.cos(np.pi * X)).max() < 2e-3


def test_radial_laplacian_of_r_squared():
    h = 0.01
    r = h * np.arange(50)
    lap = laplacian_radial(r**2, h)
    assert np.allclose(lap[:-1], 4.0)


def test_step_size_guards():
    g = Grid2D.unit_square(64)
    eps = 0.04
    assert stable_dt(F, eps, g) <= max_dt(F, eps, g.h)
    with pytest.raises(ValueError):
        SimConfig(eps, F, 2 * max_dt(F, eps, g.h), 0.01, g)
    with pytest.raises(ValueError):
        SimConfig(eps, F, stable_dt(F, eps, g), 0.01, g, noise=zero_noise(0.005))
    with pytest.raises(ValueError):
        Grid2D(8, 8, 0.1)


@pytest.mark.parametrize("value", [-1.0, 0.0, 1.0])
def test_equilibria_stay_put(value):
    g = Grid2D.unit_square(32)
    cfg = SimConfig(0.05, F, stable_dt(F, 0.05, g), 0.002, g, initial={"kind": "uniform", "value": value})
    assert np.allclose(run_simulation(cfg).final.u, value, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_comparison_principle(v, w):
    lo, hi = min(v, w), max(v, w)
    g = Grid2D.unit_square(24)
    eps = 0.08
    xi = make_mn2(eps, 0.5, 0.004, seed=1, resolution=16)
    finals = []
    for val in (lo, hi):
        cfg = SimConfig(eps, F, stable_dt(F, eps, g), 0.002, g, initial={"kind": "uniform", "value": val},
                        noise=xi)
        finals.append(run_simulation(cfg).final.u)
    assert np.all(finals[0] <= finals[1] + 1e-12)


def test_radial_run_follows_curve_shortening():
    eps = 0.02
    grid = RadialGrid(int(0.6 / (eps / 8)) + 1, 0.6)
    cfg = SimConfig(eps, F, stable_dt(F, eps, grid), 0.04, grid, initial={"kind": "circle", "R0": 0.35, "w0": 0.1},
                    record_every=20)
    tr = run_simulation(cfg)
    late = tr.radius_t > 4 * eps**2 * abs(np.log(eps))
    exact = np.sqrt(0.35**2 - 2 * tr.radius_t[late])
    assert np.nanmax(np.abs(tr.radius[late] - exact)) < 3 * eps


def test_runs_are_reproducible_and_snapshots_land_on_steps():
    g = Grid2D.unit_square(48)
    eps = 0.05
    xi = make_mn2(eps, 0.5, 0.012, seed=9, resolution=16)
    cfg = SimConfig(eps, F, stable_dt(F, eps, g), 0.01, g, initial={"kind": "circle", "R0": 0.3}, noise=xi,
                    snapshot_times=[0.0, 0.005, 0.01])
    a, b = run_simulation(cfg), run_simulation(cfg)
    assert np.array_equal(a.final.u, b.final.u)
    assert [s.time for s in a.snapshots] == pytest.approx([0.0, 0.005, 0.01], abs=cfg.dt)
    assert a.at(0.00498, tol=cfg.dt).time == pytest.approx(0.005, abs=cfg.dt)
    with pytest.raises(KeyError):
        a.at(0.007, tol=cfg.dt)
