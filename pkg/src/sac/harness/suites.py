"""Acceptance criteria as runnable checks, grouped into named suites."""

from __future__ import annotations

import dataclasses
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .. import geometry as G
from ..field import Grid2D, SimConfig, run_simulation, stable_dt
from ..reaction import Bistable, cubic_reaction_exact, make_cubic, shift_nonlinearity, solve_reaction_ode
from ..sandwich import compute_params
from ..wave import c0, solve_wave, wave_speed_curve
from . import config as C
from . import experiments as E
from .io import write_csv, write_json


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    checks: List[E.Check] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        worst = "; ".join(f"{c.rule} = {c.value:.4g} ({c.bound})" for c in self.checks)
        return f"{'PASS' if self.passed else 'FAIL'} {self.number:2d} {self.name}: {worst}"

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks], "details": self.details}


def _crit(number, name, checks, details=None, results=()) -> Criterion:
    return Criterion(number, name, all(c.passed for c in checks), list(checks), dict(details or {}))


def _pick(result: E.ExperimentResult, *prefixes: str) -> List[E.Check]:
    return [c for c in result.checks if c.rule.startswith(prefixes)]


def _save(result: E.ExperimentResult, out: Optional[Path]):
    if out is not None:
        result.write(out)


# ---------------------------------------------------------------- criteria


def wave_oracle(f: Bistable, master: int, out=None) -> Criterion:
    U0 = solve_wave(f, 0.0)
    z = np.linspace(-10, 10, 4001)
    err = float(np.abs(U0(z) - np.tanh(z / np.sqrt(2))).max())
    return _crit(1, "wave_oracle", [
        E.Check("sup |U0 - tanh(z/sqrt 2)| on [-10, 10]", err, "<= 1e-6", err <= 1e-6),
        E.Check("|c(0)|", abs(U0.c), "<= 1e-8", abs(U0.c) <= 1e-8)])


def c0_crosscheck(f: Bistable, master: int, out=None) -> Criterion:
    value = c0(f)
    step = 1e-3
    (_, cm), (_, cp) = wave_speed_curve(f, [-step, step])
    slope = -(cp - cm) / (2 * step)
    rel = abs(slope - value) / value
    return _crit(2, "c0_crosscheck", [
        E.Check("|c0 - 3/sqrt 2|", abs(value - 3 / np.sqrt(2)), "<= 1e-6", abs(value - 3 / np.sqrt(2)) <= 1e-6),
        E.Check("relative gap between -dc/ddelta(0) and c0", rel, "<= 1%", rel <= 0.01)],
        {"c0": value, "fd_slope": slope})


def reaction_ode(f: Bistable, master: int, out=None) -> Criterion:
    _, Y = solve_reaction_ode(shift_nonlinearity(f, 0.0), 0.0, 0.1, 2.0, 1e-4, keep_path=False)
    err = abs(float(Y[-1]) - float(cubic_reaction_exact(2.0, 0.1)))
    return _crit(3, "reaction_ode", [E.Check("|Y(2, 0.1; 0) - closed form|", err, "<= 1e-6", err <= 1e-6)])


def noise_bound(f: Bistable, master: int, out=None, cfg=None) -> Criterion:
    res = E.exp_noise_bounds(cfg or C.NoiseBoundsConfig(), f, master)
    _save(res, out)
    return _crit(4, "noise_bound", _pick(res, "MN2"), res.summary["mn2"])


def circle_law(f: Bistable, master: int, out=None, eps_list=(0.04, 0.02), R0=0.35, n_grid=256,
               horizon=0.05) -> Criterion:
    checks, rows = [], []
    for eps in eps_list:
        grid = Grid2D.unit_square(n_grid)
        te = eps**2 * abs(np.log(eps)) / f.mu
        times = list(np.linspace(2 * te, horizon, 5))
        sim = SimConfig(eps, f, stable_dt(f, eps, grid), horizon, grid,
                        initial={"kind": "circle", "R0": R0, "w0": 0.1}, snapshot_times=times)
        worst = 0.0
        for s in run_simulation(sim).snapshots:
            R = G.loop_radius(G.largest_loop(G.extract_level_set(s, f.a).require()))
            exact = np.sqrt(R0**2 - 2 * s.time)
            worst = max(worst, abs(R - exact))
            rows.append([eps, s.time, R, exact])
        tol = 3 * eps + 2 * grid.h
        checks.append(E.Check(f"max |R - sqrt(R0^2 - 2t)| at eps={eps:g}", worst, f"<= {tol:.4g}", worst <= tol))
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(out) / "circle_law.csv", ["eps", "t", "R_pde", "R_exact"], rows)
    return _crit(5, "circle_law", checks)


def generation(f, master, out=None, cfg=None) -> Criterion:
    res = E.exp_generation(cfg or C.GenerationConfig(), f, master)
    _save(res, out)
    return _crit(6, "generation", res.checks, res.summary)


def thickness(f, master, out=None, cfg=None) -> Criterion:
    res = E.exp_thickness(cfg or C.ThicknessConfig(), f, master)
    _save(res, out)
    return _crit(7, "thickness", res.checks, res.summary)


def circle_pathwise(f, master, out=None, cfg=None) -> Criterion:
    res = E.exp_circle_pathwise(cfg or C.CirclePathwiseConfig(), f, master)
    _save(res, out)
    return _crit(8, "circle_pathwise", res.checks, res.summary)


def profile(f, master, out=None, cfg=None) -> Criterion:
    res = E.exp_profile(cfg or C.ProfileConfig(), f, master)
    _save(res, out)
    return _crit(9, "profile", res.checks, res.summary)


SANDWICH_TARGETS = {"rho": 0.92, "a1": 0.2546, "sigma0": 0.02136, "sigma1": 0.4065, "sigma2": 0.0623}


def sandwich(f, master, out=None, cfg=None) -> Criterion:
    P = compute_params(f, None, T_horizon=0.05, eps0=0.02, K=2.0, L=1.0)
    checks = []
    for key, target in SANDWICH_TARGETS.items():
        rel = abs(getattr(P, key) - target) / target
        checks.append(E.Check(f"{key} vs {target}", float(getattr(P, key)), "within 1%", rel <= 0.01))
    res = E.exp_sandwich_cert(cfg or C.SandwichConfig(), f, master)
    _save(res, out)
    return _crit(10, "sandwich", checks + res.checks, res.summary)


def stratonovich(f, master, out=None, cfg=None) -> Criterion:
    res = E.exp_funaki_kappa(cfg or C.FunakiConfig(), f, master)
    _save(res, out)
    crit = _crit(11, "stratonovich", _pick(res, "max pathwise gap", "rms gap ratio"), res.summary)
    crit.details["other_checks"] = [c.as_dict() for c in res.checks if c not in crit.checks]
    return crit


# reduced configs: every experiment once, small enough to run twice quickly
TINY = {
    "generation": C.GenerationConfig(eps=(0.04,), seeds=1, n_grid=64, n_snapshots=10),
    "thickness": C.ThicknessConfig(eps=(0.04,), seeds=1, n_grid=64, n_times=3, horizon=0.01),
    "profile": C.ProfileConfig(eps=(0.04,), seeds=1, n_grid=64, n_times=3, horizon=0.02),
    "circle_pathwise": C.CirclePathwiseConfig(eps=(0.04,), seeds=1, horizon=0.01),
    "funaki_kappa": C.FunakiConfig(paths=4, horizon=0.005, alpha0=1.0, perturbed_horizon=0.005),
    "l2_step": C.L2StepConfig(eps=(0.04,), seeds=1, n_grid=64, n_times=3, horizon=0.02, R0=0.25),
    "noise_bounds": C.NoiseBoundsConfig(paths=5, mn1_paths=1, horizon=0.2),
    "sandwich_cert": C.SandwichConfig(n_grid=64, probe_grid=33, horizon=0.005, n_times=2, probe_times=3,
                                      residual_times=2, n_delta=7),
}


def determinism(f, master, out=None) -> Criterion:
    checks = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, cfg in TINY.items():
            bodies = []
            for k in range(2):
                res = E.EXPERIMENTS[name](cfg, f, master)
                d = Path(tmp) / f"{name}_{k}"
                res.write(d)
                bodies.append((d / f"{name}.csv").read_bytes())
            same = bodies[0] == bodies[1]
            checks.append(E.Check(f"{name} CSV identical on rerun", float(len(bodies[0])), "bytes equal", same))
    return _crit(12, "determinism", checks)


CRITERIA: Dict[str, Callable[..., Criterion]] = {
    "wave_oracle": wave_oracle,
    "c0_crosscheck": c0_crosscheck,
    "reaction_ode": reaction_ode,
    "noise_bound": noise_bound,
    "circle_law": circle_law,
    "generation": generation,
    "thickness": thickness,
    "circle_pathwise": circle_pathwise,
    "profile": profile,
    "sandwich": sandwich,
    "stratonovich": stratonovich,
    "determinism": determinism,
}

SUITES = {
    "acceptance": list(CRITERIA),
    "fast": ["wave_oracle", "c0_crosscheck", "reaction_ode", "determinism"],
}


def run_criterion(name: str, f: Optional[Bistable] = None, master: int = 0, out=None) -> Criterion:
    f = f or make_cubic()
    sub = None if out is None else Path(out) / name
    return CRITERIA[name](f, master, sub)


def run_suite(suite: str, out=None, master: int = 0, f: Optional[Bistable] = None,
              echo: Callable[[str], None] = print) -> List[Criterion]:
    names = SUITES[suite] if suite in SUITES else [suite] if suite in CRITERIA else None
    if names is None:
        raise KeyError(f"unknown suite {suite!r}; choose from {sorted(SUITES) + sorted(CRITERIA)}")
    results = []
    for name in names:
        crit = run_criterion(name, f, master, out)
        echo(crit.line())
        results.append(crit)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(out) / "suite.csv", ["number", "criterion", "passed"],
                  [[c.number, c.name, c.passed] for c in results])
        write_json(Path(out) / "suite.json", {"suite": suite, "master_seed": master,
                                              "criteria": [c.as_dict() for c in results],
                                              "passed": all(c.passed for c in results)})
    return results
