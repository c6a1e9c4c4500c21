"""The eight desk-scale experiments.

Each ``exp_*`` function takes its config object, a nonlinearity and a master
seed and returns an :class:`ExperimentResult`.  Cells of an epsilon sweep draw
their randomness from ``SeedSequence([master, crc32(name), i, j])`` so results
do not depend on the order in which cells run.
"""

from __future__ import annotations

import dataclasses
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import stats

from .. import geometry as G
from .. import sandwich as S
from ..errors import NonDegenerateViolation
from ..field import Grid2D, RadialGrid, SimConfig, initial_values, run_simulation, stable_dt
from ..interface_flow import (GaussMapCurve, interface_forcing, kappa_bar_gauss, monitor_circle,
                              radius_sde, run_kappa_spde, step_kappa_spde, stratonovich_gap)
from ..noise import StationaryBase, alpha0, fit_sup_exponent, make_mn2, mn1_noise
from ..reaction import Bistable, shift_nonlinearity
from ..wave import SpeedCurve, WaveFamily, c0, solve_wave
from .io import config_hash, write_csv, write_json


# ---------------------------------------------------------------- results


@dataclass
class Check:
    rule: str
    value: float
    bound: str
    passed: bool

    def as_dict(self) -> dict:
        return {"rule": self.rule, "value": self.value, "bound": self.bound, "passed": self.passed}


@dataclass
class ExperimentResult:
    name: str
    header: List[str]
    rows: List[list]
    echo: dict
    summary: dict = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)
    checksums: List[str] = field(default_factory=list)
    flags: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def config_hash(self) -> str:
        return config_hash(self.echo)

    def manifest(self) -> dict:
        return {"experiment": self.name, "config": self.echo, "config_hash": self.config_hash,
                "seeds": self.seeds, "noise_checksums": self.checksums, "summary": self.summary,
                "checks": [c.as_dict() for c in self.checks], "flags": self.flags, "passed": self.passed}

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        h = self.config_hash
        write_csv(out / f"{self.name}.csv", self.header + ["config_hash"], [list(r) + [h] for r in self.rows])
        write_json(out / f"{self.name}.json", self.manifest())
        return out


def cell_seed(master: int, name: str, *index: int) -> int:
    """Independent 63-bit seed for one sweep cell."""
    master = int(master)
    ss = np.random.SeedSequence([master & 0xFFFFFFFF, master >> 32, zlib.crc32(name.encode()), *map(int, index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _echo(name: str, cfg, f: Bistable, master: int) -> dict:
    return {"experiment": name, "master_seed": int(master), "f": f.describe(), "params": dataclasses.asdict(cfg)}


def _fit_exponent(eps, values) -> dict:
    """Least-squares slope of ``log value`` against ``log eps`` with a 95% interval."""
    x, y = np.log(np.asarray(eps, float)), np.log(np.asarray(values, float))
    if np.unique(x).size < 2:
        return {"exponent": float("nan"), "ci": [float("nan")] * 2, "prefactor": float("nan")}
    fit = stats.linregress(x, y)
    dof = max(x.size - 2, 1)
    half = float(stats.t.ppf(0.975, dof) * fit.stderr) if x.size > 2 else float("nan")
    return {"exponent": float(fit.slope), "ci": [float(fit.slope - half), float(fit.slope + half)],
            "prefactor": float(np.exp(fit.intercept))}


_SPEEDS: Dict[str, SpeedCurve] = {}


def speed_for(f: Bistable) -> SpeedCurve:
    key = json.dumps(f.describe(), sort_keys=True)
    if key not in _SPEEDS:
        _SPEEDS[key] = SpeedCurve(f)
    return _SPEEDS[key]


def make_noise(kind: str, eps: float, gamma: float, t_end: float, seed: int):
    if kind in ("none", "off"):
        return None
    if kind == "mn2":
        return make_mn2(eps, gamma, t_end, seed)
    if kind == "mn1":
        return mn1_noise(StationaryBase(seed=seed), eps, gamma, t_end)
    raise ValueError(f"unknown noise kind {kind!r}")


def generation_time(f: Bistable, eps: float, noise) -> tuple:
    """``(a_eps, mu_eps, t_eps)`` from the nonlinearity shifted by ``eps xi(0)``."""
    xi0 = float(noise.xi(0.0)) if noise is not None else 0.0
    sh = shift_nonlinearity(f, eps * xi0)
    return sh.zeros_eps[1], sh.mu_eps, eps**2 * abs(np.log(eps)) / sh.mu_eps


def level_radius(f: Bistable, R0: float, w0: float, level: float) -> float:
    """Radius where the named circle profile crosses ``level``."""
    am, a, ap = f.zeros
    s = (level - a) / (ap - a) if level >= a else (level - a) / (a - am)
    return float(R0 + w0 * np.arctanh(s))


# ---------------------------------------------------------------- circle runs


def cut_horizon(t, R, horizon: float, stop_N: float, margin: float, r_min: float,
                center=(0.5, 0.5), domain=(0.0, 1.0, 0.0, 1.0)):
    """``(T, clause)``: the horizon ends ``margin`` before sigma_N or before ``R < r_min``."""
    mon = monitor_circle(t, R, stop_N, center=center, domain=domain)
    T, clause = horizon, None
    if mon.triggered_at is not None and mon.triggered_at - margin < T:
        T, clause = mon.triggered_at - margin, mon.clause
    small = np.asarray(R) < r_min
    if small.any() and t[np.argmax(small)] - margin < T:
        T, clause = float(t[np.argmax(small)] - margin), "radius"
    return float(T), clause


@dataclass
class CircleCell:
    eps: float
    seed: int
    noise: object
    a_eps: float
    t_eps: float
    horizon: float
    flow: object
    clause: Optional[str]
    traj: object

    def R(self, t):
        return float(np.interp(t, self.flow.t, self.flow.R))


def circle_cell(f: Bistable, eps: float, seed: int, kind: str, gamma: float, n_grid: int, R0: float,
                w0: float, horizon: float, stop_N: float, margin: float, flow_dt: float,
                times: Callable[[float, float], List[float]], min_radius_over_eps: float = 0.0) -> CircleCell:
    """Noise path, reference circle and 2-D run for one sweep cell.

    The horizon is cut ``margin`` before the reference flow's stopping time,
    or before its radius falls below ``min_radius_over_eps * eps`` (a circle
    no wider than its own layer has no minus phase left inside).
    """
    noise = make_noise(kind, eps, gamma, horizon + 0.01, seed)
    a_eps, _, te = generation_time(f, eps, noise)
    n = int(round(horizon / flow_dt))
    forcing = interface_forcing(noise, eps, speed_for(f), flow_dt, n) if noise is not None else None
    flow = radius_sde(level_radius(f, R0, w0, a_eps), flow_dt, n * flow_dt, forcing=forcing)
    T, clause = cut_horizon(flow.t, flow.R, horizon, stop_N, margin, min_radius_over_eps * eps)
    probe = times(te, T)
    if T <= 0 or probe[0] > T:
        # stopped before the first probe time: nothing to measure
        return CircleCell(eps, seed, noise, a_eps, te, T, flow, clause, None)
    grid = Grid2D.unit_square(n_grid)
    sim = SimConfig(eps, f, stable_dt(f, eps, grid), T, grid,
                    initial={"kind": "circle", "R0": R0, "w0": w0}, noise=noise, snapshot_times=probe)
    return CircleCell(eps, seed, noise, a_eps, te, T, flow, clause, run_simulation(sim))


def _sweep_cells(res, cfg, f, master, kind, times, mode=0):
    """Run the sweep for ``res``; cells stopped before their first probe are listed, not yielded."""
    seeds = cfg.seeds if kind not in ("none", "off") else 1
    for i, eps in enumerate(cfg.eps):
        for j in range(seeds):
            seed = cell_seed(master, res.name, mode, i, j)
            cell = circle_cell(f, eps, seed, kind, cfg.gamma, cfg.n_grid, cfg.R0, cfg.w0, cfg.horizon,
                               cfg.stop_N, cfg.margin, cfg.flow_dt, times, cfg.min_radius_over_eps)
            res.seeds.append(seed)
            if cell.noise is not None:
                res.checksums.append(cell.noise.checksum())
            if cell.traj is None:
                res.summary.setdefault("stopped_before_first_probe", []).append(
                    {"mode": kind, "eps": eps, "seed_index": j, "horizon": cell.horizon, "clause": cell.clause})
                continue
            yield i, j, cell


# ---------------------------------------------------------------- generation


def _m0(u0, u, a_eps, eps, zeros, eta) -> float:
    """Smallest M0 such that ``|u0 - a_eps| >= M0 eps`` implies the phase conclusion."""
    am, _, ap = zeros
    fail = ((u0 > a_eps) & (u < ap - eta)) | ((u0 < a_eps) & (u > am + eta))
    if not fail.any():
        return 0.0
    return float(np.abs(u0[fail] - a_eps).max() / eps)


def exp_generation(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "generation"
    res = ExperimentResult(name, ["eps", "seed_index", "seed", "xi0", "a_eps", "mu_eps", "t_eps",
                                  "M0_at_t_eps", "range_ok_at_t_eps", "t_gen", "ratio"], [], _echo(name, cfg, f, master))
    am, _, ap = f.zeros
    grid = Grid2D.unit_square(cfg.n_grid)
    cells = []
    for i, eps in enumerate(cfg.eps):
        for j in range(cfg.seeds):
            seed = cell_seed(master, name, i, j)
            noise = make_noise(cfg.noise, eps, cfg.gamma, 0.05, seed)
            a_eps, mu_eps, te = generation_time(f, eps, noise)
            init = {"kind": "uniform", "value": f.a} if cfg.degenerate else {"kind": "circle", "R0": cfg.R0, "w0": cfg.w0}
            u0 = initial_values(init, grid, f)
            if not ((u0 > a_eps).any() and (u0 < a_eps).any()) or np.ptp(u0) == 0:
                res.flags["NonDegenerateViolation"] = True
                res.summary["note"] = str(NonDegenerateViolation("initial data has no crossing of a_eps"))
                return res
            times = [te] + [cfg.horizon_factor * te * k / cfg.n_snapshots for k in range(1, cfg.n_snapshots + 1)]
            sim = SimConfig(eps, f, stable_dt(f, eps, grid), max(times), grid, initial=init, noise=noise,
                            snapshot_times=times)
            traj = run_simulation(sim)
            series = []
            for s in traj.snapshots:
                ok = bool(s.u.min() >= am - cfg.eta and s.u.max() <= ap + cfg.eta)
                series.append((s.time, _m0(u0, s.u, a_eps, eps, f.zeros, cfg.eta), ok))
            at_te = min(series, key=lambda r: abs(r[0] - te))
            xi0 = float(noise.xi(0.0)) if noise is not None else 0.0
            cells.append(dict(eps=eps, j=j, seed=seed, xi0=xi0, a_eps=a_eps, mu=mu_eps, te=te,
                              M0=at_te[1], ok=at_te[2], series=series))
            res.seeds.append(seed)
            if noise is not None:
                res.checksums.append(noise.checksum())
    M_star = max(c["M0"] for c in cells)
    ratios = []
    for c in cells:
        t_gen = next((t for t, m, ok in c["series"] if m <= M_star and ok), float("nan"))
        c["t_gen"], c["ratio"] = t_gen, t_gen / c["te"]
        ratios.append(c["ratio"])
        res.rows.append([c["eps"], c["j"], c["seed"], c["xi0"], c["a_eps"], c["mu"], c["te"], c["M0"], c["ok"],
                         t_gen, c["ratio"]])
    per_eps = [max(c["M0"] for c in cells if c["eps"] == e) for e in cfg.eps]
    m_ratios = [a / b for a, b in zip(per_eps, per_eps[1:]) if b > 0]
    res.summary.update({"M0_star": M_star, "M0_per_eps": per_eps, "M0_ratios": m_ratios,
                        "ratio_min": float(np.nanmin(ratios)), "ratio_max": float(np.nanmax(ratios))})
    ok_ratio = bool(np.all(np.isfinite(ratios)) and min(ratios) >= 0.5 and max(ratios) <= 2.0)
    # report the ratio farthest from 1 on a log scale
    worst = float(ratios[int(np.nanargmax(np.abs(np.log(ratios))))]) if ratios else float("nan")
    res.checks.append(Check("worst generation time / t_eps", worst, "all ratios in [0.5, 2]", ok_ratio))
    ok_m = bool(m_ratios) and all(0.7 <= r <= 1.4 for r in m_ratios) and len(m_ratios) == len(per_eps) - 1
    res.checks.append(Check("M0 ratio across eps-halving", float(max(m_ratios, default=float("nan"))),
                            "in [0.7, 1.4]", ok_m))
    return res


# ---------------------------------------------------------------- thickness / profile / l2


def exp_thickness(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "thickness"
    res = ExperimentResult(name, ["mode", "eps", "seed_index", "seed", "t", "width", "width_over_eps",
                                  "band_distance_over_eps", "unmeasured_points", "stop_clause"], [],
                           _echo(name, cfg, f, master))
    modes = ["none", "mn2"] if cfg.noise == "both" else [cfg.noise]
    am, _, ap = f.zeros
    times = lambda te, T: list(np.linspace(te, T, cfg.n_times))
    for mi, mode in enumerate(modes):
        widths, eps_of = [], []
        confine = 0.0
        for i, j, cell in _sweep_cells(res, cfg, f, master, mode, times, mi):
            X, Y = cell.traj.snapshots[0].grid.mesh()
            r = np.hypot(X - 0.5, Y - 0.5)
            w_cell = 0.0
            for s in cell.traj.snapshots:
                ls = G.extract_level_set(s, f.a)
                rep = G.layer_width(s, cfg.eta, ls, f.zeros)
                w = rep.width
                band = (s.u > am + cfg.eta) & (s.u < ap - cfg.eta)
                dist = float(np.abs(r[band] - cell.R(s.time)).max()) if band.any() else 0.0
                if np.isfinite(w):
                    w_cell = max(w_cell, w)
                confine = max(confine, dist / cell.eps)
                res.rows.append([mode, cell.eps, j, cell.seed, s.time, w, w / cell.eps, dist / cell.eps,
                                 rep.capped, cell.clause or ""])
            widths.append(w_cell)
            eps_of.append(cell.eps)
        fit = _fit_exponent(eps_of, widths)
        res.summary[mode] = {"fit": fit, "max_band_distance_over_eps": confine,
                             "width_over_eps": [float(w / e) for w, e in zip(widths, eps_of)]}
        k = fit["exponent"]
        res.checks.append(Check(f"width exponent ({'noise off' if mode == 'none' else mode})", k,
                                "in [0.8, 1.2]", bool(0.8 <= k <= 1.2)))
    return res


def _decay_checks(res: ExperimentResult, eps_list, per_eps, label: str):
    ordered = sorted(zip(eps_list, per_eps), reverse=True)
    vals = [v for _, v in ordered]
    ratios = [a / b for a, b in zip(vals, vals[1:])]
    res.summary[f"{label}_per_eps"] = {str(e): v for e, v in ordered}
    res.summary[f"{label}_decay_ratios"] = ratios
    res.checks.append(Check(f"{label} decreases along the sweep", float(min(ratios, default=float("nan"))),
                            "each ratio > 1", bool(ratios) and all(r > 1.0 for r in ratios)))
    return vals


def _no_data(res: ExperimentResult) -> ExperimentResult:
    res.checks.append(Check("cells reaching their first probe time", 0.0, ">= 1", False))
    return res


def exp_profile(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "profile"
    res = ExperimentResult(name, ["eps", "seed_index", "seed", "t", "sup_error"], [], _echo(name, cfg, f, master))
    U0 = solve_wave(f, 0.0)
    times = lambda te, T: list(np.linspace(cfg.rho_time * te, T, cfg.n_times))
    worst: Dict[float, float] = {}
    for i, j, cell in _sweep_cells(res, cfg, f, master, cfg.noise, times):
        grid = cell.traj.snapshots[0].grid
        for s in cell.traj.snapshots:
            ls = G.extract_level_set(s, f.a).require()
            d = G.signed_distance(ls, grid, s, f.a).values
            band = np.abs(d) <= cfg.band * cell.eps
            err = float(np.abs(s.u - U0(d / cell.eps))[band].max())
            worst[cell.eps] = max(worst.get(cell.eps, 0.0), err)
            res.rows.append([cell.eps, j, cell.seed, s.time, err])
    eps_list = list(worst)
    if not eps_list:
        return _no_data(res)
    vals = _decay_checks(res, eps_list, [worst[e] for e in eps_list], "sup_error")
    am, _, ap = f.zeros
    bound = cfg.tolerance * (ap - am)
    res.checks.append(Check("sup error at the smallest eps", vals[-1], f"<= {bound:g}", bool(vals[-1] <= bound)))
    return res


def exp_l2_step(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "l2_step"
    res = ExperimentResult(name, ["eps", "seed_index", "seed", "t", "l2_distance"], [], _echo(name, cfg, f, master))
    times = lambda te, T: list(np.linspace(te, T, cfg.n_times))
    worst: Dict[float, float] = {}
    for i, j, cell in _sweep_cells(res, cfg, f, master, cfg.noise, times):
        for s in cell.traj.snapshots:
            ref = G.LevelSet.circle((0.5, 0.5), cell.R(s.time))
            dist = G.l2_step_distance(s, ref, f.zeros)
            worst[cell.eps] = max(worst.get(cell.eps, 0.0), dist)
            res.rows.append([cell.eps, j, cell.seed, s.time, dist])
    eps_list = list(worst)
    if not eps_list:
        return _no_data(res)
    vals = _decay_checks(res, eps_list, [worst[e] for e in eps_list], "l2")
    fit = _fit_exponent(eps_list, [worst[e] for e in eps_list])
    res.summary["sqrt_eps_fit"] = fit
    am, _, ap = f.zeros
    bound = cfg.budget * 1.0 * (ap - am)  # |Omega| = 1 for the unit square
    res.checks.append(Check("sup-in-time L2 distance at the smallest eps", vals[-1], f"<= {bound:g}",
                            bool(vals[-1] <= bound)))
    return res


# ---------------------------------------------------------------- circle pathwise


def exp_circle_pathwise(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "circle_pathwise"
    res = ExperimentResult(name, ["eps", "seed_index", "seed", "sup_diff", "sup_diff_over_eps", "t_last",
                                  "stop_clause"], [], _echo(name, cfg, f, master))
    seeds = cfg.seeds if cfg.noise not in ("none", "off") else 1
    C: Dict[float, List[float]] = {}
    for i, eps in enumerate(cfg.eps):
        h = cfg.h_over_eps * eps
        grid = RadialGrid(int(round(cfg.r_max / h)) + 1, cfg.r_max)
        dt = stable_dt(f, eps, grid)
        n = int(round(cfg.horizon / dt))
        for j in range(seeds):
            seed = cell_seed(master, name, i, j)
            noise = make_noise(cfg.noise, eps, cfg.gamma, cfg.horizon + 0.01, seed)
            a_eps, _, te = generation_time(f, eps, noise)
            sim = SimConfig(eps, f, dt, n * dt, grid, initial={"kind": "circle", "R0": cfg.R0, "w0": cfg.w0},
                            noise=noise, record_every=cfg.record_every)
            traj = run_simulation(sim)
            # the PDE reads the noise at step midpoints; the SDE gets the same samples
            forcing = interface_forcing(noise, eps, speed_for(f), dt, n) if noise is not None else None
            sde = radius_sde(level_radius(f, cfg.R0, cfg.w0, a_eps), dt, n * dt, forcing=forcing)
            idx = np.arange(traj.radius.size) * cfg.record_every
            Rs = sde.R[idx]
            Rp = traj.radius
            t = traj.radius_t
            T, clause = cut_horizon(sde.t, sde.R, n * dt, cfg.stop_N, cfg.margin, cfg.min_radius_over_eps * eps,
                                    center=(0.0, 0.0), domain=(-cfg.r_max, cfg.r_max, -cfg.r_max, cfg.r_max))
            m = (t >= te) & (t <= T) & np.isfinite(Rp) & (Rp > 0)
            diff = float(np.abs(Rp[m] - Rs[m]).max()) if m.any() else float("nan")
            C.setdefault(eps, []).append(diff / eps)
            res.rows.append([eps, j, seed, diff, diff / eps, float(t[m][-1]) if m.any() else float("nan"),
                             clause or ""])
            res.seeds.append(seed)
            if noise is not None:
                res.checksums.append(noise.checksum())
    # least squares of diff = C eps over the seeds of one eps is the mean of diff / eps
    fitted = sorted(((e, float(np.mean(v))) for e, v in C.items()), reverse=True)
    ratios = [a[1] / b[1] for a, b in zip(fitted, fitted[1:])]
    worst = max(max(v) for v in C.values())
    res.summary.update({"C_fitted": {str(e): c for e, c in fitted}, "C_ratios": ratios,
                        "C_max": {str(e): max(v) for e, v in sorted(C.items(), reverse=True)},
                        "exponent": _fit_exponent([e for e, _ in fitted], [c * e for e, c in fitted])})
    res.checks.append(Check("sup |R_PDE - R_SDE| / eps, every cell", worst, f"<= {cfg.bound:g}",
                            bool(worst <= cfg.bound)))
    res.checks.append(Check("fitted C ratio across eps-halving", float(max(ratios, key=lambda r: abs(np.log(r)))) if ratios else float("nan"),
                            f"in [{cfg.ratio_lo:g}, {cfg.ratio_hi:g}]",
                            bool(ratios) and all(cfg.ratio_lo <= r <= cfg.ratio_hi for r in ratios)))
    return res


# ---------------------------------------------------------------- kappa SPDE


def exp_funaki_kappa(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "funaki_kappa"
    res = ExperimentResult(name, ["path", "gap_dt", "gap_half_dt", "stopped_dt", "stopped_half_dt"], [],
                           _echo(name, cfg, f, master))
    if cfg.alpha0 > 0:
        a0, a0_se = cfg.alpha0, 0.0
    else:
        a0, a0_se = alpha0(StationaryBase(seed=cell_seed(master, name, 0)), n_paths=cfg.alpha0_paths)
    coef = c0(f) * a0
    res.summary["alpha0"] = {"value": a0, "stderr": a0_se}
    res.summary["coefficient"] = coef

    # closed form: kappa' = kappa^3 from kappa = 1
    dt0 = 1e-5
    curve = GaussMapCurve.uniform(1.0, cfg.closed_form_nodes)
    curve = run_kappa_spde(curve, dt0, 0.0, np.zeros(int(round(0.25 / dt0))))[-1]
    cf_err = float(np.abs(curve.kappa - np.sqrt(2.0)).max())
    res.checks.append(Check("constant kappa, noise off vs closed form", cf_err, "<= 1e-4", cf_err <= 1e-4))

    # Stratonovich mapping: shared fine increments, coarse = pairwise sums
    rng = np.random.default_rng(cell_seed(master, name, 1))
    n_fine = 2 * int(round(cfg.horizon / cfg.dt))
    fine = rng.standard_normal((cfg.paths, n_fine)) * np.sqrt(cfg.dt / 2)
    coarse = fine[:, 0::2] + fine[:, 1::2]
    g1, s1 = stratonovich_gap(coarse, cfg.dt, coef, cfg.stop_N, n_theta=cfg.n_theta)
    g2, s2 = stratonovich_gap(fine, cfg.dt / 2, coef, cfg.stop_N, n_theta=cfg.n_theta)
    for p in range(cfg.paths):
        res.rows.append([p, float(g1[p]), float(g2[p]), bool(s1[p]), bool(s2[p])])
    rms1, rms2 = float(np.sqrt(np.mean(g1**2))), float(np.sqrt(np.mean(g2**2)))
    ratio = rms1 / rms2 if rms2 > 0 else float("inf")
    res.summary["stratonovich"] = {"max_gap": float(g1.max()), "rms_gap_dt": rms1, "rms_gap_half_dt": rms2,
                                   "rms_ratio": ratio, "stopped_fraction": float(s1.mean())}
    res.checks.append(Check("max pathwise gap at dt", float(g1.max()), f"<= {cfg.gap_bound:g}",
                            bool(g1.max() <= cfg.gap_bound)))
    res.checks.append(Check("rms gap ratio dt vs dt/2", ratio, f"in [{cfg.ratio_lo:g}, {cfg.ratio_hi:g}]",
                            bool(cfg.ratio_lo <= ratio <= cfg.ratio_hi)))

    # stopping semantics on a shrinking noise-off circle (R < 1/N triggers)
    N, dts = 10.0, 1e-5
    rp = radius_sde(1.0, dts, 0.5, forcing=None)
    mon = monitor_circle(rp.t, rp.R, N, center=(0.0, 0.0), domain=(-2.0, 2.0, -2.0, 2.0))
    target = (1.0 - 1.0 / N**2) / 2
    hit_err = abs(mon.triggered_at - target) if mon.triggered_at is not None else float("inf")
    res.summary["stopping"] = mon.summary()
    # Euler lags the exact radius by O(dt log) near R = 1/N, hence 10 dt
    ok = mon.clause == "curvature" and hit_err <= 10 * dts
    res.checks.append(Check("sigma_N trigger time vs (1 - N^-2)/2", hit_err, "<= 10 dt, curvature clause", bool(ok)))

    # perturbed curvature, noise off: roundness must decrease
    theta = 2 * np.pi * np.arange(cfg.perturbed_nodes) / cfg.perturbed_nodes
    curve = GaussMapCurve(theta, 1.0 + 0.1 * np.cos(2 * theta))
    h = 2 * np.pi / cfg.perturbed_nodes
    dtp = 0.05 * h * h / 1.5**2
    steps = int(round(cfg.perturbed_horizon / dtp))
    rounds = [curve.roundness()]
    for k in range(steps):
        curve = step_kappa_spde(curve, dtp, 0.0, 0.0)
        if (k + 1) % 50 == 0:
            rounds.append(curve.roundness())
    rounds.append(curve.roundness())
    diffs = np.diff(rounds)
    res.summary["roundness"] = {"first": rounds[0], "last": rounds[-1], "samples": len(rounds)}
    res.checks.append(Check("roundness decreases (perturbed, noise off)", float(diffs.max()), "< 0",
                            bool(np.all(diffs < 0))))

    # perturbed curvature with noise: convexity kept or stopping triggered
    outcomes = []
    dtn = 0.1 * h * h / cfg.stop_N**2
    nsteps = int(round(cfg.perturbed_horizon / dtn))
    for p in range(8):
        rngp = np.random.default_rng(cell_seed(master, name, 2, p))
        c = GaussMapCurve(theta, 1.0 + 0.1 * np.cos(2 * theta))
        outcome = "completed"
        for k in range(nsteps):
            try:
                c = step_kappa_spde(c, dtn, coef, rngp.standard_normal() * np.sqrt(dtn))
            except Exception as exc:  # ConvexityLost and friends count as stopping
                outcome = f"stopped:{type(exc).__name__}"
                break
            if kappa_bar_gauss(c) > cfg.stop_N:
                outcome = "stopped:sigma_N"
                break
        outcomes.append(outcome)
    res.summary["noisy_perturbed_outcomes"] = outcomes
    ok = all(o == "completed" or o.startswith("stopped") for o in outcomes)
    res.checks.append(Check("convexity kept or stopping triggered", float(len(outcomes)), "all paths", ok))
    return res


# ---------------------------------------------------------------- noise bounds


def exp_noise_bounds(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "noise_bounds"
    res = ExperimentResult(name, ["kind", "eps", "index", "value", "bound"], [], _echo(name, cfg, f, master))
    seed = cell_seed(master, name, 0)
    fit = fit_sup_exponent(cfg.eps, cfg.gamma2, cfg.paths, cfg.horizon, seed=seed, resolution=cfg.resolution)
    res.seeds.append(seed)
    for e, m, se in zip(fit["eps"], fit["mean_scaled_sup"], fit["stderr"]):
        res.rows.append(["mn2_mean_scaled_sup", e, cfg.paths, m, se])
    k = fit["exponent"]
    res.summary["mn2"] = fit
    res.checks.append(Check("MN2 sup exponent", k, f"in [{cfg.exponent_lo:g}, {cfg.exponent_hi:g}]",
                            bool(cfg.exponent_lo <= k <= cfg.exponent_hi)))
    ok = True
    for i, eps in enumerate(cfg.eps):
        for j in range(cfg.mn1_paths):
            s = cell_seed(master, name, 1, i, j)
            base = StationaryBase(seed=s)
            path = mn1_noise(base, eps, cfg.gamma1, cfg.horizon)
            b0 = base.clip_level * eps ** (-cfg.gamma1)
            b1 = base.derivative_bound * eps ** (-3 * cfg.gamma1)
            v0 = float(np.abs(path.xi_samples).max())
            v1 = float(np.abs(path.xi_dot_samples).max())
            res.rows.append(["mn1_sup_xi", eps, j, v0, b0])
            res.rows.append(["mn1_sup_xi_dot", eps, j, v1, b1])
            ok &= v0 <= b0 * (1 + 1e-12) and v1 <= b1 * (1 + 1e-12)
            res.seeds.append(s)
            res.checksums.append(path.checksum())
    res.checks.append(Check("MN1 pathwise bounds on xi and xi_dot", float(cfg.mn1_paths * len(cfg.eps)),
                            "all paths within bounds", bool(ok)))
    return res


# ---------------------------------------------------------------- sandwich


def exp_sandwich_cert(cfg, f: Bistable, master: int = 0) -> ExperimentResult:
    name = "sandwich_cert"
    res = ExperimentResult(name, ["seed_index", "seed", "t", "violations", "worst_margin", "eps_p", "q"], [],
                           _echo(name, cfg, f, master))
    eps = cfg.eps
    family = WaveFamily(f, cfg.delta_cal, n_delta=cfg.n_delta)
    grid = Grid2D.unit_square(cfg.n_grid)
    dt = stable_dt(f, eps, grid)
    cells = []
    for j in range(cfg.seeds):
        seed = cell_seed(master, name, 0, j)
        noise = make_noise(cfg.noise, eps, cfg.gamma, 0.02 + cfg.horizon + 0.01, seed)
        a_eps, _, te = generation_time(f, eps, noise)
        # the flow is a reference circle; cut the horizon at its stopping time
        flow = S.CircleFlow((0.5, 0.5), level_radius(f, cfg.R0, cfg.w0, a_eps), cfg.horizon, cfg.flow_dt, eps,
                            noise, family.speed if noise is not None else None, t_shift=te)
        # stop at sigma_N, or once the circle is too small for the smoothing band around it
        T, clause = cut_horizon(flow.path.t, flow.path.R, cfg.horizon, cfg.stop_N, cfg.margin, 2 * cfg.d0 + cfg.margin)
        tt = [T * k / cfg.n_times for k in range(cfg.n_times + 1)]
        sim = SimConfig(eps, f, dt, te + T, grid, initial={"kind": "circle", "R0": cfg.R0, "w0": cfg.w0},
                        noise=noise, snapshot_times=[0.0] + [te + t for t in tt])
        traj = run_simulation(sim)
        u0, u_te = traj.snapshots[0].u, traj.at(te).u
        M0_measured = _m0(u0, u_te, a_eps, eps, f.zeros, 0.1)
        M0 = cfg.M0 if cfg.M0 > 0 else M0_measured
        ls0 = G.extract_level_set(traj.snapshots[0], a_eps)
        d_init = G.signed_distance(ls0, grid, traj.snapshots[0], a_eps).values
        cal = S.calibrate_K(u0, d_init, a_eps, M0, eps)
        cal_measured = S.calibrate_K(u0, d_init, a_eps, M0_measured, eps)
        make = lambda P: S.SubSuperPair(P, eps, family, flow, noise, te)
        pg = Grid2D.unit_square(cfg.probe_grid)
        X, Y = pg.mesh()
        probe_t = list(np.linspace(0.0, T, cfg.probe_times))
        P = S.compute_params(f, family, T_horizon=T, eps0=eps, K=cal["K"], d0=cfg.d0,
                             probe=S.probe_for(make, X, Y, probe_t))
        pair = make(P)
        rep = S.sandwich_check(traj, pair, te, dt, times=tt)
        rtimes = list(np.linspace(0.0, T, cfg.residual_times))
        resid = S.residual_check(pair, grid, rtimes, dt_probe=cfg.dt_probe)
        cert = S.certified_residual(pair, X, Y, probe_t)
        eps_p = [float(eps * P.p(t, eps)) for t in tt]
        informative = max((t for t, v in zip(tt, eps_p) if v <= cfg.d0), default=0.0)
        hc = S.h_check(u_te, d_init, P, cal["M1"], eps, f.zeros)
        # band check of the E3 bound on the probe set
        dmax = float(np.abs(eps * noise.xi_samples).max()) if noise is not None else 0.0
        C3, C3p = S.e3_constants(family, flow.kappa_max(), delta_max=dmax)
        frac, e4 = [], 0.0
        for t in probe_t:
            band = S.regions(pair, X, Y, t)["band"]
            terms = pair.error_terms(X, Y, t, 1)
            lim = C3 + C3p * (np.exp(P.L * t) + P.K)
            frac.append(float(np.mean(np.abs(terms["E3"][band]) <= lim)) if band.any() else 1.0)
            e4 = max(e4, float(np.abs(terms["E4"]).max()))
        for row, v in zip(rep["per_time"], eps_p):
            res.rows.append([j, seed, row["t"], row["violations"], row["worst_margin"], v,
                             float(P.q(row["t"], eps))])
        res.seeds.append(seed)
        if noise is not None:
            res.checksums.append(noise.checksum())
        cells.append({"seed": seed, "t_eps": te, "horizon": T, "stop_clause": clause, "M0": M0,
                      "calibration": cal, "M0_measured": M0_measured, "K_from_measured_M0": cal_measured["K"], "params": P.describe(), "residual": resid, "certified": cert,
                      "sandwich": {k: rep[k] for k in ("violations", "worst_margin", "tol")},
                      "informative_horizon": informative, "h_check": hc,
                      "e3": {"C3": C3, "C3_prime": C3p, "fraction_within": min(frac)}, "max_abs_E4": e4})
        res.checks.append(Check(f"residual check (seed {j})", resid["min_plus"], "passed within FD budget",
                                bool(resid["passed"])))
        res.checks.append(Check(f"ordering u_minus <= u <= u_plus (seed {j})", float(rep["violations"]),
                                "0 violations", bool(rep["passed"])))
    res.summary["cells"] = cells
    return res


EXPERIMENTS = {
    "generation": exp_generation,
    "thickness": exp_thickness,
    "profile": exp_profile,
    "circle_pathwise": exp_circle_pathwise,
    "funaki_kappa": exp_funaki_kappa,
    "l2_step": exp_l2_step,
    "noise_bounds": exp_noise_bounds,
    "sandwich_cert": exp_sandwich_cert,
}


def run_experiment(run_cfg, master: Optional[int] = None) -> ExperimentResult:
    seed = run_cfg.master_seed if master is None else int(master)
    return EXPERIMENTS[run_cfg.experiment](run_cfg.params, run_cfg.nonlinearity(), seed)
