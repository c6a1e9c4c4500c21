"""Experiment configuration: dataclasses with defaults plus a strict INI reader.

A config file looks like::

    [run]
    experiment = thickness
    master_seed = 7

    [model]
    nonlinearity = cubic

    [thickness]
    eps = 0.04, 0.02, 0.01
    seeds = 3

Keys in the experiment section must be fields of that experiment's config
class.  Unknown sections or keys raise :class:`~sac.errors.ConfigError`.
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

from ..errors import ConfigError
from ..reaction import Bistable, from_polynomial, make_cubic

Floats = Tuple[float, ...]


@dataclass(frozen=True)
class GenerationConfig:
    eps: Floats = (0.04, 0.02, 0.01)
    seeds: int = 5
    eta: float = 0.1
    noise: str = "mn2"
    gamma: float = 0.5
    n_grid: int = 256
    R0: float = 0.35
    w0: float = 1.0
    horizon_factor: float = 3.0
    n_snapshots: int = 60
    degenerate: bool = False


@dataclass(frozen=True)
class ThicknessConfig:
    eps: Floats = (0.04, 0.02, 0.01)
    seeds: int = 5
    eta: float = 0.1
    noise: str = "both"
    gamma: float = 0.5
    n_grid: int = 256
    R0: float = 0.35
    w0: float = 0.1
    horizon: float = 0.05
    stop_N: float = 10.0
    margin: float = 0.005
    min_radius_over_eps: float = 4.0
    C_probe: float = 8.0
    n_times: int = 10
    flow_dt: float = 1e-5


@dataclass(frozen=True)
class ProfileConfig:
    eps: Floats = (0.04, 0.02, 0.01)
    seeds: int = 5
    noise: str = "mn2"
    gamma: float = 0.5
    n_grid: int = 256
    R0: float = 0.35
    w0: float = 0.1
    rho_time: float = 2.0
    horizon: float = 0.05
    stop_N: float = 10.0
    margin: float = 0.005
    min_radius_over_eps: float = 4.0
    band: float = 8.0
    n_times: int = 10
    tolerance: float = 0.05
    flow_dt: float = 1e-5


@dataclass(frozen=True)
class CirclePathwiseConfig:
    eps: Floats = (0.04, 0.02, 0.01)
    seeds: int = 5
    noise: str = "mn2"
    gamma: float = 0.5
    R0: float = 0.35
    w0: float = 0.1
    horizon: float = 0.05
    r_max: float = 1.0
    h_over_eps: float = 0.125
    record_every: int = 4
    stop_N: float = 10.0
    margin: float = 0.005
    min_radius_over_eps: float = 4.0
    bound: float = 5.0
    ratio_lo: float = 0.6
    ratio_hi: float = 1.6


@dataclass(frozen=True)
class FunakiConfig:
    paths: int = 64
    horizon: float = 0.2
    dt: float = 1e-5
    stop_N: float = 5.0
    n_theta: int = 8
    alpha0: float = 0.0
    alpha0_paths: int = 50
    gap_bound: float = 1e-3
    ratio_lo: float = 1.7
    ratio_hi: float = 2.3
    closed_form_nodes: int = 64
    perturbed_nodes: int = 64
    perturbed_horizon: float = 0.1


@dataclass(frozen=True)
class L2StepConfig:
    eps: Floats = (0.04, 0.02, 0.01)
    seeds: int = 5
    noise: str = "mn2"
    gamma: float = 0.5
    n_grid: int = 256
    R0: float = 0.35
    w0: float = 0.1
    horizon: float = 0.05
    stop_N: float = 10.0
    margin: float = 0.005
    min_radius_over_eps: float = 4.0
    n_times: int = 10
    budget: float = 0.15
    flow_dt: float = 1e-5


@dataclass(frozen=True)
class NoiseBoundsConfig:
    eps: Floats = (0.04, 0.02, 0.01)
    gamma2: float = 0.5
    gamma1: float = 0.25
    paths: int = 200
    horizon: float = 1.0
    resolution: int = 32
    exponent_lo: float = 0.20
    exponent_hi: float = 0.30
    mn1_paths: int = 5


@dataclass(frozen=True)
class SandwichConfig:
    eps: float = 0.02
    seeds: int = 1
    noise: str = "mn2"
    gamma: float = 0.5
    n_grid: int = 256
    R0: float = 0.35
    w0: float = 0.1
    horizon: float = 0.05
    stop_N: float = 10.0
    margin: float = 0.005
    n_times: int = 10
    d0: float = 0.1
    M0: float = 1.0
    delta_cal: float = 0.3
    n_delta: int = 13
    probe_grid: int = 129
    probe_times: int = 11
    residual_times: int = 3
    dt_probe: float = 1e-5
    flow_dt: float = 1e-5


CONFIGS = {
    "generation": GenerationConfig,
    "thickness": ThicknessConfig,
    "profile": ProfileConfig,
    "circle_pathwise": CirclePathwiseConfig,
    "funaki_kappa": FunakiConfig,
    "l2_step": L2StepConfig,
    "noise_bounds": NoiseBoundsConfig,
    "sandwich_cert": SandwichConfig,
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    master_seed: int
    model: dict
    params: object

    def nonlinearity(self) -> Bistable:
        return build_nonlinearity(self.model)

    def echo(self) -> dict:
        return {"experiment": self.experiment, "master_seed": self.master_seed, "model": dict(self.model),
                "params": dataclasses.asdict(self.params)}


def build_nonlinearity(model: dict) -> Bistable:
    kind = model.get("nonlinearity", "cubic")
    if kind == "cubic":
        return make_cubic()
    if kind == "polynomial":
        coeffs = model.get("coefficients")
        if not coeffs:
            raise ConfigError("a polynomial nonlinearity needs 'coefficients'")
        return from_polynomial([float(c) for c in coeffs])
    raise ConfigError(f"unknown nonlinearity {kind!r}")


def _convert(raw: str, typ, key: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is str:
            return raw.strip()
        if typing.get_origin(typ) is tuple:
            return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    raise ConfigError(f"unsupported type for {key!r}")


def make_params(experiment: str, values: dict):
    """Build the experiment's config object from string values, rejecting unknown keys."""
    if experiment not in CONFIGS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {sorted(CONFIGS)}")
    cls = CONFIGS[experiment]
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{experiment}]: {sorted(unknown)}")
    kw = {k: (_convert(v, hints[k], k) if isinstance(v, str) else v) for k, v in values.items()}
    return cls(**kw)


_RUN_KEYS = {"experiment", "master_seed"}
_MODEL_KEYS = {"nonlinearity", "coefficients"}


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), interpolation=None, strict=True)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "run" not in cp:
        raise ConfigError("missing [run] section")
    run = dict(cp["run"])
    if set(run) - _RUN_KEYS:
        raise ConfigError(f"unknown keys in [run]: {sorted(set(run) - _RUN_KEYS)}")
    if "experiment" not in run:
        raise ConfigError("[run] needs 'experiment'")
    experiment = run["experiment"].strip()
    model = {}
    if "model" in cp:
        model = dict(cp["model"])
        if set(model) - _MODEL_KEYS:
            raise ConfigError(f"unknown keys in [model]: {sorted(set(model) - _MODEL_KEYS)}")
        if "coefficients" in model:
            model["coefficients"] = [float(c) for c in model["coefficients"].split(",")]
    allowed = {"run", "model", experiment}
    extra = [s for s in cp.sections() if s not in allowed]
    if extra:
        raise ConfigError(f"unknown sections: {extra}")
    values = dict(cp[experiment]) if experiment in cp else {}
    try:
        seed = int(run.get("master_seed", "0"))
    except ValueError as exc:
        raise ConfigError("master_seed must be an integer") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("master_seed must fit in an unsigned 64-bit integer")
    build_nonlinearity(model)
    return RunConfig(experiment, seed, model, make_params(experiment, values))


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
