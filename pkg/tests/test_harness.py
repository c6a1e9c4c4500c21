import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.errors import ConfigError
from sac.harness import config as C
from sac.harness.cli import main
from sac.harness.experiments import EXPERIMENTS, cell_seed, cut_horizon
from sac.harness.io import config_hash, read_csv, write_csv
from sac.harness.suites import TINY
from sac.reaction import make_cubic

F = make_cubic()

NOISE_INI = """
[run]
experiment = noise_bounds
master_seed = 3

[noise_bounds]
paths = 4
mn1_paths = 1
horizon = 0.2
"""


def test_config_parses_and_rejects_unknowns():
    rc = C.parse_config(NOISE_INI)
    assert rc.experiment == "noise_bounds" and rc.master_seed == 3
    assert rc.params.paths == 4 and rc.params.eps == (0.04, 0.02, 0.01)
    with pytest.raises(ConfigError):
        C.parse_config(NOISE_INI + "bogus = 1\n")
    with pytest.raises(ConfigError):
        C.parse_config(NOISE_INI + "[extra]\nx = 1\n")
    with pytest.raises(ConfigError):
        C.parse_config(NOISE_INI.replace("master_seed = 3", f"master_seed = {2**64}"))
    with pytest.raises(ConfigError):
        C.parse_config(NOISE_INI.replace("noise_bounds\nmaster", "nothing\nmaster"))
    with pytest.raises(ConfigError):
        C.parse_config("[run]\nexperiment = thickness\n[model]\nnonlinearity = quartic\n")


def test_polynomial_model():
    rc = C.parse_config("[run]\nexperiment = thickness\n[model]\nnonlinearity = polynomial\n"
                        "coefficients = 0, 1, 0, -1\n")
    assert rc.nonlinearity().zeros == pytest.approx((-1, 0, 1), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 50), st.integers(0, 50))
def test_cell_seeds_are_63_bit_and_distinct(master, i, j):
    a = cell_seed(master, "thickness", i, j)
    assert 0 <= a < 2**63
    assert a == cell_seed(master, "thickness", i, j)
    assert a != cell_seed(master, "profile", i, j)
    assert a != cell_seed(master, "thickness", i, j + 1)


def test_csv_format(tmp_path):
    p = write_csv(tmp_path / "x.csv", ["a", "b"], [[0.1, "x,y"], [np.float64(2.5), None]])
    raw = p.read_bytes()
    assert b"\r" not in raw
    assert raw == b'a,b\n0.1,"x,y"\n2.5,\n'
    assert read_csv(p) == (["a", "b"], [["0.1", "x,y"], ["2.5", ""]])
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


def test_cut_horizon_clauses():
    t = np.linspace(0, 0.1, 1001)
    shrink = np.sqrt(0.35**2 - 2 * t.clip(max=0.06))
    T, clause = cut_horizon(t, shrink, 0.05, 10.0, 0.005, 0.0)
    assert (T, clause) == (pytest.approx(0.05), None)
    T, clause = cut_horizon(t, shrink, 0.1, 10.0, 0.005, 0.2)
    # R < 0.2 first at t = (0.35^2 - 0.2^2) / 2
    assert clause == "radius" and T == pytest.approx((0.1225 - 0.04) / 2 - 0.005, abs=2e-4)
    T, clause = cut_horizon(t, 0.3 + t, 0.1, 10.0, 0.005, 0.0)
    assert clause == "boundary" and T == pytest.approx(0.1 - 0.005, abs=2e-4)


@pytest.mark.parametrize("name", sorted(TINY))
def test_tiny_runs_are_byte_identical(name, tmp_path):
    bodies = []
    for k in range(2):
        res = EXPERIMENTS[name](TINY[name], F, 123)
        assert res.rows, "a tiny run with no rows compares nothing"
        res.write(tmp_path / str(k))
        bodies.append((tmp_path / str(k) / f"{name}.csv").read_bytes())
        manifest = json.loads((tmp_path / str(k) / f"{name}.json").read_text())
        assert manifest["config_hash"] == res.config_hash
    assert bodies[0] == bodies[1]
    header = bodies[0].split(b"\n")[0]
    assert header.endswith(b"config_hash")


def test_degenerate_generation_is_flagged():
    cfg = C.GenerationConfig(eps=(0.04,), seeds=1, n_grid=64, n_snapshots=10, degenerate=True)
    res = EXPERIMENTS["generation"](cfg, F, 0)
    assert any("NonDegenerateViolation" in fl for fl in res.flags)
    assert res.checks == []


def test_cli_wave(tmp_path, capsys):
    assert main(["wave", "--delta", "0.1", "--out", str(tmp_path / "w.csv")]) == 0
    info = json.loads(capsys.readouterr().out)
    am, a, ap = info["zeros"]
    assert info["c"] == pytest.approx((2 * a - am - ap) / np.sqrt(2), abs=1e-6)
    assert (tmp_path / "w.csv").exists() and (tmp_path / "w.json").exists()


def test_cli_run_and_report(tmp_path, capsys):
    ini = tmp_path / "n.ini"
    ini.write_text(NOISE_INI)
    code = main(["run", "--config", str(ini), "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code in (0, 1) and "noise_bounds" in out
    assert main(["report", "--dir", str(tmp_path / "out")]) == code
    assert main(["report", "--dir", str(tmp_path / "empty")]) == 2


def test_cli_usage_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nexperiment = nope\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["validate", "--suite", "nope", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(bad), "--out", str(tmp_path), "--seed", "-1"])
    assert exc.value.code == 2
