"""``sac`` command line: run, validate, wave, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ConfigError
from ..reaction import make_cubic
from .config import load_config


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def cmd_run(args) -> int:
    from .experiments import run_experiment
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    res = run_experiment(cfg, args.seed)
    res.write(args.out)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {res.name}: {c.rule} = {c.value:.4g} ({c.bound})")
    for flag in res.flags:
        print(f"FLAG {res.name}: {flag}")
    return 0 if res.passed else 1


def cmd_validate(args) -> int:
    from .suites import run_suite
    try:
        results = run_suite(args.suite, args.out, args.seed)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    print(f"{sum(c.passed for c in results)}/{len(results)} criteria passed")
    return 0 if all(c.passed for c in results) else 1


def cmd_wave(args) -> int:
    from ..wave import solve_wave
    f = make_cubic()
    prof = solve_wave(f, args.delta)
    info = {"delta": args.delta, "c": float(prof.c), "zeros": [float(prof.a_minus_delta), float(prof.a_delta),
                                                                float(prof.a_plus_delta)]}
    if args.out:
        prof.to_csv(args.out)
        info["csv"] = str(args.out)
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    root = Path(args.dir)
    files = sorted(p for p in root.rglob("*.json") if p.name != "suite.json")
    suites = sorted(root.rglob("suite.json"))
    if not files and not suites:
        print(f"no manifests under {root}", file=sys.stderr)
        return 2
    ok = True
    for path in files:
        data = json.loads(path.read_text(encoding="utf-8"))
        for c in data.get("checks", []):
            ok &= bool(c["passed"])
            print(f"{'PASS' if c['passed'] else 'FAIL'} {data.get('experiment', path.stem)}: {c['rule']}")
    for suite in suites:
        data = json.loads(suite.read_text(encoding="utf-8"))
        for c in data["criteria"]:
            ok &= bool(c["passed"])
            print(f"{'PASS' if c['passed'] else 'FAIL'} criterion {c['number']} {c['name']}")
    print("all passed" if ok else "some checks failed")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sac", description="Stochastic Allen-Cahn experiments and checks.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=_u64, default=None, help="override the master seed")
    r.set_defaults(fn=cmd_run)
    v = sub.add_parser("validate", help="run an acceptance suite")
    v.add_argument("--suite", required=True, help="acceptance, fast, or a single criterion name")
    v.add_argument("--out", required=True)
    v.add_argument("--seed", type=_u64, default=0)
    v.set_defaults(fn=cmd_validate)
    w = sub.add_parser("wave", help="traveling wave of the cubic for a constant shift")
    w.add_argument("--delta", type=float, required=True)
    w.add_argument("--out", default=None, help="optional CSV path for the profile")
    w.set_defaults(fn=cmd_wave)
    rep = sub.add_parser("report", help="aggregate PASS/FAIL from manifests under a directory")
    rep.add_argument("--dir", required=True)
    rep.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
