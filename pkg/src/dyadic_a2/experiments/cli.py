"""Command line entry point: ``dyadic-a2 <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from ..dyadic import system_from_json, system_to_json, verify_system
from .batteries import run_lemma_battery
from .config import RunConfig, SpaceSpec, build_context, build_space, parse_cell
from .sweeps import run_a2_sweep, run_complexity_sweep


def _config(path) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()


def _print_checks(checks: dict):
    for name, (value, passed) in checks.items():
        print(f"{'PASS' if passed else 'FAIL'} {name} = {value:.6g}")


def cmd_build_grid(args) -> int:
    cfg = _config(args.config)
    ctx = build_context(cfg)
    rep = verify_system(ctx.system, ctx.space)
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = system_to_json(ctx.system)
    data["space"] = asdict(cfg.space)
    path = out / "system.json"
    path.write_text(json.dumps(data, sort_keys=True))
    print(f"{ctx.space.name}: {len(ctx.system.cubes)} cubes, levels {ctx.system.k_min}..{ctx.system.k_max}, "
          f"{ctx.adjacent.J} adjacent systems (D = {ctx.adjacent.d_constant:.3g})")
    print(f"wrote {path}")
    return _report_system(rep)


def _report_system(rep) -> int:
    for p in ("p1", "p2", "p3", "p4", "p5"):
        print(f"{'PASS' if getattr(rep, p) else 'FAIL'} {p}")
    print(f"C = {rep.c_observed:.6g}, eps = {rep.eps_observed:.6g}")
    for v in rep.violations[:20]:
        print(f"  {v}")
    return 0 if rep.ok and rep.eps_observed > 0 else 1


def cmd_verify(args) -> int:
    data = json.loads(Path(args.system).read_text())
    if "space" not in data:
        print("snapshot lacks a space description", file=sys.stderr)
        return 2
    space = build_space(SpaceSpec(**data["space"]))
    system = system_from_json(data, space)
    return _report_system(verify_system(system, space))


def _sweep(args, runner) -> int:
    cfg = _config(args.config)
    cell = parse_cell(args.cell)
    out = Path(args.out or cfg.out)
    result = runner(cfg, cell=cell, out=out)
    if cell:
        for row in result.rows:
            print(json.dumps(row, sort_keys=True))
    for s in result.slopes:
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in s.items()))
    _print_checks(result.checks)
    return 0 if result.ok else 1


def cmd_sweep_a2(args) -> int:
    return _sweep(args, run_a2_sweep)


def cmd_sweep_complexity(args) -> int:
    return _sweep(args, run_complexity_sweep)


def cmd_fuzz(args) -> int:
    cfg = _config(args.config)
    out = Path(args.out or cfg.out)
    report = run_lemma_battery(cfg, out=out, include_operators=args.operators)
    for r in report.rows:
        tag = "PASS" if r["passed"] else "FAIL"
        print(f"{tag} {r['battery']}:{r['check']} cases={r['cases']} violations={r['violations']} seed={r['seed']}")
    for name, secs in report.timings.items():
        print(f"{name}: {secs:.1f} s")
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadic-a2", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-grid", help="build the space, dyadic system and adjacent family")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_grid)

    p = sub.add_parser("verify", help="check a saved dyadic system snapshot")
    p.add_argument("--system", required=True)
    p.set_defaults(func=cmd_verify)

    for name, func, helptext in (
        ("sweep-a2", cmd_sweep_a2, "weighted norms against the A2 characteristic"),
        ("sweep-complexity", cmd_sweep_complexity, "weak (1,1) constants against complexity"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--cell", help="reproduce one cell, e.g. alpha=0.9,k=3")
        p.set_defaults(func=func)

    p = sub.add_parser("fuzz", help="median, dyadic and sparse-family batteries")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--operators", action="store_true", help="also measure operator constants")
    p.set_defaults(func=cmd_fuzz)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
