"""Command line entry point.

    adaptive-observer run <config|preset> [--horizon N] [--out DIR] [--variant V] [--lam L]
    adaptive-observer compare <config|preset> [--horizon N] [--out DIR] [--lam L]
    adaptive-observer presets list
    adaptive-observer validate <config|preset>
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config, load_raw, preset_names
from .estimator import VARIANTS
from .runner import compare_estimators, run_experiment, write_outputs

log = logging.getLogger("adaptive_observer")


def _load(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(horizon=args.horizon, variant=getattr(args, "variant", None),
                              lam=getattr(args, "lam", None) if getattr(args, "variant", None)
                              else None,
                              output_dir=args.out)


def cmd_run(args) -> int:
    cfg = _load(args)
    trajectory = run_experiment(cfg)
    paths = write_outputs(trajectory, cfg.output_dir)
    print(trajectory.summary_text(), end="")
    print(f"csv: {paths['csv']}\nsummary: {paths['summary']}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    cmp = compare_estimators(cfg, lam=args.lam)
    p1 = write_outputs(cmp.reset, cfg.output_dir, f"{cfg.name}_covariance_reset")
    p2 = write_outputs(cmp.forgetting, cfg.output_dir, f"{cfg.name}_forgetting")
    table = cfg_output(cfg.output_dir, f"{cfg.name}_comparison.txt")
    table.write_text(cmp.table_text())
    print(cmp.table_text(), end="")
    for p in (p1["csv"], p2["csv"], table):
        print(f"wrote {p}")
    return 0


def cfg_output(out_dir, name):
    from pathlib import Path
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path / name


def cmd_presets(args) -> int:
    for name in preset_names():
        raw = load_raw(name)
        print(f"{name:<12} [{raw.get('provenance', '?')}] {raw.get('description', '')}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    dims = cfg.plant.dims
    print(f"{cfg.name}: ok (q={dims.q}, m={dims.m}, r={dims.r}, n={dims.n}, d={dims.d}, "
          f"horizon={cfg.horizon}, variant={cfg.estimator.variant})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-observer",
                                     description="Adaptive observer experiment harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and write CSV + summary")
    p_cmp = sub.add_parser("compare", help="covariance resetting vs forgetting baseline")
    for p in (p_run, p_cmp):
        p.add_argument("config", help="JSON config path or preset name")
        p.add_argument("--horizon", type=int, default=None, help="override the horizon")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--lam", type=float, default=None,
                       help="forgetting factor for the forgetting variant")
    p_run.add_argument("--variant", choices=VARIANTS, default=None)
    p_run.set_defaults(func=cmd_run)
    p_cmp.set_defaults(func=cmd_compare)

    p_pre = sub.add_parser("presets", help="preset configurations")
    p_pre.add_argument("action", choices=["list"])
    p_pre.set_defaults(func=cmd_presets)

    p_val = sub.add_parser("validate", help="validate a config without running it")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
