"""Command line: ``nodalbm run|validate|list-experiments``."""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import EXPERIMENTS, ConfigError, load_config, run_experiment


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _parser():
    p = argparse.ArgumentParser(prog="nodalbm", description="Brownian-motion experiments on nodal domains.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=_u64, help="override walk.seed")
    r.add_argument("--out", help="override the output directory")
    v = sub.add_parser("validate", help="check a config against the schema")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="list experiment ids")
    return p


def _report(diags, stream):
    for path, msg in diags:
        print(f"{path}: {msg}", file=stream)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-experiments":
        for k, desc in EXPERIMENTS.items():
            print(f"{k}\t{desc}")
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _report(exc.diagnostics, sys.stderr)
        return 2
    except OSError as exc:
        print(f"{args.config}: {exc.strerror}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print("ok")
        return 0
    try:
        summary = run_experiment(cfg, seed=args.seed, out=args.out)
    except ConfigError as exc:
        _report(exc.diagnostics, sys.stderr)
        return 2
    for c in summary["checks"]:
        est = c.get("estimate")
        est = json.dumps(est) if isinstance(est, list) else est
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}  estimate={est}  reference={c.get('reference')}")
    print(f"{summary['experiment']}: {'passed' if summary['passed'] else 'FAILED'}")
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
