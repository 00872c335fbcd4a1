"""Command-line entry point.

Usage::

    streampca <trajectory|sweep|ou|bias|realdata> --config spec.json --out dir
              [--seed N] [--workers N]

The subcommand selects the experiment kind; the JSON config supplies the
model and run parameters (see :mod:`streampca.experiments`). ``--seed``
overrides the config's base seed, ``--workers`` sets the process-pool
width for replicate execution.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import run_experiment

_SUBCOMMAND_KINDS = {
    "trajectory": "trajectory",
    "sweep": "block-sweep",
    "ou": "ou-ensemble",
    "bias": "bias-probe",
    "realdata": "realdata",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streampca",
        description="Streaming PCA experiment runner for stationary time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in _SUBCOMMAND_KINDS.items():
        p = sub.add_parser(name, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="JSON experiment spec")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument("--workers", type=int, default=1, help="replicate process pool size")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    kind = _SUBCOMMAND_KINDS[args.command]
    declared = cfg.get("kind")
    if declared is not None and declared != kind:
        print(
            f"error: config kind {declared!r} does not match subcommand {args.command!r}",
            file=sys.stderr,
        )
        return 2
    cfg["kind"] = kind
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        result = run_experiment(cfg, args.out, workers=args.workers)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    json.dump(result, sys.stdout, indent=2, default=str)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
