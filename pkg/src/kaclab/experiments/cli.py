"""Command line entry point: ``kaclab <mode> --config c.json --out dir``."""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import KaclabError
from .config import MODES, ExperimentConfig
from .runners import run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="kaclab", description="Ising-Kac / Phi^4_2 experiments")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="root seed (u64), overrides the config")
        p.add_argument("--out", default=f"out-{mode}", help="output directory")
        p.add_argument("--replicas", type=int, help="number of replicas, overrides the config")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        data = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        data["mode"] = args.mode
        config = ExperimentConfig.from_dict(data)
        summary = run_experiment(config, args.out, seed=args.seed, replicas=args.replicas,
                                 threads=args.threads)
    except KaclabError as exc:
        print(f"kaclab: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
