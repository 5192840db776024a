"""Command-line entry point.

    synthdb run --config cfg.json [--epsilon E] [--delta D] [--sigma S ...]
                [--K K ...] [--C C] [--R R] [--subset {pca,uniform}]
                [--seed S ...] [--jobs J] [--m-max M] [--out DIR]

Exit codes: 0 all cells ok, 2 some cells failed, 1 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ExperimentConfig, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthdb",
                                     description="Private synthetic databases for smooth queries")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a benchmark sweep from a config file")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--epsilon", type=float, default=None)
    run.add_argument("--delta", type=float, default=None)
    run.add_argument("--sigma", type=float, action="append", default=None,
                     help="query bandwidth; repeat for a sweep")
    run.add_argument("--K", type=float, action="append", default=None,
                     help="smoothness override per sigma")
    run.add_argument("--C", type=int, default=None, help="grid-subset size")
    run.add_argument("--R", type=int, default=None, help="basis-subset size")
    run.add_argument("--subset", choices=["pca", "uniform"], default=None)
    run.add_argument("--seed", type=int, action="append", default=None,
                     help="root seed; repeat for several rounds")
    run.add_argument("--jobs", type=int, default=None)
    run.add_argument("--m-max", type=int, default=None, dest="m_max")
    run.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_json(args.config)
        overrides = {
            "epsilon": args.epsilon, "delta": args.delta, "sigmas": args.sigma,
            "smoothness": args.K, "C": args.C, "R": args.R,
            "subset": args.subset, "seeds": args.seed, "jobs": args.jobs,
            "m_max": args.m_max, "out_dir": args.out,
        }
        fields = {k: v for k, v in overrides.items() if v is not None}
        if fields:
            merged = {**cfg.to_dict(), **fields}
            merged.pop("schema_version", None)
            if args.delta is not None:
                merged["mode"] = "approx" if args.delta > 0 else "pure"
            cfg = ExperimentConfig(**merged)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"synthdb: config error: {exc}", file=sys.stderr)
        return 1
    result = run_experiment(cfg)
    ok = len(result.report["cells"]) - result.failed_cells
    print(f"synthdb: {ok}/{len(result.report['cells'])} cells ok; "
          f"report at {result.report_path}")
    return 0 if result.all_ok else 2


if __name__ == "__main__":
    sys.exit(main())
