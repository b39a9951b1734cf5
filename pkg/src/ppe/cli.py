"""Command-line harness: case-study runners plus the validation suite."""

from __future__ import annotations

import argparse
import json
import sys

from .cases import RUNNERS, StreamConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppe",
        description="Prediction-powered e-process case studies and validation suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for case in ("mean", "risk", "changepoint", "causal"):
        p = sub.add_parser(case, help=f"run the {case} case study")
        p.add_argument("--config", help="JSON config file (CLI flags override it)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--budget", type=float, default=None, help="label budget pi_inf")
        p.add_argument("--policy", choices=("constant", "active"), default=None)
        p.add_argument("--arms", default=None,
                       help="comma-separated subset of labels_only,ppi,active,imputation")
        p.add_argument("--out", default=None, help="output directory")

    v = sub.add_parser("validate", help="run the Monte Carlo acceptance suites")
    v.add_argument("--only", default=None,
                   help="comma-separated criterion numbers (default: all)")
    v.add_argument("--out", default=None, help="optional JSON report path")
    return parser


def _config_from_args(args) -> StreamConfig:
    overrides = {
        "seed": args.seed,
        "n": args.n,
        "alpha": args.alpha,
        "pi_inf": args.budget,
        "policy": args.policy,
        "arms": tuple(args.arms.split(",")) if args.arms else None,
        "out_dir": args.out,
    }
    if args.config:
        cfg = StreamConfig.from_file(args.config, case=args.command, **overrides)
    else:
        clean = {k: v for k, v in overrides.items() if v is not None}
        cfg = StreamConfig(case=args.command, **clean)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        from . import validation

        only = None
        if args.only:
            only = sorted(int(tok) for tok in args.only.split(","))
        results = validation.run_criteria(only=only, verbose=True)
        if args.out:
            with open(args.out, "w") as fh:
                json.dump([r.as_dict() for r in results], fh, indent=1, sort_keys=True)
                fh.write("\n")
        return 0 if all(r.passed for r in results) else 1

    try:
        config = _config_from_args(args)
        config.validate()
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: invalid configuration: {err}", file=sys.stderr)
        return 2
    result = RUNNERS[args.command](config)
    print(json.dumps(result, sort_keys=True, default=str, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
