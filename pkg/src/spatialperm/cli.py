"""Command line entry point: seeded, configured experiment runs.

``spatialperm run --config cfg.json`` executes one experiment; flags
override config-file fields, which override the shipped preset.  Exit
status is nonzero for unknown experiments or invalid parameter
combinations.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    EXPERIMENT_NAMES,
    InvalidConfigError,
    UnknownExperimentError,
    load_preset,
    resolve_config,
    run,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatialperm")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run one experiment")
    runp.add_argument("--config", help="JSON config document")
    runp.add_argument("--experiment", choices=EXPERIMENT_NAMES)
    runp.add_argument("--m", type=int)
    runp.add_argument("--cprime", type=float)
    runp.add_argument("--a", type=float)
    runp.add_argument("--seed", type=int)
    runp.add_argument("--samples", type=int)
    runp.add_argument("--updates", type=int)
    runp.add_argument("--reps", type=int)
    runp.add_argument("--out", dest="output_dir")
    runp.add_argument("--format", choices=["csv", "json"])
    runp.add_argument("--workers", type=int)

    show = sub.add_parser("preset", help="print an experiment's preset")
    show.add_argument("experiment", choices=EXPERIMENT_NAMES)

    sub.add_parser("list", help="list experiments")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list":
        for name in EXPERIMENT_NAMES:
            print(name)
        return 0
    if args.command == "preset":
        print(json.dumps(load_preset(args.experiment), indent=1, sort_keys=True))
        return 0

    doc = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 2
    for name in ("experiment", "m", "cprime", "a", "seed", "samples",
                 "updates", "reps", "output_dir", "format", "workers"):
        val = getattr(args, name, None)
        if val is not None:
            doc[name] = val
    try:
        cfg = resolve_config(doc)
        record = run(cfg)
    except (UnknownExperimentError, InvalidConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"experiment": record.experiment,
                      "summary": record.summary,
                      "result": record.result_path,
                      "wall_time_s": round(record.wall_time_s, 3)}, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
