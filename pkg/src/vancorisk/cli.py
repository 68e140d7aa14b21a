"""Command-line entry point: ``vancorisk STAGE`` or ``vancorisk run``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, SchemaError, VancoriskError
from .pipeline import STAGES, load_config, resolve_out, resolve_threads, run_stage


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", help="artifact directory (env VANCORISK_OUT wins)")
    common.add_argument("--threads", type=int, help="worker cap (env VANCORISK_THREADS caps)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vancorisk", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run the whole pipeline")
    r.add_argument("--stage", choices=STAGES, action="append",
                   help="run only this stage (repeatable)")
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    return p


def _config(args):
    path = args.config
    out = resolve_out(args.out)
    if path is None and (Path(out) / "config.json").exists():
        path = Path(out) / "config.json"  # later stages reuse the run's config
    cfg = load_config(path, {"seed": args.seed})
    cfg["threads"] = resolve_threads(args.threads, cfg)
    return cfg, resolve_out(args.out, cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    stage = None
    try:
        cfg, out = _config(args)
        stages = (args.stage or STAGES) if args.command == "run" else [args.command]
        for stage in stages:
            run_stage(stage, cfg, out)
    except VancoriskError as exc:
        record = {"error": type(exc).__name__, "stage": stage, "message": str(exc)}
        if isinstance(exc, SchemaError) and exc.field is not None:
            record["field"] = exc.field
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "stage": stage, "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
