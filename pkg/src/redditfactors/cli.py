"""Command line entry point.

    redditfactors run --config config.yaml
    redditfactors ingest --subreddit wallstreetbets --start 2018-06-01 --end 2019-02-21
    redditfactors synth --dir fixture/

Exit status: 0 on success, 1 for user errors (bad config, missing inputs,
unusable data), 2 for anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .pipeline import STAGES, ConfigError, StageError, parse_config, run_pipeline, validate_config

log = logging.getLogger("redditfactors")

USER_ERRORS = (ConfigError, FileNotFoundError, ValueError, KeyError)


def _add_common(p):
    p.add_argument("--config", help="YAML pipeline config")
    p.add_argument("--subreddit")
    p.add_argument("--start", help="first day, YYYY-MM-DD")
    p.add_argument("--end", help="last day, YYYY-MM-DD")
    p.add_argument("--endpoint", help="Pushshift-compatible comment search URL")
    p.add_argument("--out", help="output directory")
    p.add_argument("--force", action="store_true", help="rerun stages even if up to date")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="redditfactors", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "run"):
        _add_common(sub.add_parser(name, help=f"run the {name} stage" if name != "run" else "run every stage"))
    synth = sub.add_parser("synth", help="write a synthetic corpus, returns panel and config")
    synth.add_argument("--dir", required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--loading", action="append", default=[], metavar="SYM=VALUE",
                       help="planted f_all loading, e.g. WMT=60")
    return parser


def load_config(args):
    overrides = {
        "subreddit": args.subreddit,
        "start": args.start,
        "end": args.end,
        "endpoint": args.endpoint,
        "output_dir": str(Path(args.out).resolve()) if args.out else None,
    }
    if args.config:
        return validate_config(args.config, overrides)
    return parse_config({}, Path.cwd(), overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            from .synthetic import write_fixture
            loadings = {}
            for item in args.loading:
                sym, _, val = item.partition("=")
                loadings[sym.upper()] = float(val)
            path = write_fixture(args.dir, loadings=loadings, seed=args.seed)
            print(path)
            return 0
        config = load_config(args)
        stages = STAGES if args.command == "run" else (args.command,)
        result = run_pipeline(config, stages, force=args.force)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc.cause, USER_ERRORS) else 2
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    for stage in result.ran:
        print(f"ran {stage}")
    for stage in result.skipped:
        print(f"skipped {stage} (up to date)")
    print(f"manifest: {Path(config.output_dir) / 'manifest.json'} ({len(result.manifest['files'])} files)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
