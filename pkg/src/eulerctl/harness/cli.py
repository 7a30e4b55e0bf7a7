"""Command-line entry point: ``eulerctl <kind> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import KINDS, ConfigError, ExperimentConfig
from .run import EXIT_CONFIG, run

log = logging.getLogger("eulerctl")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eulerctl", description="Reproducible Galerkin-Euler control experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", help="TOML experiment file (defaults apply when omitted)")
        p.add_argument("--out", required=True, help="artifact directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="dotted override, repeatable (e.g. synthesis.n=16)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.config:
            cfg = ExperimentConfig.from_toml(args.config, args.override, kind=args.kind)
        else:
            cfg = ExperimentConfig.from_dict({"kind": args.kind}, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s into %s", cfg.kind, args.out)
    status = run(cfg, args.out)
    log.info("exit status %d", status)
    return status


if __name__ == "__main__":
    sys.exit(main())
