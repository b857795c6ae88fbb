"""Command-line entry point.

Subcommands: converge, mv-check, solve-spde, simulate-particles,
kernel-table.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, NumericalError
from .harness import _COMMANDS, RunConfig, rerun_from_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexlab",
        description="Stochastic point-vortex / vorticity-SPDE laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML configuration file (defaults used if omitted)")
        p.add_argument("--from-manifest", help="re-run a recorded manifest.json bit-exactly")
        p.add_argument("--out-dir", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes for replicas")
        p.add_argument("--seed-override", type=int, default=None, help="replace the config's master seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.from_manifest:
            if args.seed_override is not None or args.config:
                raise ConfigError("--from-manifest excludes --config and --seed-override")
            rerun_from_manifest(args.from_manifest, args.out_dir, threads=args.threads)
        else:
            cfg = RunConfig.from_file(args.config) if args.config else RunConfig.default()
            if args.seed_override is not None:
                cfg.master_seed = args.seed_override
            _COMMANDS[args.command](cfg, args.out_dir, threads=args.threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
