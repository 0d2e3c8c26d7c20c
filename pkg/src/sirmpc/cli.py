"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .config import load_config, preset_names, preset_path
from .errors import ConfigError, NumericFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = {
    "simulate": "uncontrolled",
    "single-interval": "single-interval",
    "optimal-interval": "optimal-interval",
    "mpc": "mpc",
    "phase-portrait": "phase-portrait",
    "sweep": "s-infinity-sweep",
}

_HELP = {
    "simulate": "uncontrolled epidemic",
    "single-interval": "one distancing interval with a fixed reproduction number",
    "optimal-interval": "quasi-optimal single interval from a start time",
    "mpc": "closed loop under the switching predictive controller",
    "phase-portrait": "uncontrolled trajectories from several start states",
    "sweep": "final susceptible fraction over a grid of initial states",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sirmpc",
        description="SIR epidemic scenarios: simulation, single-interval design and predictive control.",
    )
    parser.add_argument("--list-presets", action="store_true", help="print bundled presets and exit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, help_text in _HELP.items():
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="PATH", help="scenario config file")
        src.add_argument("--preset", metavar="NAME", help="bundled scenario preset")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: current)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(preset_names()))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG

    from .scenarios import run_scenario

    kind = COMMANDS[args.command]
    try:
        path = preset_path(args.preset) if args.preset else args.config
        cfg = load_config(path, kind)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_scenario(cfg, args.out)
    except NumericFailure as exc:
        print(f"numeric failure in {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in result.files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
