"""Command-line entry point: ``skan <preset> [options]``.

Exit codes: 0 on success, 2 for configuration errors, 3 for internal
failures including engine disagreement under ``--engine both``.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_overrides, parse_text
from .engine import EquivalenceError
from .experiments import PRESETS, preset_config, run_preset
from .stimulus import ConfigurationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skan", description="Run SKAN experiment presets.")
    ap.add_argument("preset", choices=sorted(PRESETS),
                    help="; ".join(f"{k}: {v.doc}" for k, v in PRESETS.items()))
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--seed", type=int, help="master seed")
    ap.add_argument("--runs", type=int, help="runs per grid point")
    ap.add_argument("--engine", choices=("reference", "optimized", "both"), default="optimized")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a configuration key (repeatable)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    values = parse_text(fh.read(), args.config)
            except OSError as exc:
                raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        overrides = parse_overrides(args.set)
        for key in ("seed", "runs", "out"):
            if getattr(args, key) is not None:
                overrides[key] = getattr(args, key)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = preset_config(args.preset, values, overrides)
        run_preset(args.preset, cfg, args.engine, args.jobs)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EquivalenceError as exc:
        print(f"engine equivalence failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - report and map to the internal-error code
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
