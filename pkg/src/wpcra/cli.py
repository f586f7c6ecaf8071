"""Command-line entry point: ``wpcra run`` and ``wpcra sweep``.

Settings are layered: built-in defaults, then a preset, then a config file,
then individual flags.  ``WPCRA_LOG_LEVEL`` sets the log verbosity.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields

from .aggregation import AGGREGATORS
from .config import PRESETS, SWEEP_AXES, ConfigError, ExperimentConfig, parse_config
from .engine import DivergenceError
from .harness import run, run_replicates, sweep
from .metrics import format_metric

LOG_ENV = "WPCRA_LOG_LEVEL"

# Flags with a dedicated spelling; every other config field gets --field-name.
_ALIASES = {"csv_path": "--csv"}


def _flag(name: str) -> str:
    return _ALIASES.get(name, "--" + name.replace("_", "-"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wpcra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="train, certify and report one experiment")
    sweep_p = sub.add_parser("sweep", help="one experiment per value of N, R, T or sigma")
    sweep_p.add_argument("axis", choices=sorted(SWEEP_AXES))
    sweep_p.add_argument("values", nargs="+", help="values of the swept setting")
    for p in (run_p, sweep_p):
        p.add_argument("--config", metavar="PATH", help="flat 'key = value' config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
        p.add_argument("--out", metavar="DIR", help="directory for the report files")
        group = p.add_argument_group("experiment settings (override preset and file)")
        for f in fields(ExperimentConfig):
            kwargs = {"dest": f.name, "default": None, "metavar": f.name.upper()}
            if f.name == "aggregator":
                kwargs["choices"] = AGGREGATORS
                kwargs.pop("metavar")
            group.add_argument(_flag(f.name), **kwargs)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base = PRESETS[args.preset] if args.preset else ExperimentConfig()
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
                 if getattr(args, f.name) is not None}
    return parse_config(text, overrides, base)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "run":
            if cfg.replicates > 1:
                _, means = run_replicates(cfg, args.out)
                for key, value in means.items():
                    print(f"{key} {format_metric(value)}")
            else:
                for line in run(cfg, args.out).report.summary_lines():
                    print(line)
        else:
            rows = sweep(cfg, args.axis, args.values, args.out)
            print("value Radius Acc CR CA FNR")
            for row in rows:
                print(" ".join([str(row[1]), *(format_metric(v) for v in row[2:])]))
    except (ConfigError, OSError, DivergenceError, ValueError) as exc:
        print(f"wpcra: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
