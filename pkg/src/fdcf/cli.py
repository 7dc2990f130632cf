"""Batch command line: ``fdcf run --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import (ConfigError, config_to_text, emit_results, expand_sweep, load_config,
                          run_scenario)


def _parse_sweep(text: str):
    if "=" not in text:
        raise ConfigError("--sweep expects key=v1,v2,...")
    key, vals = text.rsplit("=", 1)
    values = [v.strip() for v in vals.split(",") if v.strip()]
    if not key.strip() or not values:
        raise ConfigError("--sweep expects key=v1,v2,...")
    return key.strip(), values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdcf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte Carlo scenario and write result files")
    run.add_argument("--config", required=True, help="key = value scenario file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trials", type=int, help="override the number of trials")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--workers", type=int, help="override the worker count")
    run.add_argument("--sweep", help="key=v1,v2,... ; use K=L=... to sweep both UE counts")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in (("trials", args.trials), ("seed", args.seed),
                                   ("workers", args.workers)) if v is not None}
    try:
        config = load_config(args.config, **overrides)
        key, values = _parse_sweep(args.sweep) if args.sweep else (None, None)
        scenarios = expand_sweep(config, key, values)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config_to_text(config))
    records = []
    for sid, cfg in scenarios:
        logging.getLogger(__name__).info("running %s (%d trials)", sid, cfg.trials)
        records.extend(run_scenario(cfg, sid))
    paths = emit_results(records, out, key)
    n_ok = sum(r.status == "optimal" for r in records)
    print(f"{len(records)} records ({n_ok} optimal) -> {paths['records']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
