"""Command-line entry point: ``dualpair <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, ConfigError, env_overrides, load_config
from .dyadic import ResolvabilityError
from .runner import SUITES, Report

log = logging.getLogger("dualpair")
DIGITS = 12


def clean(obj):
    """JSON-safe copy with floats cut to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{DIGITS}g}")
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _echo_config(cfg) -> dict:
    """The configuration minus settings that cannot change any number (threads, output place)."""
    raw = json.loads(json.dumps(cfg.raw))
    raw["execution"].pop("threads", None)
    raw["output"].pop("dir", None)
    return raw


def report_document(rep: Report, cfg) -> dict:
    failures = rep.failures()
    return {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "suite": rep.name,
        "mode": cfg.mode,
        "config": _echo_config(cfg),
        "summary": rep.summary,
        "checks": [r.to_dict() for r in sorted(rep.records, key=lambda r: r.check_id)],
        "failed": sorted({r.check_id for r in failures}),
        "passed": not failures,
    }


def _csv_value(v):
    if isinstance(v, float):
        return f"{v:.{DIGITS}g}"
    return v


def write_outputs(rep: Report, cfg, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    formats = cfg.output["formats"]
    if "json" in formats:
        path = os.path.join(out_dir, f"{rep.name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(clean(report_document(rep, cfg)), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    if "csv" in formats:
        tables = dict(rep.tables)
        tables["checks"] = [
            {"check_id": r.check_id, "anchor": r.anchor, "lhs": r.lhs, "rhs": r.rhs, "fitted": r.fitted,
             "passed": r.passed, "diagnostic": r.diagnostic, "context": json.dumps(clean(r.context), sort_keys=True)}
            for r in sorted(rep.records, key=lambda r: r.check_id)
        ]
        for key, rows in sorted(tables.items()):
            path = os.path.join(out_dir, f"{rep.name}_{key}.csv")
            cols = []
            for row in rows:
                cols.extend(c for c in row if c not in cols)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols or ["empty"], lineterminator="\n")
                w.writeheader()
                for row in rows:
                    w.writerow({k: _csv_value(v) for k, v in row.items()})
            written.append(path)
    return written


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualpair", description="Dual-pair level-set decomposition and inequality checks.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUITES:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--mode", choices=("theorem", "diagnostic"))
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--grid", type=int, help="cells per axis (power of two)")
        sp.add_argument("--threads", type=int, help="worker threads, 0 = auto")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = env_overrides()
    flags = {
        "execution.mode": args.mode, "output.dir": args.out, "execution.seed": args.seed,
        "geometry.grid": args.grid, "execution.threads": args.threads,
    }
    overrides.update({k: v for k, v in flags.items() if v is not None})
    config_path = args.config or os.environ.get("DUALPAIR_CONFIG")
    try:
        cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 2
    try:
        rep = SUITES[args.command](cfg)
    except ResolvabilityError as exc:
        print(f"resolvability error: {exc}", file=sys.stderr)
        return 3
    paths = write_outputs(rep, cfg, cfg.output["dir"])
    failures = rep.failures()
    for r in failures:
        log.warning("check %s failed: lhs=%.6g rhs=%.6g", r.check_id, r.lhs, r.rhs)
    print(f"{args.command}: {len(rep.records)} checks, {len(failures)} failed; wrote {len(paths)} files to {cfg.output['dir']}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
