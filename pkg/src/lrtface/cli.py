"""Command line entry point: ``lrtface run|compare|inspect``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import container, linalg
from .classifier import LowRankModel
from .experiment import ExperimentError, compare_runs, load_config, load_report, run_experiment
from .lrt import DataMatrix, Transform


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    if args.output_dir:
        cfg.output_dir = args.output_dir
    try:
        result = run_experiment(cfg)
    except ExperimentError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    report = result.report
    print(f"{report['name']}: accuracy {report['accuracy']:.2f}% -> {cfg.output_dir}")
    return 0


def _cmd_compare(args) -> int:
    try:
        reports = [load_report(p) for p in args.reports]
        table = compare_runs(reports)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error [compare]: {exc}", file=sys.stderr)
        return 2
    print(table.to_text(), end="")
    if args.csv:
        container.atomic_write(args.csv, table.to_csv())
    return 0


def describe(obj) -> str:
    if isinstance(obj, Transform):
        M = obj.matrix
        s = np.linalg.svd(M, compute_uv=False)
        kind = "global" if obj.class_index is None else f"class {obj.class_index}"
        return (f"transform ({kind})  d={obj.dim}\n"
                f"  spectral norm   {s[0]:.10g}\n"
                f"  nuclear norm    {s.sum():.6g}\n"
                f"  numerical rank  {int(np.count_nonzero(s >= 1e-4 * s[0]))} (delta = 1e-4 * sigma_1)\n")
    if isinstance(obj, LowRankModel):
        lines = [f"low-rank model ({obj.mode})  d={obj.transforms[0].dim}  classes={obj.n_classes}"]
        for i, L in enumerate(obj.dictionaries):
            name = obj.class_names[i] if obj.class_names else str(i)
            top = linalg.spectral_norm(L) if L.any() else 0.0
            rank = linalg.numerical_rank(L, 1e-4 * top) if top > 0 else 0
            lines.append(f"  {name:<16} columns={L.shape[1]:<5} rank={rank}")
        if obj.unconverged:
            lines.append(f"  RPCA unconverged for classes {list(obj.unconverged)}")
        return "\n".join(lines) + "\n"
    if isinstance(obj, DataMatrix):
        counts = obj.class_counts()
        return (f"dataset  d={obj.dim}  samples={obj.n_samples}  classes={obj.n_classes}\n"
                f"  samples per class  min={counts.min()} max={counts.max()}\n"
                f"  tags               {sorted(obj.tags)}\n")
    raise TypeError(type(obj))


def _cmd_inspect(args) -> int:
    try:
        obj = container.read_any(args.file)
    except (OSError, ValueError) as exc:
        print(f"error [inspect]: {exc}", file=sys.stderr)
        return 2
    print(describe(obj), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrtface", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a TOML config")
    p.add_argument("config", type=Path)
    p.add_argument("--output-dir", help="override output_dir (also LRTFACE_OUTPUT_DIR)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="tabulate accuracies from several report.json files")
    p.add_argument("reports", nargs="+", type=Path)
    p.add_argument("--csv", type=Path, help="also write the table as CSV")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("inspect", help="summarise a .lrt transform, .lrm model or dataset cache")
    p.add_argument("file", type=Path)
    p.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
