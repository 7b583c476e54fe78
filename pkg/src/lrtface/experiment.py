"""Experiment pipeline: load -> split -> learn -> model -> classify -> evaluate.

A run writes ``report.json`` (byte-reproducible from config and seed),
``accuracy.csv``, ``summary.txt``, learned transforms and traces, and a
``timing.json`` sidecar holding wall-clock times.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__, container
from .classifier import (build_lowrank_model, class_lrt_classify, class_lrt_nn_classify,
                         classify_all, evaluate, lrt_omp_classify, nn_classify)
from .dataio import DatasetSpec, SplitSpec, SyntheticSpec, load_image_dataset, split, \
    synthesize_domain_shift
from .lrt import DataMatrix, LearnConfig, learn_class_transforms, learn_global_transform
from .rpca import RpcaConfig

log = logging.getLogger(__name__)

LEARNERS = ("none", "global", "class")
CLASSIFIERS = {
    "nn": "none",
    "lrt-nn": "global",
    "lrt-omp": "global",
    "class-lrt-nn": "class",
    "class-lrt-omp": "class",
}
ENV_OUTPUT_DIR = "LRTFACE_OUTPUT_DIR"
ENV_THREADS = "LRTFACE_THREADS"


class ExperimentError(RuntimeError):
    """Failure tagged with the pipeline stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    dataset: Union[SyntheticSpec, DatasetSpec] = field(default_factory=SyntheticSpec)
    split: Optional[SplitSpec] = None
    learner: str = "global"
    learn: LearnConfig = field(default_factory=LearnConfig)
    classifier: str = "lrt-omp"
    rpca: RpcaConfig = field(default_factory=RpcaConfig)
    s_max: int = 10
    seed: int = 0
    name: str = "experiment"
    output_dir: str = "runs/experiment"
    report_formats: tuple = ("json", "csv")
    threads: int = 1

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ValueError(f"unknown learner {self.learner!r}; choose from {LEARNERS}")
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.classifier!r}; choose from {sorted(CLASSIFIERS)}")
        if CLASSIFIERS[self.classifier] != self.learner:
            raise ValueError(f"classifier {self.classifier!r} requires learner "
                             f"{CLASSIFIERS[self.classifier]!r}, got {self.learner!r}")
        if isinstance(self.dataset, DatasetSpec) and self.split is None:
            raise ValueError("image datasets need a [split] section")
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")
        unknown = set(self.report_formats) - {"json", "csv"}
        if unknown:
            raise ValueError(f"unknown report formats {sorted(unknown)}")

    def echo(self) -> dict:
        out = dataclasses.asdict(self)
        out["dataset"]["source"] = "synthetic" if isinstance(self.dataset, SyntheticSpec) else "images"
        out["report_formats"] = list(self.report_formats)
        # output location and thread count do not affect results
        out.pop("output_dir")
        out.pop("threads")
        out["learn"].pop("threads")
        if isinstance(self.dataset, DatasetSpec):
            out["dataset"].pop("threads")
        return _jsonable(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def _section(raw: dict, name: str, cls, seed: Optional[int] = None, **extra):
    values = dict(raw.get(name, {}))
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"[{name}] has unknown keys {sorted(unknown)}")
    if seed is not None and "seed" in known:
        values.setdefault("seed", seed)
    for key, value in extra.items():
        if key in known:
            values.setdefault(key, value)
    for key, value in list(values.items()):
        if isinstance(value, list):
            values[key] = tuple(value)
    return cls(**values)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from the parsed TOML document.

    The top-level ``seed`` seeds every component unless a section sets its own.
    """
    raw = dict(raw)
    seed = int(raw.get("seed", 0))
    threads = int(os.environ.get(ENV_THREADS, raw.get("threads", 1)))
    dataset_raw = dict(raw.get("dataset", {"source": "synthetic"}))
    source = dataset_raw.pop("source", "synthetic")
    if source == "synthetic":
        dataset = _section({"dataset": dataset_raw}, "dataset", SyntheticSpec, seed)
    elif source == "images":
        dataset = _section({"dataset": dataset_raw}, "dataset", DatasetSpec, threads=threads)
    else:
        raise ValueError(f"unknown dataset source {source!r}")
    split_spec = None
    if "split" in raw:
        split_raw = dict(raw["split"])
        if "where" in split_raw:
            split_raw["where"] = {k: tuple(str(x) for x in v) for k, v in split_raw["where"].items()}
        split_spec = _section({"split": split_raw}, "split", SplitSpec, seed)
    top = {k: v for k, v in raw.items() if k not in ("dataset", "split", "learn", "rpca")}
    output_dir = os.environ.get(ENV_OUTPUT_DIR, top.pop("output_dir", f"runs/{top.get('name', 'experiment')}"))
    top.pop("threads", None)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(top) - known
    if unknown:
        raise ValueError(f"unknown top-level keys {sorted(unknown)}")
    if "report_formats" in top:
        top["report_formats"] = tuple(top["report_formats"])
    return ExperimentConfig(
        dataset=dataset,
        split=split_spec,
        learn=_section(raw, "learn", LearnConfig, seed, threads=threads),
        rpca=_section(raw, "rpca", RpcaConfig),
        output_dir=output_dir,
        threads=threads,
        **top,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))


class _Stage:
    """Context manager that times a stage and tags its exceptions."""

    def __init__(self, name: str, timings: dict):
        self.name, self.timings = name, timings

    def __enter__(self):
        self.start = time.perf_counter()
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.start
        if exc is not None and not isinstance(exc, ExperimentError):
            raise ExperimentError(self.name, f"{type(exc).__name__}: {exc}") from exc
        return False


@dataclass
class RunResult:
    report: dict
    timings: dict
    files: list
    transforms: list = field(default_factory=list)
    model: object = None


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Run the full pipeline described by ``cfg``.

    Raises :class:`ExperimentError` tagged with the failing stage; in that case
    a ``FAILED`` marker is left in the output directory and no report is written.
    """
    timings: dict = {}
    out_dir = Path(cfg.output_dir)
    try:
        result = _run(cfg, timings)
        if write:
            with _Stage("write", timings):
                result.files = _write_outputs(cfg, result, out_dir)
                container.atomic_write(out_dir / "timing.json",
                                       json.dumps({k: round(v, 6) for k, v in timings.items()},
                                                  indent=2, sort_keys=True) + "\n")
        return result
    except ExperimentError as exc:
        if write:
            report = out_dir / "report.json"
            if report.exists():
                report.unlink()
            container.atomic_write(out_dir / "FAILED", f"stage: {exc.stage}\n{exc}\n")
        raise


def _run(cfg: ExperimentConfig, timings: dict) -> RunResult:
    with _Stage("load", timings):
        if isinstance(cfg.dataset, SyntheticSpec):
            train, test = synthesize_domain_shift(cfg.dataset)
            full = None
        else:
            full = load_image_dataset(cfg.dataset)
    with _Stage("split", timings):
        if full is None:
            full = _concat(train, test)
            if cfg.split is not None:
                train, test = split(full, cfg.split)
        else:
            train, test = split(full, cfg.split)
        dataset_fp = container.fingerprint(full)
        split_fp = container.fingerprint(_concat(train, test))

    transforms, traces = [], []
    with _Stage("learn", timings):
        if cfg.learner == "global":
            T, trace = learn_global_transform(train, cfg.learn)
            transforms, traces = [T], [trace]
        elif cfg.learner == "class":
            transforms, traces = learn_class_transforms(train, cfg.learn)

    model = None
    with _Stage("model", timings):
        if cfg.classifier in ("lrt-omp", "class-lrt-omp"):
            model = build_lowrank_model(transforms if cfg.learner == "class" else transforms[0],
                                        train, cfg.rpca, threads=cfg.threads)
            if model.unconverged:
                log.warning("RPCA did not converge for classes %s", list(model.unconverged))

    with _Stage("classify", timings):
        predicted = classify_all(_classifier(cfg, train, transforms, model), test.samples, cfg.threads)

    with _Stage("evaluate", timings):
        acc = evaluate(predicted, test.labels, train.n_classes)

    report = {
        "name": cfg.name,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "dataset_fingerprint": dataset_fp,
        "split_fingerprint": split_fp,
        "n_train": train.n_samples,
        "n_test": test.n_samples,
        "dim": train.dim,
        "class_names": list(train.class_names),
        "learner": cfg.learner,
        "classifier": cfg.classifier,
        "accuracy": acc.accuracy,
        "per_class_accuracy": {train.class_names[i]: v for i, v in acc.per_class.items()},
        "confusion": acc.confusion.tolist(),
        "objective_trace": _trace_payload(cfg, traces),
        "rpca_unconverged": [train.class_names[i] for i in model.unconverged] if model else [],
        "predictions": predicted.tolist(),
    }
    return RunResult(_jsonable(report), timings, [], transforms, model)


def _concat(a: DataMatrix, b: DataMatrix) -> DataMatrix:
    keys = sorted(set(a.tags) & set(b.tags))
    return DataMatrix(np.concatenate([a.samples, b.samples], axis=1),
                      np.concatenate([a.labels, b.labels]), a.class_names,
                      {k: np.concatenate([a.tags[k], b.tags[k]]) for k in keys})


def _trace_payload(cfg, traces):
    if not cfg.learn.record_trace or not traces:
        return None
    if cfg.learner == "global":
        return list(traces[0].objective_values)
    return {str(i): list(t.objective_values) for i, t in enumerate(traces)}


def _classifier(cfg, train, transforms, model):
    kind = cfg.classifier
    if kind == "nn":
        return lambda p: nn_classify(train, p)
    if kind == "lrt-nn":
        T = transforms[0]
        gallery = train.transformed(T)
        return lambda p: nn_classify(gallery, T.apply(p))
    if kind == "lrt-omp":
        return lambda p: lrt_omp_classify(model, p, cfg.s_max)
    if kind == "class-lrt-nn":
        return lambda p: class_lrt_nn_classify(train, transforms, p)
    return lambda p: class_lrt_classify(model, p, cfg.s_max)


def _write_outputs(cfg: ExperimentConfig, result: RunResult, out_dir: Path) -> list:
    out_dir.mkdir(parents=True, exist_ok=True)
    stale = out_dir / "FAILED"
    if stale.exists():
        stale.unlink()
    files = []
    for T in result.transforms:
        stem = "transform" if T.class_index is None else f"transform_class{T.class_index}"
        files.append(container.atomic_write(out_dir / f"{stem}.lrt", container.transform_to_bytes(T)))
    trace = result.report["objective_trace"]
    if isinstance(trace, list):
        files.append(container.write_trace(out_dir / "transform.trace.txt", trace))
    elif isinstance(trace, dict):
        for i, values in trace.items():
            files.append(container.write_trace(out_dir / f"transform_class{i}.trace.txt", values))
    if result.model is not None:
        files.append(container.atomic_write(out_dir / "model.lrm", container.model_to_bytes(result.model)))
    if "csv" in cfg.report_formats:
        files.append(container.atomic_write(out_dir / "accuracy.csv", accuracy_csv(result.report)))
    files.append(container.atomic_write(out_dir / "summary.txt", summary_text(result.report)))
    if "json" in cfg.report_formats:
        files.append(container.atomic_write(out_dir / "report.json", dump_report(result.report)))
    return files


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def accuracy_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "class", "accuracy", "dataset_fingerprint", "split_fingerprint"])
    fp = (report["dataset_fingerprint"], report["split_fingerprint"])
    w.writerow([report["name"], "overall", repr(report["accuracy"]), *fp])
    for cls, acc in report["per_class_accuracy"].items():
        w.writerow([report["name"], cls, repr(acc), *fp])
    return buf.getvalue()


def summary_text(report: dict) -> str:
    lines = [
        f"experiment  {report['name']}",
        f"method      {report['learner']} learner / {report['classifier']} classifier",
        f"data        d={report['dim']}  train={report['n_train']}  test={report['n_test']}"
        f"  classes={len(report['class_names'])}",
        f"accuracy    {report['accuracy']:.2f}%",
    ]
    trace = report["objective_trace"]
    if isinstance(trace, list):
        lines.append(f"objective   {trace[0]:.6g} -> {trace[-1]:.6g} ({len(trace) - 1} iterations)")
    elif isinstance(trace, dict):
        first = sum(v[0] for v in trace.values())
        last = sum(v[-1] for v in trace.values())
        lines.append(f"objective   {first:.6g} -> {last:.6g} (summed over {len(trace)} classes)")
    if report["rpca_unconverged"]:
        lines.append(f"warning     RPCA unconverged for {report['rpca_unconverged']}")
    lines.append("")
    lines.append(f"{'class':<20}{'accuracy':>10}")
    for cls, acc in report["per_class_accuracy"].items():
        lines.append(f"{cls:<20}{acc:>10.2f}")
    return "\n".join(lines) + "\n"


@dataclass
class Comparison:
    columns: list
    rows: list  # (row label, [value per column])
    mismatched: list  # names whose fingerprints differ from the first report

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", *self.columns])
        for label, values in self.rows:
            w.writerow([label, *("" if v is None else repr(v) for v in values)])
        return buf.getvalue()

    def to_text(self) -> str:
        width = max([12] + [len(c) + 2 for c in self.columns])
        out = [f"{'':<14}" + "".join(f"{c:>{width}}" for c in self.columns)]
        for label, values in self.rows:
            cells = "".join(f"{'-' if v is None else f'{v:.2f}':>{width}}" for v in values)
            out.append(f"{label:<14}{cells}")
        if self.mismatched:
            out.append(f"WARNING: fingerprint mismatch for {', '.join(self.mismatched)}")
        return "\n".join(out) + "\n"


def compare_runs(reports: Sequence[dict]) -> Comparison:
    """Align per-class and overall accuracies of several reports, in input order."""
    if not reports:
        raise ValueError("no reports to compare")
    columns = [r["name"] for r in reports]
    ref = (reports[0]["dataset_fingerprint"], reports[0]["split_fingerprint"])
    mismatched = [r["name"] for r in reports[1:]
                  if (r["dataset_fingerprint"], r["split_fingerprint"]) != ref]
    classes = []
    for r in reports:
        classes += [c for c in r["per_class_accuracy"] if c not in classes]
    rows = [("overall", [r["accuracy"] for r in reports])]
    rows += [(c, [r["per_class_accuracy"].get(c) for r in reports]) for c in classes]
    return Comparison(columns, rows, mismatched)


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
