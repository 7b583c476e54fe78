"""Recognition on raw or transformed features.

Nearest-neighbour baselines, and the low-rank pipeline: recover a low-rank
dictionary per class with RPCA, sparse-code a transformed probe against each
dictionary with OMP and pick the class with the smallest residual.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lrt import DataMatrix, Transform
from .omp import omp_solve
from .rpca import RpcaConfig, rpca_decompose


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float
    class_scores: Optional[np.ndarray] = None


def _pick(scores: np.ndarray) -> Prediction:
    # argmin returns the first minimum, i.e. the lowest class index on ties
    label = int(np.argmin(scores))
    return Prediction(label, float(scores[label]), scores)


def _probe(probe, d: int) -> np.ndarray:
    probe = np.asarray(probe, dtype=np.float64).ravel()
    if probe.size != d:
        raise ValueError(f"probe length {probe.size} does not match dimension {d}")
    return probe


def _nearest_per_class(gallery: np.ndarray, labels: np.ndarray, probe: np.ndarray, n_classes: int):
    dist = np.linalg.norm(gallery - probe[:, None], axis=0)
    scores = np.full(n_classes, np.inf)
    np.minimum.at(scores, labels, dist)
    return scores


def nn_classify(gallery: DataMatrix, probe) -> Prediction:
    """Label of the Euclidean-nearest gallery column.

    Equidistant columns from different classes resolve to the lower class index.
    """
    if gallery.n_samples == 0:
        raise ValueError("empty gallery")
    probe = _probe(probe, gallery.dim)
    return _pick(_nearest_per_class(gallery.samples, gallery.labels, probe, gallery.n_classes))


def class_lrt_nn_classify(train: DataMatrix, transforms: Sequence[Transform], probe) -> Prediction:
    """For each class i, distance from ``T_i probe`` to the nearest column of ``T_i Y_i``."""
    _check_class_transforms(transforms, train.n_classes)
    probe = _probe(probe, train.dim)
    scores = np.full(train.n_classes, np.inf)
    for i, T in enumerate(transforms):
        Y_i = train.class_submatrix(i)
        if Y_i.shape[1] == 0:
            continue
        scores[i] = np.linalg.norm(T.matrix @ Y_i - (T.matrix @ probe)[:, None], axis=0).min()
    if not np.isfinite(scores).any():
        raise ValueError("empty gallery")
    return _pick(scores)


def _check_class_transforms(transforms, n_classes):
    idx = [T.class_index for T in transforms]
    if idx != list(range(n_classes)):
        raise ValueError(f"expected one class transform per class 0..{n_classes - 1}, got {idx}")


@dataclass(frozen=True)
class LowRankModel:
    """Per-class low-rank dictionaries plus the transform(s) that produced them."""

    dictionaries: tuple
    transforms: tuple
    mode: str  # "global" or "class"
    class_names: tuple = ()
    rpca: RpcaConfig = field(default_factory=RpcaConfig)
    unconverged: tuple = ()

    def __post_init__(self):
        if self.mode not in ("global", "class"):
            raise ValueError(f"unknown model mode {self.mode!r}")
        if self.mode == "global" and len(self.transforms) != 1:
            raise ValueError("a global model holds exactly one transform")
        if self.mode == "class":
            _check_class_transforms(self.transforms, len(self.dictionaries))

    @property
    def n_classes(self) -> int:
        return len(self.dictionaries)

    @property
    def flagged(self) -> bool:
        return bool(self.unconverged)

    def transform_for(self, i: int) -> Transform:
        return self.transforms[0] if self.mode == "global" else self.transforms[i]


def build_lowrank_model(transforms, train: DataMatrix, cfg: RpcaConfig = RpcaConfig(),
                        threads: int = 1) -> LowRankModel:
    """Run RPCA on every transformed training class and keep the low-rank parts.

    ``transforms`` is a single global :class:`Transform` or a list with one
    class transform per class. Classes whose RPCA did not converge are listed
    in ``unconverged``.
    """
    if isinstance(transforms, Transform):
        transforms = [transforms]
    transforms = tuple(transforms)
    mode = "global" if len(transforms) == 1 and transforms[0].class_index is None else "class"
    counts = train.class_counts()
    if (counts == 0).any():
        raise ValueError(f"classes without training samples: "
                         f"{[train.class_names[i] for i in np.flatnonzero(counts == 0)]}")
    if mode == "class":
        _check_class_transforms(transforms, train.n_classes)

    def fit(i):
        T = transforms[0] if mode == "global" else transforms[i]
        return rpca_decompose(T.matrix @ train.class_submatrix(i), cfg)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(fit, range(train.n_classes)))
    else:
        results = [fit(i) for i in range(train.n_classes)]
    return LowRankModel(
        tuple(r.L for r in results), transforms, mode, train.class_names, cfg,
        tuple(i for i, r in enumerate(results) if not r.converged),
    )


def _omp_scores(model: LowRankModel, probe: np.ndarray, s_max: int) -> np.ndarray:
    scores = np.empty(model.n_classes)
    cached = None
    for i, L_i in enumerate(model.dictionaries):
        if model.mode == "global":
            cached = model.transforms[0].matrix @ probe if cached is None else cached
            x = cached
        else:
            x = model.transforms[i].matrix @ probe
        scores[i] = omp_solve(L_i, x, s_max).residual_norm
    return scores


def lrt_omp_classify(model: LowRankModel, probe, s_max: int = 10) -> Prediction:
    """Global model: class whose dictionary best sparse-codes ``T probe``."""
    if model.mode != "global":
        raise ValueError("lrt_omp_classify needs a model built from a global transform")
    if model.n_classes == 0:
        raise ValueError("empty model")
    probe = _probe(probe, model.transforms[0].dim)
    return _pick(_omp_scores(model, probe, s_max))


def class_lrt_classify(model: LowRankModel, probe, s_max: int = 10) -> Prediction:
    """Class model: apply every ``T_i`` and keep the class with the smallest OMP residual."""
    if model.mode != "class":
        raise ValueError("class_lrt_classify needs a model built from class transforms")
    if model.n_classes == 0:
        raise ValueError("empty model")
    probe = _probe(probe, model.transforms[0].dim)
    return _pick(_omp_scores(model, probe, s_max))


def classify_all(classify, probes: np.ndarray, threads: int = 1) -> np.ndarray:
    """Apply a single-probe classifier to every column of ``probes``; returns labels."""
    probes = np.asarray(probes, dtype=np.float64)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            preds = list(pool.map(classify, probes.T))
    else:
        preds = [classify(p) for p in probes.T]
    return np.array([p.label for p in preds], dtype=np.int64)


@dataclass(frozen=True)
class AccuracyReport:
    accuracy: float
    per_class: dict
    confusion: np.ndarray

    def as_dict(self, class_names: Sequence[str] = ()) -> dict:
        names = list(class_names) or [str(i) for i in range(self.confusion.shape[0])]
        return {
            "accuracy": self.accuracy,
            "per_class": {names[i]: acc for i, acc in self.per_class.items()},
            "confusion": self.confusion.tolist(),
        }


def evaluate(predicted, truth, n_classes: Optional[int] = None) -> AccuracyReport:
    """Overall accuracy (percent), per-class accuracy and confusion counts.

    ``confusion[t, p]`` counts samples of true class ``t`` predicted as ``p``.
    Classes without test samples are left out of ``per_class``.
    """
    predicted = np.asarray(predicted, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.size} predictions vs {truth.size} labels")
    if truth.size == 0:
        raise ValueError("nothing to evaluate")
    if n_classes is None:
        n_classes = int(max(predicted.max(), truth.max())) + 1
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    per_class = {}
    for i in range(n_classes):
        total = confusion[i].sum()
        if total:
            per_class[i] = 100.0 * confusion[i, i] / total
    accuracy = 100.0 * np.trace(confusion) / truth.size
    return AccuracyReport(float(accuracy), per_class, confusion)
