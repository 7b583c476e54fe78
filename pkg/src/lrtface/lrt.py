"""Low-rank transformation learning.

Class-based learning fits one ``d x d`` map per class that keeps the class
matrix low-rank while spreading the remaining classes apart; global learning
fits a single map for all classes. Both run normalized subgradient descent
driven by :func:`lrtface.linalg.norm_subdifferential`.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import linalg
from ._rng import substream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataMatrix:
    """Column-per-sample data with integer class labels ``0..N-1``.

    ``tags`` holds optional per-column string annotations such as the
    lighting condition or pose of each image.
    """

    samples: np.ndarray
    labels: np.ndarray
    class_names: tuple = ()
    tags: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        samples = linalg.as_matrix(self.samples, "samples")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size != samples.shape[1]:
            raise ValueError("labels must be 1-D with one entry per column")
        if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
            raise ValueError("labels must be non-negative integers")
        labels = labels.astype(np.int64)
        names = tuple(self.class_names)
        if not names:
            names = tuple(str(i) for i in range(int(labels.max()) + 1 if labels.size else 0))
        if labels.size and labels.max() >= len(names):
            raise ValueError("label index exceeds number of class names")
        tags = {}
        for key, values in dict(self.tags).items():
            values = np.asarray(values, dtype=str)
            if values.shape != labels.shape:
                raise ValueError(f"tag {key!r} must have one entry per column")
            tags[key] = values
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "tags", tags)

    @property
    def dim(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def class_submatrix(self, i: int) -> np.ndarray:
        return self.samples[:, self.labels == i]

    def complement(self, i: int) -> np.ndarray:
        return self.samples[:, self.labels != i]

    def select(self, mask) -> "DataMatrix":
        """Columns where ``mask`` holds, keeping the class name table."""
        mask = np.asarray(mask)
        return DataMatrix(
            self.samples[:, mask],
            self.labels[mask],
            self.class_names,
            {k: v[mask] for k, v in self.tags.items()},
        )

    def transformed(self, T) -> "DataMatrix":
        T = T.matrix if isinstance(T, Transform) else np.asarray(T)
        return DataMatrix(T @ self.samples, self.labels, self.class_names, self.tags)


@dataclass(frozen=True)
class Transform:
    """A learned ``d x d`` map; ``class_index`` is None for a global transform."""

    matrix: np.ndarray
    class_index: Optional[int] = None

    def __post_init__(self):
        M = linalg.as_matrix(self.matrix, "transform")
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"transform must be square, got {M.shape}")
        object.__setattr__(self, "matrix", M)

    @property
    def kind(self) -> str:
        return "global" if self.class_index is None else "class"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, Y) -> np.ndarray:
        return self.matrix @ np.asarray(Y, dtype=np.float64)


@dataclass
class LearnConfig:
    """Hyperparameters for transform learning.

    ``delta`` is the subgradient threshold; with ``delta_relative`` it is
    scaled by the largest singular value of each matrix passed to the
    subgradient routine. ``literal_update_sign`` reproduces the ascent form
    ``T + step * dT`` instead of descending.
    """

    lam: float = 0.1
    step: float = 0.05
    iterations: int = 100
    delta: float = linalg.DEFAULT_RELATIVE_DELTA
    delta_relative: bool = True
    seed: int = 0
    record_trace: bool = True
    backtracking: bool = False
    literal_update_sign: bool = False
    threads: int = 1

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValueError("iterations must be a non-negative integer")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class LearnTrace:
    objective_values: list
    step_sizes: list = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        return self.objective_values[-1]

    @property
    def initial_objective(self) -> float:
        return self.objective_values[0]

    def increases(self) -> int:
        v = np.asarray(self.objective_values)
        return int(np.count_nonzero(np.diff(v) > 0))


def _nuc(A: np.ndarray) -> float:
    return 0.0 if A.size == 0 else linalg.nuclear_norm(A)


def _check_conform(T: np.ndarray, *blocks: np.ndarray):
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"transform must be square, got {T.shape}")
    for Y in blocks:
        if Y.ndim != 2 or Y.shape[0] != T.shape[1]:
            raise ValueError(f"dimension mismatch: transform {T.shape} vs data {Y.shape}")


def _as_array(T) -> np.ndarray:
    return T.matrix if isinstance(T, Transform) else np.asarray(T, dtype=np.float64)


def _as_block(Y, d=None) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 2 and Y.shape[1] == 0:
        return Y
    if Y.size == 0 and d is not None:
        return np.zeros((d, 0))
    return Y


def class_objective(T, Y_i, Y_not_i, lam: float) -> float:
    """``||T Y_i||_* - lam ||T Y_not_i||_*``."""
    T = _as_array(T)
    Y_i, Y_not_i = _as_block(Y_i, T.shape[1]), _as_block(Y_not_i, T.shape[1])
    _check_conform(T, Y_i, Y_not_i)
    value = _nuc(T @ Y_i)
    if lam and Y_not_i.shape[1]:
        value -= lam * _nuc(T @ Y_not_i)
    return value


def global_objective(T, data: DataMatrix, lam: float) -> float:
    """``(1/N) sum_i ||T Y_i||_* - lam ||T Y||_*``."""
    T = _as_array(T)
    _check_conform(T, data.samples)
    TY = T @ data.samples
    N = data.n_classes
    value = sum(_nuc(TY[:, data.labels == i]) for i in range(N)) / N
    if lam:
        value -= lam * _nuc(TY)
    return value


def _subgrad(A: np.ndarray, delta, relative, rng) -> np.ndarray:
    return linalg.norm_subdifferential(A, linalg.resolve_delta(A, delta, relative), rng)


def class_gradient(T, Y_i, Y_not_i, lam: float, rng: np.random.Generator,
                   delta=None, delta_relative: bool = True) -> np.ndarray:
    """Subgradient of :func:`class_objective` with respect to ``T``."""
    T = _as_array(T)
    Y_i, Y_not_i = _as_block(Y_i, T.shape[1]), _as_block(Y_not_i, T.shape[1])
    _check_conform(T, Y_i, Y_not_i)
    G = np.zeros_like(T)
    if Y_i.shape[1]:
        G += _subgrad(T @ Y_i, delta, delta_relative, rng) @ Y_i.T
    if lam and Y_not_i.shape[1]:
        G -= lam * _subgrad(T @ Y_not_i, delta, delta_relative, rng) @ Y_not_i.T
    return G


def global_gradient(T, data: DataMatrix, lam: float, rng: np.random.Generator,
                    delta=None, delta_relative: bool = True) -> np.ndarray:
    """Subgradient of :func:`global_objective` with respect to ``T``."""
    T = _as_array(T)
    _check_conform(T, data.samples)
    N = data.n_classes
    G = np.zeros_like(T)
    for i in range(N):
        Y_i = data.class_submatrix(i)
        if Y_i.shape[1]:
            G += _subgrad(T @ Y_i, delta, delta_relative, rng) @ Y_i.T
    G /= N
    if lam:
        G -= lam * _subgrad(T @ data.samples, delta, delta_relative, rng) @ data.samples.T
    return G


def _descend(objective, gradient, d: int, cfg: LearnConfig, rng, callback=None):
    T = np.eye(d)
    step = cfg.step
    values = [objective(T)]
    steps = []
    rising = 0
    sign = 1.0 if cfg.literal_update_sign else -1.0
    for _ in range(int(cfg.iterations)):
        T = T + sign * step * gradient(T, rng)
        scale = linalg.spectral_norm(T)
        if scale == 0:
            raise FloatingPointError("transform collapsed to zero; reduce the step size")
        T = T / scale
        values.append(objective(T))
        steps.append(step)
        if callback is not None:
            callback(len(steps), T)
        if cfg.backtracking:
            rising = rising + 1 if values[-1] > values[-2] else 0
            if rising >= 5:
                step /= 2
                rising = 0
    return T, LearnTrace(values, steps)


def _check_classes(data: DataMatrix):
    counts = data.class_counts()
    empty = [data.class_names[i] for i in np.flatnonzero(counts == 0)]
    if empty:
        raise ValueError(f"classes without samples: {empty}")


def learn_class_transforms(data: DataMatrix, cfg: LearnConfig, callback=None):
    """Learn one transform per class.

    Returns ``(transforms, traces)``; ``traces`` entries are None unless
    ``cfg.record_trace``. Each class draws from its own random substream, so
    results do not depend on ``cfg.threads``. ``callback(i, t, T)`` is called
    after iteration ``t`` of class ``i``.
    """
    if data.n_classes < 2:
        raise ValueError("class-based learning needs at least two classes")
    _check_classes(data)

    def fit(i):
        Y_i, Y_not_i = data.class_submatrix(i), data.complement(i)
        T, trace = _descend(
            lambda T: class_objective(T, Y_i, Y_not_i, cfg.lam),
            lambda T, rng: class_gradient(T, Y_i, Y_not_i, cfg.lam, rng,
                                          cfg.delta, cfg.delta_relative),
            data.dim, cfg, substream(cfg.seed, "learner", i),
            None if callback is None else (lambda t, T: callback(i, t, T)),
        )
        log.debug("class %d objective %.6g -> %.6g", i, trace.initial_objective, trace.final_objective)
        return Transform(T, i), (trace if cfg.record_trace else None)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(fit, range(data.n_classes)))
    else:
        results = [fit(i) for i in range(data.n_classes)]
    return [r[0] for r in results], [r[1] for r in results]


def learn_global_transform(data: DataMatrix, cfg: LearnConfig, callback=None):
    """Learn a single transform shared by all classes; returns ``(transform, trace)``.

    ``callback(t, T)`` is called with the normalized transform after iteration ``t``.
    """
    _check_classes(data)
    if data.n_classes < 2 and cfg.lam != 0:
        raise ValueError("global learning with one class requires lam == 0")
    T, trace = _descend(
        lambda T: global_objective(T, data, cfg.lam),
        lambda T, rng: global_gradient(T, data, cfg.lam, rng, cfg.delta, cfg.delta_relative),
        data.dim, cfg, substream(cfg.seed, "learner"), callback,
    )
    log.debug("global objective %.6g -> %.6g", trace.initial_objective, trace.final_objective)
    return Transform(T), (trace if cfg.record_trace else None)


def stack_classes(blocks: Sequence[np.ndarray], names=()) -> DataMatrix:
    """Build a DataMatrix from a list of per-class ``d x K_i`` blocks."""
    blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
    labels = np.concatenate([np.full(b.shape[1], i) for i, b in enumerate(blocks)])
    return DataMatrix(np.concatenate(blocks, axis=1), labels, tuple(names))
