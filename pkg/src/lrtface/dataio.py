"""Dataset ingestion, protocol splits and synthetic domain-shift data.

Images become columns: grayscale, bilinear resize to the target size, values
in [0, 1], flattened column-major (``index = x * height + y``).
"""
from __future__ import annotations

import logging
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from PIL import Image

from ._rng import substream
from .lrt import DataMatrix

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png")
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class DatasetSpec:
    """Where images live and how labels and condition tags are read.

    With ``label_rule="directory"`` every subdirectory of ``root`` is a class.
    With ``label_rule="pattern"``, ``pattern`` is a regex matched against the
    path relative to ``root``; its ``label`` group names the class and any
    other named group (e.g. ``condition``, ``pose``) becomes a tag. In
    directory mode ``pattern`` is optional and only supplies tags from the
    file name; the file stem is the ``condition`` tag otherwise.
    """

    root: str
    size: tuple = (20, 20)  # (width, height)
    label_rule: str = "directory"
    pattern: Optional[str] = None
    normalize_columns: bool = False
    threads: int = 1

    def __post_init__(self):
        w, h = self.size
        if w < 1 or h < 1:
            raise ValueError("target size must be positive")
        if self.label_rule not in ("directory", "pattern"):
            raise ValueError(f"unknown label rule {self.label_rule!r}")
        if self.label_rule == "pattern":
            if not self.pattern or "label" not in re.compile(self.pattern).groupindex:
                raise ValueError("pattern label rule needs a regex with a (?P<label>...) group")


def bilinear_resize(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resize a 2-D array with pixel-centre aligned bilinear interpolation."""
    img = np.asarray(img, dtype=np.float64)
    return _interp_matrix(img.shape[0], height) @ img @ _interp_matrix(img.shape[1], width).T


def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    R = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(R, (rows, lo), 1 - frac)
    np.add.at(R, (rows, hi), frac)
    return R


def to_gray(arr: np.ndarray, mode: str) -> np.ndarray:
    """Grayscale float image in [0, 1]."""
    arr = np.asarray(arr)
    if arr.ndim == 3:
        arr = arr[..., :3].astype(np.float64) @ LUMA[: arr.shape[2]] if arr.shape[2] >= 3 \
            else arr[..., 0].astype(np.float64)
    arr = arr.astype(np.float64)
    if mode in ("I;16", "I;16B", "I;16L") or (mode == "I" and arr.max() > 255):
        return arr / 65535.0
    if mode == "F":
        return np.clip(arr, 0.0, 1.0)
    return arr / 255.0


def read_image(path, size) -> np.ndarray:
    """Load one raster file as a flattened column (column-major)."""
    with Image.open(path) as im:
        if im.mode == "P":
            im = im.convert("RGB")
        gray = to_gray(np.asarray(im), im.mode)
    w, h = size
    if gray.shape != (h, w):
        gray = bilinear_resize(gray, w, h)
    return np.clip(gray, 0.0, 1.0).ravel(order="F")


def _find_images(spec: DatasetSpec):
    root = Path(spec.root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")
    regex = re.compile(spec.pattern) if spec.pattern else None
    entries = []  # (path, label, tags)
    if spec.label_rule == "directory":
        for cls_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            for f in sorted(cls_dir.iterdir()):
                if f.suffix.lower() not in IMAGE_SUFFIXES:
                    continue
                tags = {"condition": f.stem}
                if regex is not None:
                    m = regex.search(f.name)
                    if m is None:
                        log.debug("skipping %s: name does not match pattern", f)
                        continue
                    tags.update({k: v for k, v in m.groupdict().items() if k != "label" and v is not None})
                entries.append((f, cls_dir.name, tags))
    else:
        for f in sorted(root.rglob("*")):
            if not f.is_file() or f.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            m = regex.search(f.relative_to(root).as_posix())
            if m is None:
                log.debug("skipping %s: path does not match pattern", f)
                continue
            groups = {k: v for k, v in m.groupdict().items() if v is not None}
            label = groups.pop("label")
            groups.setdefault("condition", f.stem)
            entries.append((f, label, groups))
    return entries


def load_image_dataset(spec: DatasetSpec, return_skipped: bool = False):
    """Read every matching image under ``spec.root`` into a :class:`DataMatrix`.

    Files are visited in sorted order, so column order is platform independent.
    Unreadable files are skipped with a warning; with ``return_skipped`` the
    result is ``(data, skipped_paths)``.
    """
    entries = _find_images(spec)

    def read(entry):
        try:
            return read_image(entry[0], spec.size)
        except Exception as exc:  # PIL raises a variety of types on corrupt data
            return exc

    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as pool:
            columns = list(pool.map(read, entries))
    else:
        columns = [read(e) for e in entries]

    skipped = [str(e[0]) for e, c in zip(entries, columns) if isinstance(c, Exception)]
    if skipped:
        warnings.warn(f"skipped {len(skipped)} unreadable image(s): {skipped}", stacklevel=2)
    kept = [(e, c) for e, c in zip(entries, columns) if not isinstance(c, Exception)]
    if not kept:
        raise ValueError(f"no usable images under {spec.root}")

    names = sorted({e[1] for e, _ in kept})
    if len(names) < 2:
        raise ValueError(f"label rule yields {len(names)} class(es); need at least 2")
    index = {n: i for i, n in enumerate(names)}
    samples = np.stack([c for _, c in kept], axis=1)
    if spec.normalize_columns:
        samples = normalize_columns(samples)
    labels = np.array([index[e[1]] for e, _ in kept])
    keys = sorted({k for e, _ in kept for k in e[2]})
    tags = {k: np.array([e[2].get(k, "") for e, _ in kept], dtype=str) for k in keys}
    data = DataMatrix(samples, labels, tuple(names), tags)
    return (data, skipped) if return_skipped else data


def normalize_columns(Y: np.ndarray) -> np.ndarray:
    """Scale every non-zero column to unit Euclidean norm."""
    norms = np.linalg.norm(Y, axis=0)
    return Y / np.where(norms > 0, norms, 1.0)


@dataclass(frozen=True)
class SplitSpec:
    """Train/test partition rule over a per-column tag.

    Modes: ``conditions`` (explicit ``train``/``test`` lists; an empty ``test``
    means every other value), ``random-conditions`` (``count`` values drawn
    for training with ``seed``, the rest for testing) and ``pose-sets``
    (explicit lists over the ``pose`` tag). ``where`` restricts the data
    before splitting, e.g. ``{"illumination": ["12"]}``.
    """

    mode: str = "random-conditions"
    train: tuple = ()
    test: tuple = ()
    count: int = 0
    seed: int = 0
    key: Optional[str] = None
    where: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("conditions", "random-conditions", "pose-sets"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise ValueError(f"train and test sets overlap: {sorted(overlap)}")
        if self.mode == "random-conditions" and self.count < 1:
            raise ValueError("random-conditions needs count >= 1")
        if self.mode != "random-conditions" and not self.train:
            raise ValueError(f"{self.mode} split needs a non-empty train list")

    @property
    def tag(self) -> str:
        if self.key:
            return self.key
        return "pose" if self.mode == "pose-sets" else "condition"


def split(data: DataMatrix, spec: SplitSpec):
    """Partition columns into ``(train, test)`` by condition tag."""
    mask = np.ones(data.n_samples, dtype=bool)
    for key, allowed in spec.where.items():
        if key not in data.tags:
            raise ValueError(f"data has no tag {key!r}")
        mask &= np.isin(data.tags[key], [str(a) for a in allowed])
    if spec.tag not in data.tags:
        raise ValueError(f"data has no tag {spec.tag!r}")
    values = data.tags[spec.tag]
    present = sorted(set(values[mask]))

    if spec.mode == "random-conditions":
        if spec.count >= len(present):
            raise ValueError(f"cannot pick {spec.count} training conditions out of {len(present)}")
        rng = substream(spec.seed, "split")
        train_set = set(rng.choice(present, size=spec.count, replace=False).tolist())
        test_set = set(present) - train_set
    else:
        train_set = {str(v) for v in spec.train}
        test_set = {str(v) for v in spec.test} or (set(present) - train_set)

    train_mask = mask & np.isin(values, sorted(train_set))
    test_mask = mask & np.isin(values, sorted(test_set))
    if not train_mask.any() or not test_mask.any():
        raise ValueError("split produced an empty partition")
    train, test = data.select(train_mask), data.select(test_mask)
    missing = [data.class_names[i] for i in np.flatnonzero(train.class_counts() == 0)]
    if missing:
        raise ValueError(f"classes absent from the training partition: {missing}")
    return train, test


def flip_horizontal(column, width: int, height: int) -> np.ndarray:
    """Mirror a column-major flattened image left-right."""
    column = np.asarray(column)
    if column.size != width * height:
        raise ValueError(f"column length {column.size} != {width}x{height}")
    img = column.reshape((height, width), order="F")
    return img[:, ::-1].ravel(order="F")


@dataclass(frozen=True)
class SyntheticSpec:
    """Low-rank classes observed through random domain distortions.

    Each class lives in a random ``rank``-dimensional subspace. Sample ``k``
    belongs to domain ``k % n_domains``; a domain applies
    ``I + distortion * W R`` where ``W`` spans a nuisance subspace shared by
    all domains and ``R`` is drawn per domain, so domain changes add
    within-class variation in a few common directions. The last
    ``n_test_domains`` domains are held out for testing.
    """

    n_classes: int = 5
    rank: int = 3
    dim: int = 64
    samples_per_class: int = 40
    n_domains: int = 3
    n_test_domains: int = 1
    distortion: float = 1.0
    nuisance_rank: int = 4
    noise: float = 0.001
    scale: float = 0.1
    class_offset: float = 2.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "rank", "dim", "samples_per_class", "n_domains", "nuisance_rank"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.rank >= self.dim or self.nuisance_rank >= self.dim:
            raise ValueError("subspace ranks must be below dim")
        if not 1 <= self.n_test_domains < self.n_domains:
            raise ValueError("need at least one training and one test domain")
        if self.samples_per_class < self.n_domains:
            raise ValueError("every domain needs at least one sample per class")
        if self.distortion < 0 or self.noise < 0 or self.scale <= 0:
            raise ValueError("distortion and noise must be >= 0, scale > 0")


def synthesize_domain_shift(spec: SyntheticSpec = SyntheticSpec()):
    """Generate ``(train, test)`` with disjoint domains; tags carry the domain."""
    rng = substream(spec.seed, "synthesis")
    d = spec.dim
    W = np.linalg.qr(rng.standard_normal((d, spec.nuisance_rank)))[0]
    domains = [np.eye(d) + spec.distortion * W @ rng.standard_normal((spec.nuisance_rank, d))
               for _ in range(spec.n_domains)]
    cols, labels, tags = [], [], []
    for i in range(spec.n_classes):
        basis = np.linalg.qr(rng.standard_normal((d, spec.rank)))[0]
        offset = rng.standard_normal(spec.rank)
        offset *= spec.class_offset / np.linalg.norm(offset)
        coef = offset[:, None] + rng.standard_normal((spec.rank, spec.samples_per_class))
        clean = spec.scale * basis @ coef
        for k in range(spec.samples_per_class):
            dom = k % spec.n_domains
            cols.append(domains[dom] @ clean[:, k] + spec.noise * rng.standard_normal(d))
            labels.append(i)
            tags.append(f"d{dom}")
    data = DataMatrix(np.stack(cols, axis=1), np.array(labels),
                      tuple(f"class{i}" for i in range(spec.n_classes)),
                      {"domain": np.array(tags), "condition": np.array(tags)})
    test_domains = {f"d{k}" for k in range(spec.n_domains - spec.n_test_domains, spec.n_domains)}
    is_test = np.isin(data.tags["domain"], sorted(test_domains))
    return data.select(~is_test), data.select(is_test)
