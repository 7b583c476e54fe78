"""Binary containers for transforms, low-rank models and cached datasets.

All integers and floats are little-endian; matrices are stored column-major
as IEEE-754 float64.

Transform (``LRT1``)::

    magic "LRT1" | d: u32 | kind: u8 (0 global, 1 class) | class index: i32 (-1 if global)
    | d*d float64

Model (``LRM1``)::

    magic "LRM1" | d: u32 | mode: u8 (0 global, 1 class) | classes: u32 | transforms: u32
    | transform records (each a complete LRT1 blob)
    | per class: class index u32 | K_i u32 | d*K_i float64
    | meta length u32 | UTF-8 JSON (class names, RPCA config, unconverged classes)

Dataset (``LRD1``)::

    magic "LRD1" | d: u32 | K: u32 | d*K float64 | K int32 labels
    | meta length u32 | UTF-8 JSON (class names, per-column tags)
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .classifier import LowRankModel
from .lrt import DataMatrix, Transform
from .rpca import RpcaConfig

TRANSFORM_MAGIC = b"LRT1"
MODEL_MAGIC = b"LRM1"
DATASET_MAGIC = b"LRD1"
_TRANSFORM_HEADER = struct.Struct("<4sIBi")
_MODEL_HEADER = struct.Struct("<4sIBII")
_DATASET_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    pass


def _f64(M: np.ndarray) -> bytes:
    return np.asarray(M, dtype="<f8").tobytes(order="F")


def _read_matrix(buf: io.BytesIO, rows: int, cols: int) -> np.ndarray:
    raw = buf.read(8 * rows * cols)
    if len(raw) != 8 * rows * cols:
        raise FormatError("truncated matrix block")
    return np.frombuffer(raw, dtype="<f8").reshape((rows, cols), order="F").astype(np.float64)


def _read_struct(buf: io.BytesIO, st: struct.Struct):
    raw = buf.read(st.size)
    if len(raw) != st.size:
        raise FormatError("truncated header")
    return st.unpack(raw)


def _write_json(meta: dict) -> bytes:
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(blob)) + blob


def _read_json(buf: io.BytesIO) -> dict:
    (n,) = _read_struct(buf, struct.Struct("<I"))
    raw = buf.read(n)
    if len(raw) != n:
        raise FormatError("truncated metadata block")
    return json.loads(raw.decode("utf-8"))


def transform_to_bytes(T: Transform) -> bytes:
    kind, idx = (0, -1) if T.class_index is None else (1, T.class_index)
    return _TRANSFORM_HEADER.pack(TRANSFORM_MAGIC, T.dim, kind, idx) + _f64(T.matrix)


def _read_transform(buf: io.BytesIO) -> Transform:
    magic, d, kind, idx = _read_struct(buf, _TRANSFORM_HEADER)
    if magic != TRANSFORM_MAGIC:
        raise FormatError(f"bad transform magic {magic!r}")
    if kind not in (0, 1):
        raise FormatError(f"unknown transform kind tag {kind}")
    return Transform(_read_matrix(buf, d, d), None if kind == 0 else idx)


def transform_from_bytes(blob: bytes) -> Transform:
    buf = io.BytesIO(blob)
    T = _read_transform(buf)
    if buf.read(1):
        raise FormatError("trailing bytes after transform")
    return T


def model_to_bytes(model: LowRankModel) -> bytes:
    d = model.transforms[0].dim
    out = [_MODEL_HEADER.pack(MODEL_MAGIC, d, 0 if model.mode == "global" else 1,
                              model.n_classes, len(model.transforms))]
    out += [transform_to_bytes(T) for T in model.transforms]
    for i, L in enumerate(model.dictionaries):
        out.append(struct.pack("<II", i, L.shape[1]) + _f64(L))
    out.append(_write_json({
        "class_names": list(model.class_names),
        "rpca": dataclasses.asdict(model.rpca),
        "unconverged": list(model.unconverged),
    }))
    return b"".join(out)


def model_from_bytes(blob: bytes) -> LowRankModel:
    buf = io.BytesIO(blob)
    magic, d, mode, n_classes, n_transforms = _read_struct(buf, _MODEL_HEADER)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad model magic {magic!r}")
    transforms = tuple(_read_transform(buf) for _ in range(n_transforms))
    dictionaries = []
    for expected in range(n_classes):
        idx, k = _read_struct(buf, struct.Struct("<II"))
        if idx != expected:
            raise FormatError(f"class block {idx} out of order (expected {expected})")
        dictionaries.append(_read_matrix(buf, d, k))
    meta = _read_json(buf)
    return LowRankModel(tuple(dictionaries), transforms, "global" if mode == 0 else "class",
                        tuple(meta["class_names"]), RpcaConfig(**meta["rpca"]),
                        tuple(meta["unconverged"]))


def dataset_to_bytes(data: DataMatrix) -> bytes:
    return b"".join([
        _DATASET_HEADER.pack(DATASET_MAGIC, data.dim, data.n_samples),
        _f64(data.samples),
        data.labels.astype("<i4").tobytes(),
        _write_json({"class_names": list(data.class_names),
                     "tags": {k: v.tolist() for k, v in data.tags.items()}}),
    ])


def dataset_from_bytes(blob: bytes) -> DataMatrix:
    buf = io.BytesIO(blob)
    magic, d, K = _read_struct(buf, _DATASET_HEADER)
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad dataset magic {magic!r}")
    samples = _read_matrix(buf, d, K)
    raw = buf.read(4 * K)
    if len(raw) != 4 * K:
        raise FormatError("truncated label table")
    labels = np.frombuffer(raw, dtype="<i4").astype(np.int64)
    meta = _read_json(buf)
    return DataMatrix(samples, labels, tuple(meta["class_names"]),
                      {k: np.array(v, dtype=str) for k, v in meta["tags"].items()})


def fingerprint(data: DataMatrix) -> str:
    """SHA-256 of the dataset container bytes."""
    return hashlib.sha256(dataset_to_bytes(data)).hexdigest()


def atomic_write(path, payload) -> Path:
    """Write bytes or text to ``path`` through a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_any(path):
    """Load a transform, model or dataset file based on its magic bytes."""
    blob = Path(path).read_bytes()
    magic = blob[:4]
    if magic == TRANSFORM_MAGIC:
        return transform_from_bytes(blob)
    if magic == MODEL_MAGIC:
        return model_from_bytes(blob)
    if magic == DATASET_MAGIC:
        return dataset_from_bytes(blob)
    raise FormatError(f"{path}: unrecognised magic {magic!r}")


def write_trace(path, values) -> Path:
    return atomic_write(path, "".join(f"{float(v)!r}\n" for v in values))


def read_trace(path) -> list:
    return [float(line) for line in Path(path).read_text().split()]
