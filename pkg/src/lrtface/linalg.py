"""Dense matrix primitives: SVD, spectral/nuclear norms, numerical rank and
the sampled subgradient of the nuclear norm used by the transform learners."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# default threshold for the subgradient split, relative to the largest singular value
DEFAULT_RELATIVE_DELTA = 1e-4


def as_matrix(A, name="A") -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def _check_delta(delta):
    if not delta > 0:
        raise ValueError(f"threshold delta must be positive, got {delta!r}")


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def rank_at(self, delta: float) -> int:
        """Number of singular values >= delta."""
        _check_delta(delta)
        return int(np.count_nonzero(self.singular_values >= delta))

    def reconstruct(self) -> np.ndarray:
        k = self.singular_values.size
        return (self.U[:, :k] * self.singular_values) @ self.V[:, :k].T


def svd(A, full: bool = False) -> SvdResult:
    """SVD with ``A = U diag(s) V^T``; ``full`` returns square U and V."""
    A = as_matrix(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=full)
    return SvdResult(U, s, Vt.T)


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(as_matrix(A), compute_uv=False)


def nuclear_norm(A) -> float:
    return float(np.sum(singular_values(A)))


def spectral_norm(A) -> float:
    return float(singular_values(A)[0])


def numerical_rank(A, delta: float) -> int:
    _check_delta(delta)
    return int(np.count_nonzero(singular_values(A) >= delta))


def resolve_delta(A: np.ndarray, delta=None, relative: bool = True) -> float:
    """Turn a threshold policy into an absolute threshold for ``A``.

    ``delta=None`` means the default relative factor. A relative policy on the
    zero matrix falls back to the smallest positive double so that every
    singular value counts as small.
    """
    if delta is None:
        delta, relative = DEFAULT_RELATIVE_DELTA, True
    _check_delta(delta)
    if not relative:
        return float(delta)
    top = spectral_norm(A)
    return float(delta * top) if top > 0 else float(np.finfo(float).tiny)


def norm_subdifferential(A, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Sample a subgradient ``G = U1 V1^T + U2 B V2^T`` of the nuclear norm at A.

    Singular values below ``delta`` are treated as zero; on that part a random
    Gaussian block ``B`` of shape ``(m - n + s, s)``, rescaled to unit spectral
    norm, fills the free directions. Wide matrices are handled through the
    transpose.
    """
    A = as_matrix(A)
    _check_delta(delta)
    m, n = A.shape
    if m < n:
        return norm_subdifferential(A.T, delta, rng).T

    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = int(np.count_nonzero(s >= delta))
    n_small = n - keep
    if n_small == 0:
        return U @ Vt

    U, _, Vt = np.linalg.svd(A, full_matrices=True)
    B = rng.standard_normal((m - n + n_small, n_small))
    B /= np.linalg.norm(B, 2)
    return U[:, :keep] @ Vt[:keep] + U[:, keep:] @ B @ Vt[keep:]
