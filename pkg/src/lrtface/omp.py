"""Orthogonal matching pursuit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix

RESIDUAL_STOP = 1e-10


@dataclass(frozen=True)
class SparseCode:
    support: tuple
    coefficients: np.ndarray
    residual_norm: float
    # residual norm after each selected atom, starting from ||y||
    residual_history: tuple = ()

    def dense(self, width: int) -> np.ndarray:
        x = np.zeros(width)
        x[list(self.support)] = self.coefficients
        return x


def omp_solve(D, y, s_max: int) -> SparseCode:
    """Greedy sparse approximation of ``y`` over the columns of ``D``.

    Atoms are picked by largest ``|d_j^T r| / ||d_j||`` (ties to the lowest
    index), then all coefficients on the support are refit by least squares.
    Stops after ``s_max`` atoms, when the residual drops to 1e-10, or when no
    eligible atom correlates with the residual.
    """
    D = as_matrix(D, "D")
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != D.shape[0]:
        raise ValueError(f"signal length {y.size} does not match dictionary rows {D.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise ValueError("signal contains non-finite entries")
    if s_max < 1:
        raise ValueError("s_max must be >= 1")

    norms = np.linalg.norm(D, axis=0)
    eligible = norms > 0
    inv_norms = np.where(eligible, 1.0 / np.where(eligible, norms, 1.0), 0.0)

    support = []
    coef = np.zeros(0)
    residual = y.copy()
    res_norm = float(np.linalg.norm(residual))
    history = [res_norm]
    for _ in range(min(s_max, D.shape[1])):
        if res_norm <= RESIDUAL_STOP:
            break
        scores = np.abs(D.T @ residual) * inv_norms
        scores[support] = 0.0
        j = int(np.argmax(scores))
        # argmax returns the first maximum, which is the lowest-index tie-break
        if scores[j] <= 0.0 or not eligible[j]:
            break
        support.append(j)
        sub = D[:, support]
        coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
        residual = y - sub @ coef
        res_norm = float(np.linalg.norm(residual))
        history.append(res_norm)
    return SparseCode(tuple(support), coef, res_norm, tuple(history))
