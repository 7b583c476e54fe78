"""Robust PCA by the inexact augmented Lagrangian method.

Solves ``min ||L||_* + beta ||S||_1  s.t.  M = L + S`` by alternating
singular value thresholding on ``L`` and entrywise soft thresholding on ``S``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import as_matrix


@dataclass(frozen=True)
class RpcaConfig:
    beta: Optional[float] = None  # None -> 1/sqrt(max(m, n))
    tol: float = 1e-7
    max_iter: int = 500
    rho: float = 1.1
    mu_scale: float = 1.25
    mu_cap: float = 1e7

    def __post_init__(self):
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rho > 1:
            raise ValueError("rho must be > 1")


@dataclass(frozen=True)
class RpcaResult:
    L: np.ndarray
    S: np.ndarray
    converged: bool
    iterations_used: int
    residual: float


def soft_threshold(X: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(X) * np.maximum(np.abs(X) - tau, 0.0)


def svd_threshold(X: np.ndarray, tau: float) -> np.ndarray:
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    k = int(np.count_nonzero(s > tau))
    return (U[:, :k] * (s[:k] - tau)) @ Vt[:k]


def rpca_decompose(M, cfg: RpcaConfig = RpcaConfig()) -> RpcaResult:
    M = as_matrix(M, "M")
    m, n = M.shape
    beta = cfg.beta if cfg.beta is not None else 1.0 / np.sqrt(max(m, n))

    norm_fro = np.linalg.norm(M)
    if norm_fro == 0:
        Z = np.zeros_like(M)
        return RpcaResult(Z, Z.copy(), True, 0, 0.0)

    norm_two = np.linalg.norm(M, 2)
    Y = M / max(norm_two, np.abs(M).max() / beta)
    mu = cfg.mu_scale / norm_two
    mu_max = mu * cfg.mu_cap
    L = np.zeros_like(M)
    S = np.zeros_like(M)
    residual = np.inf
    for it in range(1, cfg.max_iter + 1):
        S = soft_threshold(M - L + Y / mu, beta / mu)
        L = svd_threshold(M - S + Y / mu, 1.0 / mu)
        R = M - L - S
        residual = np.linalg.norm(R) / norm_fro
        if residual < cfg.tol:
            return RpcaResult(L, S, True, it, float(residual))
        Y = Y + mu * R
        mu = min(mu * cfg.rho, mu_max)
    return RpcaResult(L, S, False, cfg.max_iter, float(residual))
