"""Learned low-rank transformations for recognition across domains."""

__version__ = "0.1.0"

from .linalg import nuclear_norm, norm_subdifferential, numerical_rank, spectral_norm, svd
from .lrt import (DataMatrix, LearnConfig, LearnTrace, Transform, class_gradient, class_objective,
                  global_gradient, global_objective, learn_class_transforms, learn_global_transform)
from .rpca import RpcaConfig, RpcaResult, rpca_decompose
from .omp import SparseCode, omp_solve

__all__ = [
    "DataMatrix", "LearnConfig", "LearnTrace", "RpcaConfig", "RpcaResult", "SparseCode",
    "Transform", "class_gradient", "class_objective", "global_gradient", "global_objective",
    "learn_class_transforms", "learn_global_transform", "norm_subdifferential", "nuclear_norm",
    "numerical_rank", "omp_solve", "rpca_decompose", "spectral_norm", "svd",
]
