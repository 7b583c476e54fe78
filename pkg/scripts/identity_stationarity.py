"""Check whether T = I is a local minimum of the global objective on the unit spectral ball.

At T = I the global subgradient is G = (1/N) sum_i (Y_i Y_i^T)^(1/2) - lam (Y Y^T)^(1/2),
a symmetric matrix. Since the matrix square root is operator concave,
(1/N) sum_i (Y_i Y_i^T)^(1/2) <= N^(-1/2) (Y Y^T)^(1/2), so G is negative
semidefinite once lam >= 1/sqrt(N). Then every step followed by the
renormalization T <- T / ||T||_2 raises the objective.

Prints, per lambda, the largest eigenvalue of G at T = I and the objective
before and after one normalized step.

    python scripts/identity_stationarity.py --lams 0 0.1 0.3 0.45 0.5 0.8
"""
import argparse

import numpy as np

from lrtface.dataio import SyntheticSpec, synthesize_domain_shift
from lrtface.lrt import global_gradient, global_objective


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lams", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.45, 0.5, 0.8])
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    train, _ = synthesize_domain_shift(SyntheticSpec(seed=args.seed))
    d = train.dim
    I = np.eye(d)
    print(f"N = {train.n_classes}, 1/sqrt(N) = {train.n_classes ** -0.5:.4f}")
    print(f"{'lam':>6} {'max eig G':>16} {'f(I)':>12} {'f(step)':>12}")
    for lam in args.lams:
        G = global_gradient(I, train, lam, np.random.default_rng(args.seed))
        top = np.linalg.eigvalsh((G + G.T) / 2).max()
        T = I - args.step * G
        T /= np.linalg.norm(T, 2)
        print(f"{lam:6.3f} {top:16.6g} {global_objective(I, train, lam):12.6g} "
              f"{global_objective(T, train, lam):12.6g}")


if __name__ == "__main__":
    main()
