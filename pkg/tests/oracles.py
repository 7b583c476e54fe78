"""Reference implementations used only by the tests.

Each is coded independently of the package (plain loops, no LAPACK SVD) so
the checks do not share a failure mode with the code under test.
"""
import numpy as np


def jacobi_svd(A, tol=1e-15, max_sweeps=100):
    """One-sided Jacobi SVD. Returns (U, s, V) thin, s sorted descending."""
    A = np.array(A, dtype=float)
    transpose = A.shape[0] < A.shape[1]
    if transpose:
        A = A.T
    m, n = A.shape
    U = A.copy()
    V = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = U[:, p] @ U[:, p]
                beta = U[:, q] @ U[:, q]
                gamma = U[:, p] @ U[:, q]
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1 + zeta * zeta)) if zeta != 0 else 1.0
                c = 1 / np.sqrt(1 + t * t)
                s = c * t
                up, uq = U[:, p].copy(), U[:, q].copy()
                U[:, p], U[:, q] = c * up - s * uq, s * up + c * uq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    sv = np.linalg.norm(U, axis=0)
    order = np.argsort(-sv)
    sv, U, V = sv[order], U[:, order], V[:, order]
    U = U / np.where(sv > 0, sv, 1)
    if transpose:
        return V, sv, U
    return U, sv, V


def jacobi_nuclear(A):
    return float(jacobi_svd(A)[1].sum())


def power_norm(A, iters=2000, seed=0):
    """Largest singular value by power iteration on A^T A."""
    A = np.asarray(A, dtype=float)
    x = np.random.default_rng(seed).standard_normal(A.shape[1])
    for _ in range(iters):
        x = A.T @ (A @ x)
        x /= np.linalg.norm(x)
    return float(np.linalg.norm(A @ x))


def bilinear_loop(img, width, height):
    """Pixel-centre aligned bilinear resampling, one output pixel at a time."""
    img = np.asarray(img, dtype=float)
    h_in, w_in = img.shape
    out = np.zeros((height, width))
    for y in range(height):
        sy = min(max((y + 0.5) * h_in / height - 0.5, 0.0), h_in - 1)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, h_in - 1)
        fy = sy - y0
        for x in range(width):
            sx = min(max((x + 0.5) * w_in / width - 0.5, 0.0), w_in - 1)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, w_in - 1)
            fx = sx - x0
            top = (1 - fx) * img[y0, x0] + fx * img[y0, x1]
            bottom = (1 - fx) * img[y1, x0] + fx * img[y1, x1]
            out[y, x] = (1 - fy) * top + fy * bottom
    return out


def brute_nn(gallery, labels, probe):
    best, label = np.inf, None
    for j in range(gallery.shape[1]):
        dist = np.sqrt(sum((gallery[k, j] - probe[k]) ** 2 for k in range(gallery.shape[0])))
        if dist < best or (dist == best and labels[j] < label):
            best, label = dist, labels[j]
    return label, best


def lstsq_residual(D, y):
    """Residual of the full least-squares fit via the normal equations."""
    x = np.linalg.solve(D.T @ D, D.T @ y)
    return float(np.linalg.norm(y - D @ x))


def planted_rank(rng, m, n, r, scale=1.0):
    return scale * rng.standard_normal((m, r)) @ rng.standard_normal((r, n))


def rpca_problem(seed, m=40, n=30, rank=2, frac=0.05, magnitude=5.0):
    rng = np.random.default_rng(seed)
    L0 = rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))
    S0 = np.zeros((m, n))
    idx = rng.choice(m * n, int(round(frac * m * n)), replace=False)
    S0.flat[idx] = magnitude * rng.choice([-1.0, 1.0], idx.size)
    return L0, S0


def omp_problem(seed, m=30, n=60, k=4):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, n))
    D /= np.linalg.norm(D, axis=0)
    support = rng.choice(n, k, replace=False)
    x = np.zeros(n)
    x[support] = rng.standard_normal(k)
    return D, x, support


def central_difference(f, T, E, eps=1e-6):
    return (f(T + eps * E) - f(T - eps * E)) / (2 * eps)
