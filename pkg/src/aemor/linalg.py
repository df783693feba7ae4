"""Dense float64 linear algebra shared by the whole package.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The SVD is a
one-sided (Hestenes) Jacobi iteration, which is accurate to working precision
for the small snapshot matrices used here.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import ContractError, ConvergenceError, SingularMatrixError

SVD_MAX_SWEEPS = 100
SVD_TOL = 1e-12
PIVOT_TOL = 1e-14
VARIANCE_FLOOR = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the stream is platform independent."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def _complete_columns(u: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Replace columns not in ``keep`` with an orthonormal completion."""
    m, n = u.shape
    basis = [u[:, j] for j in range(n) if keep[j]]
    filled = u.copy()
    candidates = iter(np.eye(m))
    for j in range(n):
        if keep[j]:
            continue
        for e in candidates:
            v = e.copy()
            for _ in range(2):
                for q in basis:
                    v -= (q @ v) * q
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                v /= nv
                basis.append(v)
                filled[:, j] = v
                break
    return filled


def svd_thin(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``m = U @ diag(S) @ Vt`` by one-sided Jacobi rotations.

    Returns ``U`` (rows x k), ``S`` (k,) descending and ``Vt`` (k x cols) with
    ``k = min(rows, cols)``. Columns of ``U`` belonging to zero singular values
    are completed to an orthonormal set.
    """
    a = as_matrix(m, "m")
    if min(a.shape) < 1:
        raise ContractError(f"svd_thin needs a non-empty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("svd_thin input contains non-finite entries")
    if a.shape[0] < a.shape[1]:
        u, s, vt = svd_thin(a.T)
        return vt.T, s, u.T

    rows, n = a.shape
    w = a.copy()
    v = np.eye(n)
    converged = False
    for _ in range(SVD_MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                wi = w[:, i]
                wj = w[:, j]
                alpha = wi @ wi
                beta = wj @ wj
                gamma = wi @ wj
                if gamma == 0.0 or abs(gamma) <= SVD_TOL * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                w[:, [i, j]] = np.column_stack((c * wi - s * wj, s * wi + c * wj))
                vi = v[:, i].copy()
                vj = v[:, j]
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if not rotated:
            converged = True
            break
    if not converged:
        g = w.T @ w
        off = np.linalg.norm(g - np.diag(np.diag(g)))
        raise ConvergenceError(f"Jacobi SVD did not converge in {SVD_MAX_SWEEPS} sweeps", off)

    sigma = np.linalg.norm(w, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    w = w[:, order]
    v = v[:, order]
    cutoff = max(rows, n) * np.finfo(float).eps * (sigma[0] if sigma.size else 0.0)
    keep = sigma > cutoff
    u = np.zeros_like(w)
    u[:, keep] = w[:, keep] / sigma[keep]
    if not np.all(keep):
        u = _complete_columns(u, keep)
        sigma = np.where(keep, sigma, 0.0)
    return u, sigma, v.T


def solve_linear(k, r) -> np.ndarray:
    """Solve ``k @ x = r`` by pivoted LU with one refinement step.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``1e-14 * max|k|``.
    """
    k = as_matrix(k, "k")
    r = np.asarray(r, dtype=np.float64)
    if k.shape[0] != k.shape[1]:
        raise ContractError(f"k must be square, got {k.shape}")
    if r.shape[0] != k.shape[0]:
        raise ContractError(f"rhs length {r.shape[0]} does not match k rows {k.shape[0]}")
    scale = np.max(np.abs(k)) if k.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError(0, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(k)
    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero(pivots < PIVOT_TOL * scale)
    if bad.size:
        raise SingularMatrixError(int(bad[0]), float(pivots[bad[0]]))
    x = scipy.linalg.lu_solve((lu, piv), r)
    x = x + scipy.linalg.lu_solve((lu, piv), r - k @ x)
    return x


def variance(v) -> float:
    """Population variance with a ``1e-12`` floor."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size < 1:
        raise ContractError("variance of an empty vector")
    return max(float(np.var(v)), VARIANCE_FLOOR)
