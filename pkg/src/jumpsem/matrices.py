"""Dense symmetric-matrix utilities.

Half-vectorization, the duplication matrix and its pseudo-inverse,
Cholesky-based log-determinant / inverse, and the asymptotic covariance
kernel 2 D+ (S kron S) D+' of a realized-covariance estimate.

Orderings follow one repo-wide convention: vech stacks the columns of the
lower triangle (diagonal included) and vec stacks full columns, so that
vec(M) == D @ vech(M) for every symmetric M.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg.lapack import dpotrf, dpotri

from .errors import NotPositiveDefinite


class DuplicationPair(NamedTuple):
    """Duplication matrix D (p^2 x pbar) and its left pseudo-inverse Dplus."""

    dim: int
    D: np.ndarray
    Dplus: np.ndarray


def half_vec_len(p: int) -> int:
    """Number of distinct entries of a symmetric p x p matrix, p(p+1)/2."""
    return p * (p + 1) // 2


def vech_index(i: int, j: int, p: int) -> int:
    """Position of entry (i, j), i >= j, in the column-major lower-triangle order."""
    if i < j:
        i, j = j, i
    return j * p - j * (j - 1) // 2 + (i - j)


def vech(m: np.ndarray) -> np.ndarray:
    """Half-vectorize a symmetric matrix: stacked columns of the lower triangle."""
    m = np.asarray(m, dtype=float)
    p = m.shape[0]
    return np.concatenate([m[j:, j] for j in range(p)])


def unvech(v: np.ndarray, p: int) -> np.ndarray:
    """Rebuild the symmetric p x p matrix from its half-vectorization."""
    v = np.asarray(v, dtype=float)
    if v.shape != (half_vec_len(p),):
        raise ValueError(f"expected vector of length {half_vec_len(p)}, got {v.shape}")
    m = np.zeros((p, p))
    pos = 0
    for j in range(p):
        m[j:, j] = v[pos : pos + p - j]
        pos += p - j
    return m + np.tril(m, -1).T


@lru_cache(maxsize=None)
def duplication(p: int) -> DuplicationPair:
    """Duplication pair for dimension p, cached per dimension.

    D satisfies vec(M) = D @ vech(M) for symmetric M; Dplus = (D'D)^-1 D'
    satisfies vech(M) = Dplus @ vec(M). Cached values are read-only.
    """
    if p < 1:
        raise ValueError("dimension must be a positive integer")
    pbar = half_vec_len(p)
    d = np.zeros((p * p, pbar))
    for j in range(p):
        for i in range(p):
            d[j * p + i, vech_index(i, j, p)] = 1.0
    # D'D is diagonal (1 for diagonal entries, 2 for off-diagonal pairs).
    counts = d.sum(axis=0)
    dplus = d.T / counts[:, None]
    d.flags.writeable = False
    dplus.flags.writeable = False
    return DuplicationPair(p, d, dplus)


def chol_logdet_inv(m: np.ndarray) -> tuple[float, np.ndarray]:
    """Log-determinant and inverse of a positive definite matrix via Cholesky.

    Raises NotPositiveDefinite when a pivot fails; callers inside an
    optimization loop treat that as an infeasible point. Uses the LAPACK
    potrf/potri pair directly: this sits on the optimizer's hot path and the
    generic wrappers dominate the cost at these matrix sizes.
    """
    m = np.asarray(m, dtype=float)
    factor, info = dpotrf(m, lower=1, overwrite_a=0)
    if info != 0:
        raise NotPositiveDefinite(f"Cholesky pivot failure at index {info}")
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    inv, info = dpotri(factor, lower=1, overwrite_c=0)
    if info != 0:
        raise NotPositiveDefinite(f"Cholesky inversion failure at index {info}")
    inv = np.tril(inv) + np.tril(inv, -1).T
    return logdet, inv


def is_positive_definite(m: np.ndarray) -> bool:
    """Whether the Cholesky factorization of m succeeds."""
    try:
        np.linalg.cholesky(np.asarray(m, dtype=float))
    except np.linalg.LinAlgError:
        return False
    return True


def sandwich_cov(s: np.ndarray) -> np.ndarray:
    """Asymptotic covariance kernel 2 Dplus (S kron S) Dplus' of vech(S-hat).

    The root-n limit covariance of the half-vectorized realized covariance;
    the result is pbar x pbar, symmetric positive semidefinite.
    """
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    dplus = duplication(p).Dplus
    w = 2.0 * dplus @ np.kron(s, s) @ dplus.T
    return 0.5 * (w + w.T)
