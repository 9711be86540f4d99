"""Matrix analysis helpers: truncated SVD, Schatten norms, subspace distances."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "TruncatedSVD",
    "svd_r",
    "schatten_norm",
    "truncated_schatten",
    "sin_theta",
    "orth_complement",
    "random_orthonormal",
    "as_rng",
]


def as_rng(seed_or_rng=None) -> np.random.Generator:
    """Return a ``numpy.random.Generator`` from a seed, Generator, or None."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _check_schatten_order(q) -> float:
    q = float(q)
    if math.isnan(q) or q < 1:
        raise ValueError(f"Schatten order must be >= 1 or inf, got {q}")
    return q


class TruncatedSVD(NamedTuple):
    """Leading-r part of a singular value decomposition."""

    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray


def svd_r(M, r: int) -> TruncatedSVD:
    """Leading-``r`` SVD of ``M`` with a deterministic sign convention.

    Each left singular vector is flipped so its largest-magnitude entry
    (smallest index on ties) is nonnegative, with the matching right vector
    flipped alongside. When ``rank(M) < r`` the returned basis is still ``r``
    orthonormal columns, completed from the trailing singular vectors.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("svd_r expects a matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("svd_r: non-finite entries")
    if not 1 <= r <= min(M.shape):
        raise ValueError(f"rank {r} outside [1, {min(M.shape)}] for shape {M.shape}")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U = U[:, :r].copy()
    Vt = Vt[:r].copy()
    s = s[:r].copy()
    for j in range(r):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
            Vt[j] = -Vt[j]
    return TruncatedSVD(U, s, Vt)


def schatten_norm(M, q) -> float:
    """Schatten-``q`` norm; ``q=2`` is Frobenius, ``q=inf`` spectral."""
    return truncated_schatten(M, min(np.asarray(M).shape), q)


def truncated_schatten(M, r: int, q) -> float:
    """Schatten-``q`` norm of the best rank-``r`` approximation of ``M``."""
    q = _check_schatten_order(q)
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("truncated_schatten expects a matrix")
    if not 0 <= r <= min(M.shape):
        raise ValueError(f"rank {r} outside [0, {min(M.shape)}] for shape {M.shape}")
    if r == 0:
        return 0.0
    s = np.linalg.svd(M, compute_uv=False)[:r]
    if math.isinf(q):
        return float(s[0])
    return float(np.sum(s**q) ** (1.0 / q))


def principal_angle_sines(U1, U2) -> np.ndarray:
    """Sines of the principal angles between two orthonormal column spans.

    Computed from the cross block against the first basis's orthogonal
    complement, which keeps full precision at small angles (the cosine route
    through ``U1.T @ U2`` loses half the digits near zero).
    """
    U1 = np.asarray(U1)
    U2 = np.asarray(U2)
    if U1.shape != U2.shape:
        raise ValueError(f"shape mismatch: {U1.shape} vs {U2.shape}")
    p, r = U1.shape
    if r >= p:
        return np.zeros(r)
    sines = np.linalg.svd(orth_complement(U1).T @ U2, compute_uv=False)
    # roundoff can push values marginally outside [0, 1]
    return np.clip(sines, 0.0, 1.0)


def sin_theta(U1, U2, q=math.inf) -> float:
    """Schatten-``q`` norm of the sin-Theta matrix between two orthonormal bases."""
    q = _check_schatten_order(q)
    sines = principal_angle_sines(U1, U2)
    if math.isinf(q):
        return float(sines.max(initial=0.0))
    return float(np.sum(sines**q) ** (1.0 / q))


def orth_complement(U) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(U)``."""
    U = np.asarray(U, dtype=np.float64)
    p, r = U.shape
    if r >= p:
        raise ValueError(f"no complement: basis is already {p} x {r}")
    comp = scipy.linalg.null_space(U.T)
    if comp.shape != (p, p - r):
        raise ValueError("complement has wrong dimension; input columns not independent?")
    return comp


def random_orthonormal(p: int, r: int, rng=None) -> np.ndarray:
    """Draw a ``p x r`` orthonormal basis uniformly (Haar) via sign-fixed QR."""
    if r > p:
        raise ValueError(f"rank {r} exceeds dimension {p}")
    rng = as_rng(rng)
    Q, R = np.linalg.qr(rng.standard_normal((p, r)))
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
