"""Canonical forms of latent embeddings and kernel-equivalence checks.

A linear kernel only sees inner products, so embeddings related by an
orthogonal map are equivalent; Gaussian and exponential kernels only see
distances, so rotations, reflections and translations are all invisible.
The functions here pick one representative per equivalence class by a QR
decomposition with a positive diagonal.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .core import DimensionMismatch, NotPSD, QualKernel, RankDeficient, ValidationError
from .kernels import level_table

PSD_CLIP = 1e-10
PSD_FAIL = 1e-8
_RANK_TOL = 1e-12


def _qr_positive(A: np.ndarray) -> tuple:
    """QR of ``A`` with a non-negative diagonal in ``R``; zero diagonal raises."""
    Q, R = np.linalg.qr(A, mode="complete")
    m = min(A.shape)
    d = np.diag(R)[:m]
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.any(np.abs(d) <= _RANK_TOL * scale):
        raise RankDeficient("leading latent vectors are linearly dependent")
    s = np.ones(Q.shape[1])
    s[:m] = np.sign(d)
    return Q * s, R * s[:, None]


def _semidefinite_cholesky(K: np.ndarray, tol: float) -> np.ndarray:
    """Upper factor ``U`` with ``U.T @ U = K``; pivots below ``tol`` are zeroed."""
    a = K.shape[0]
    U = np.zeros((a, a))
    for k in range(a):
        d = K[k, k] - U[:k, k] @ U[:k, k]
        if d <= tol:
            continue
        U[k, k] = np.sqrt(d)
        U[k, k + 1:] = (K[k, k + 1:] - U[:k, k] @ U[:k, k + 1:]) / U[k, k]
    return U


def _check_unit_diag(K: np.ndarray) -> np.ndarray:
    K = np.asarray(K, float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionMismatch("kernel matrix must be square")
    if not np.allclose(K, K.T, atol=1e-12, rtol=0):
        raise ValidationError("kernel matrix is not symmetric")
    if np.max(np.abs(np.diag(K) - 1.0), initial=0.0) > 1e-10:
        raise ValidationError("kernel matrix must have a unit diagonal")
    return 0.5 * (K + K.T)


def to_linear_latents(K: np.ndarray) -> np.ndarray:
    """Latent vectors whose linear-kernel Gram matrix equals ``K``.

    Row ``v`` of the result is the latent vector of level ``v``; it is column
    ``v`` of the upper Cholesky factor, so coordinates after ``v`` vanish.
    When the semidefinite factorisation loses accuracy (near-singular ``K``)
    an eigen-square-root followed by QR gives the same triangular shape.
    """
    K = _check_unit_diag(K)
    a = K.shape[0]
    lam = np.linalg.eigvalsh(K)
    if lam[0] < -PSD_FAIL:
        raise NotPSD(f"smallest eigenvalue {lam[0]:.3e} is below -{PSD_FAIL}")
    W = _semidefinite_cholesky(K, tol=PSD_CLIP).T
    if np.max(np.abs(W @ W.T - K)) <= 1e-12:
        return W
    w, V = np.linalg.eigh(K)
    B = np.sqrt(np.clip(w, 0.0, None))[:, None] * V.T
    R = sla.qr(B, mode="r")[0]
    s = np.where(np.diag(R) < 0, -1.0, 1.0)
    R = R * s[:, None]
    W = R.T[:, :a]
    return W


def canon_linear(Z: np.ndarray) -> np.ndarray:
    """Canonical form of a linear-kernel embedding (rows are latent vectors).

    Rotates so the first ``l`` latent vectors form a lower-triangular block
    with a positive diagonal.
    """
    Z = np.atleast_2d(np.asarray(Z, float))
    a, l = Z.shape
    norms = np.linalg.norm(Z, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise ValidationError("linear-kernel latent vectors must have unit norm")
    m = min(a, l)
    Q, _ = _qr_positive(Z[:m].T)
    W = Z @ Q
    W[np.triu_indices(a, 1, l)] = 0.0
    return W


def canon_isotropic(Z: np.ndarray) -> np.ndarray:
    """Canonical form of a Gaussian/exponential-kernel embedding.

    Moves level 1 to the origin, then rotates so the differences to the
    following ``l`` levels form a lower-triangular block with a positive
    diagonal.
    """
    Z = np.atleast_2d(np.asarray(Z, float))
    a, l = Z.shape
    D = Z - Z[0]
    m = min(a - 1, l)
    if m == 0:
        return np.zeros_like(Z)
    Q, _ = _qr_positive(D[1:m + 1].T)
    W = D @ Q
    W[0] = 0.0
    W[np.triu_indices(a, 0, l)] = 0.0
    return W


def equivalent(kernel, Z: np.ndarray, Z2: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff both embeddings give the same kernel value for every level pair."""
    Z = np.atleast_2d(np.asarray(Z, float))
    Z2 = np.atleast_2d(np.asarray(Z2, float))
    if Z.shape[0] != Z2.shape[0]:
        return False
    kernel = QualKernel(kernel)
    return bool(np.max(np.abs(level_table(kernel, Z) - level_table(kernel, Z2))) <= tol)


def linear_gram(W: np.ndarray) -> np.ndarray:
    """Linear-kernel Gram matrix of the rows of ``W`` (no clipping)."""
    W = np.asarray(W, float)
    return W @ W.T
