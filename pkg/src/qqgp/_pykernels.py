"""Pure numpy/scipy implementation of the hot kernels.

Used when the compiled module is unavailable or ``QQGP_BACKEND=python``.
The compiled module exposes the same four functions with identical
signatures.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

NAME = "python"


def _qual_part(V1, V2, tables, additive, w):
    n1, n2 = V1.shape[0], V2.shape[0]
    J = tables.shape[0]
    if J == 0:
        return np.ones((n1, n2))
    if additive:
        out = np.zeros((n1, n2))
        for j in range(J):
            out += w[j] * tables[j][V1[:, j][:, None], V2[:, j][None, :]]
    else:
        out = np.ones((n1, n2))
        for j in range(J):
            out *= tables[j][V1[:, j][:, None], V2[:, j][None, :]]
    return out


def _quant_part(U1, U2, phi):
    if U1.shape[1] == 0:
        return np.ones((U1.shape[0], U2.shape[0]))
    D = U1[:, None, :] - U2[None, :, :]
    return np.exp(-np.einsum("ijk,ijk,k->ij", D, D, phi))


def corr_cross(U1, V1, U2, V2, phi, tables, additive, w):
    """Correlation matrix between two point sets (levels 0-based)."""
    return _quant_part(U1, U2, phi) * _qual_part(V1, V2, tables, additive, w)


def corr_train(U, V, phi, tables, additive, w):
    """Symmetric training correlation matrix with unit diagonal."""
    R = corr_cross(U, V, U, V, phi, tables, additive, w)
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return R


def min_eigenvalue(R):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(sla.eigh(R, eigvals_only=True, subset_by_index=[0, 0],
                          driver="evr", check_finite=False)[0])


def grid_profile_nll(R, y, lam_min, grid):
    """Profile negative log-likelihood for each nugget level in ``grid``.

    The nugget added for level ``eps`` is ``max(0, eps - lam_min)``. Entries
    whose factorisation fails or whose variance estimate is not positive are
    ``inf``. Equal nuggets are evaluated once.
    """
    n = R.shape[0]
    out = np.empty(len(grid))
    seen = {}
    ones = np.ones(n)
    for g, eps in enumerate(grid):
        delta = max(0.0, float(eps) - lam_min)
        if delta in seen:
            out[g] = seen[delta]
            continue
        val = np.inf
        try:
            L = np.linalg.cholesky(R + delta * np.eye(n))
        except np.linalg.LinAlgError:
            L = None
        if L is not None:
            s1 = sla.solve_triangular(L, ones, lower=True, check_finite=False)
            sy = sla.solve_triangular(L, y, lower=True, check_finite=False)
            a11 = s1 @ s1
            a1y = s1 @ sy
            sig2 = (sy @ sy - a1y * a1y / a11) / n
            if sig2 > 0 and np.isfinite(sig2):
                val = 0.5 * (n * np.log(sig2) + 2.0 * np.sum(np.log(np.diag(L))))
        seen[delta] = val
        out[g] = val
    return out


def nugget_scan(R, y, grid):
    """Smallest eigenvalue of ``R`` and the profile NLL for every nugget level."""
    lam = min_eigenvalue(R)
    return lam, grid_profile_nll(R, y, lam, grid)
