"""Training correlation matrix, nugget conditioning and the profile likelihood.

The objective minimised during fitting is

    NLL = 0.5 * (n * log(sigma2_hat) + log det(R + delta I))

with the constant mean and process variance profiled out. It differs from
the full Gaussian negative log-likelihood by ``n/2 * (1 + log 2 pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _backend
from .core import (
    Dataset,
    EigenFailure,
    FullParams,
    ModelConfig,
    NonFiniteObjective,
    SingularSystem,
    Structure,
)
from .kernels import correlation_train, embed, level_table, stack_tables


@dataclass
class CorrelationSystem:
    """Nugget-conditioned correlation matrix and its Cholesky factor.

    Attributes
    ----------
    R : ndarray
        Unconditioned correlation matrix (unit diagonal).
    delta : float
        Nugget added to the diagonal.
    epsilon_star : float
        Grid threshold that produced ``delta``.
    chol : ndarray
        Lower Cholesky factor of ``R + delta * I``.
    logdet : float
        ``log det(R + delta * I)``.
    lam_min : float
        Smallest eigenvalue of ``R``.
    """

    R: np.ndarray
    delta: float
    epsilon_star: float
    chol: np.ndarray
    logdet: float
    lam_min: float = float("nan")

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``(R + delta I) x = b`` with two triangular solves."""
        return sla.cho_solve((self.chol, True), b, check_finite=False)

    def half_solve(self, b: np.ndarray) -> np.ndarray:
        """``L^{-1} b`` where ``L`` is the lower factor."""
        return sla.solve_triangular(self.chol, b, lower=True, check_finite=False)


def qual_tables(config: ModelConfig, qual) -> np.ndarray:
    """Stacked per-factor level kernel tables for parameters ``qual``."""
    tables = [level_table(config.qual_kernel, embed(q)) for q in qual]
    if not tables:
        return np.zeros((0, 1, 1))
    return stack_tables(tables)


def build_correlation(dataset: Dataset, config: ModelConfig, params: FullParams) -> np.ndarray:
    """Training correlation matrix for ``params`` (unit diagonal, symmetric)."""
    tables = qual_tables(config, params.qual)
    psi = params.psi if config.structure is Structure.ADDITIVE else None
    return correlation_train(dataset.U, dataset.V - 1, params.phi, tables, config.structure, psi)


def min_eigenvalue(R: np.ndarray) -> float:
    if not np.all(np.isfinite(R)):
        raise EigenFailure("correlation matrix has non-finite entries")
    try:
        lam = _backend.active().min_eigenvalue(np.ascontiguousarray(R, float))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    if not math.isfinite(lam):
        raise EigenFailure("eigensolver returned a non-finite value")
    return float(lam)


def select_nugget(R: np.ndarray, y: np.ndarray, grid) -> tuple:
    """Grid search of the nugget threshold.

    Returns ``(nll, index, delta, lam_min)`` for the threshold with the
    smallest profile NLL; exact ties go to the smallest threshold.
    """
    grid = np.ascontiguousarray(grid, float)
    if not np.all(np.isfinite(R)):
        raise EigenFailure("correlation matrix has non-finite entries")
    try:
        lam, vals = _backend.active().nugget_scan(
            np.ascontiguousarray(R, float), np.ascontiguousarray(y, float), grid)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    finite = np.isfinite(vals)
    if not finite.any():
        raise NonFiniteObjective("profile likelihood is not finite for any nugget level")
    best = vals[finite].min()
    ties = np.flatnonzero(vals == best)
    idx = int(ties[np.argmin(grid[ties])])
    return float(best), idx, max(0.0, float(grid[idx]) - lam), lam


def condition_nugget(R: np.ndarray, grid, Y: np.ndarray, n: int | None = None) -> CorrelationSystem:
    """Pick the nugget threshold minimising the profile NLL and factorise.

    For each threshold ``eps`` the nugget is ``max(0, eps - lam_min(R))``.
    """
    R = np.asarray(R, float)
    Y = np.asarray(Y, float).reshape(-1)
    if n is not None and (R.shape != (n, n) or Y.shape[0] != n):
        raise SingularSystem("R and Y disagree with n")
    _, idx, delta, lam = select_nugget(R, Y, grid)
    A = R + delta * np.eye(R.shape[0])
    try:
        L = sla.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"Cholesky failed after nugget {delta}") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return CorrelationSystem(R, delta, float(np.asarray(grid, float)[idx]), L, logdet, lam)


def profile_mean_var(Y: np.ndarray, system: CorrelationSystem) -> tuple:
    """Generalised least-squares mean and profile variance."""
    Y = np.asarray(Y, float).reshape(-1)
    n = Y.shape[0]
    s1 = system.half_solve(np.ones(n))
    sy = system.half_solve(Y)
    a11 = float(s1 @ s1)
    if not (a11 > 0 and math.isfinite(a11)):
        raise SingularSystem("1' R^{-1} 1 is not positive")
    mu = float(s1 @ sy) / a11
    r = sy - mu * s1
    sigma2 = float(r @ r) / n
    if not math.isfinite(sigma2):
        raise SingularSystem("non-finite variance estimate")
    return mu, max(sigma2, 0.0)


def evaluate(dataset: Dataset, config: ModelConfig, params: FullParams) -> tuple:
    """Profile NLL together with the conditioned system it was computed from."""
    R = build_correlation(dataset, config, params)
    system = condition_nugget(R, config.nugget_grid, dataset.y)
    _, sigma2 = profile_mean_var(dataset.y, system)
    if sigma2 <= 0:
        raise NonFiniteObjective("profile variance is zero")
    nll = 0.5 * (dataset.n * math.log(sigma2) + system.logdet)
    return nll, system


def profile_nll(dataset: Dataset, config: ModelConfig, params: FullParams) -> float:
    """Profile negative log-likelihood at ``params`` (mu and sigma2 profiled out)."""
    return evaluate(dataset, config, params)[0]


def full_nll_constant(n: int) -> float:
    """Offset between the profile NLL and the full Gaussian NLL at its optimum."""
    return 0.5 * n * (1.0 + math.log(2.0 * math.pi))
