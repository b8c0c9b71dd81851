"""Maximin Latin hypercube designs with snapped qualitative columns."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..core import DimensionMismatch, InvalidConfig


class Provenance(str, enum.Enum):
    MAXIMIN_LHD = "MaximinLHD"
    RANDOM = "Random"
    EXTERNAL = "External"


@dataclass(frozen=True, eq=False)
class Design:
    """``n`` design points: quantitative columns first, then 1-based level columns."""

    U: np.ndarray
    V: np.ndarray
    provenance: Provenance
    unit: np.ndarray = None

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.hstack([self.U, self.V.astype(float)])


def min_distance(X: np.ndarray) -> float:
    """Smallest pairwise Euclidean distance between rows of ``X``."""
    D2 = _sq_dists(X)
    iu = np.triu_indices(X.shape[0], 1)
    return float(np.sqrt(D2[iu].min())) if iu[0].size else float("inf")


def _sq_dists(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    D2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(D2, np.inf)
    return D2


def lhd_centers(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random LHD in the unit cube with points at stratum centres."""
    cols = [(rng.permutation(n) + 0.5) / n for _ in range(d)]
    return np.column_stack(cols) if d else np.zeros((n, 0))


def maximin_search(X: np.ndarray, rng: np.random.Generator, budget: int) -> np.ndarray:
    """Coordinate-swap hill climbing on the minimum pairwise distance.

    A swap of one column between two rows is kept when it raises the minimum
    distance, or keeps it and lowers the number of pairs attaining it.
    """
    X = X.copy()
    n, d = X.shape
    if n < 3 or d == 0:
        return X
    D2 = _sq_dists(X)
    best = D2.min()
    count = int(np.sum(D2 == best))
    for _ in range(budget):
        c = int(rng.integers(d))
        i, k = (int(t) for t in rng.choice(n, size=2, replace=False))
        if X[i, c] == X[k, c]:
            continue
        Xn = X.copy()
        Xn[i, c], Xn[k, c] = X[k, c], X[i, c]
        rows = Xn[[i, k]]
        new = np.sum((rows[:, None, :] - Xn[None, :, :]) ** 2, axis=2)
        new[0, i] = new[1, k] = np.inf
        D2n = D2.copy()
        D2n[[i, k], :] = new
        D2n[:, [i, k]] = new.T
        m = D2n.min()
        cn = int(np.sum(D2n == m))
        if m > best or (m == best and cn < count):
            X, D2, best, count = Xn, D2n, m, cn
    return X


def snap_levels(u: np.ndarray, a: int) -> np.ndarray:
    """Map unit-interval values to 1-based levels on ``a`` equal-width bins."""
    return np.minimum(np.floor(np.asarray(u) * a), a - 1).astype(np.int64) + 1


def maximin_lhd(n: int, I: int, J: int = 0, level_counts=(), ranges=None,  # noqa: E741
                rng: np.random.Generator | None = None) -> Design:
    """Maximin LHD over ``I + J`` unit dimensions.

    Quantitative columns are scaled to ``ranges`` (default unit interval);
    qualitative columns are snapped to levels. The swap budget is
    ``10 * n * (I + J)``.
    """
    if n < 2:
        raise InvalidConfig("a design needs at least 2 points")
    level_counts = tuple(int(a) for a in level_counts)
    if len(level_counts) != J:
        raise DimensionMismatch("level_counts must have J entries")
    if ranges is None:
        ranges = [(0.0, 1.0)] * I
    if len(ranges) != I:
        raise DimensionMismatch("ranges must have I entries")
    rng = rng if rng is not None else np.random.default_rng()
    d = I + J
    X = lhd_centers(n, d, rng)
    X = maximin_search(X, rng, 10 * n * d)
    lo = np.array([r[0] for r in ranges], float)
    hi = np.array([r[1] for r in ranges], float)
    U = lo + X[:, :I] * (hi - lo)
    V = np.column_stack([snap_levels(X[:, I + j], a) for j, a in enumerate(level_counts)]) \
        if J else np.zeros((n, 0), dtype=np.int64)
    return Design(U, V, Provenance.MAXIMIN_LHD, X)


def random_design(n: int, ranges, level_counts, rng: np.random.Generator) -> Design:
    """Uniform random points: quantitative uniform in range, levels uniform."""
    lo = np.array([r[0] for r in ranges], float)
    hi = np.array([r[1] for r in ranges], float)
    U = lo + rng.random((n, len(ranges))) * (hi - lo)
    V = np.column_stack([rng.integers(1, a + 1, size=n) for a in level_counts]) \
        if len(level_counts) else np.zeros((n, 0), dtype=np.int64)
    return Design(U, V.astype(np.int64), Provenance.RANDOM)
