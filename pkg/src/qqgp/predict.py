"""Kriging predictions and the RRMSE accuracy measure."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .core import (
    DegenerateTruth,
    DimensionMismatch,
    FittedModel,
    LevelOutOfRange,
    MixedInput,
    Structure,
)
from .kernels import correlation
from .likelihood import qual_tables

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Prediction:
    mean: float
    sd: float


class _Cache:
    """Quantities reused across predictions from one model."""

    def __init__(self, model: FittedModel):
        p = model.params
        self.tables = qual_tables(model.config, p.qual)
        self.psi = p.psi if model.config.structure is Structure.ADDITIVE else None
        self.s1 = sla.solve_triangular(model.chol, np.ones(model.n), lower=True,
                                       check_finite=False)
        self.ones_m_ones = float(self.s1 @ self.s1)


def _cache(model: FittedModel) -> _Cache:
    c = model.__dict__.get("_predict_cache")
    if c is None or c[0] is not model.chol:
        c = (model.chol, _Cache(model))
        model.__dict__["_predict_cache"] = c
    return c[1]


def _check_queries(model: FittedModel, U: np.ndarray, V: np.ndarray) -> tuple:
    d = model.train
    U = np.asarray(U, float)
    V = np.asarray(V)
    if U.ndim == 1:
        U = U.reshape(-1, d.I) if d.I else np.zeros((V.shape[0] if V.ndim == 2 else 0, 0))
    if V.ndim == 1:
        V = V.reshape(-1, d.J) if d.J else np.zeros((U.shape[0], 0), dtype=np.int64)
    if U.shape[1] != d.I or V.shape[1] != d.J or U.shape[0] != V.shape[0]:
        raise DimensionMismatch(
            f"queries have {U.shape[1]} quantitative and {V.shape[1]} qualitative columns; "
            f"model expects {d.I} and {d.J}")
    if V.size and np.any(V != np.round(V)):
        raise LevelOutOfRange("qualitative levels must be integers")
    V = V.astype(np.int64)
    for j, a in enumerate(d.level_counts):
        if np.any((V[:, j] < 1) | (V[:, j] > a)):
            raise LevelOutOfRange(f"factor {j + 1} level outside 1..{a}")
    return U, V


def predict(model: FittedModel, U, V) -> tuple:
    """Kriging mean and standard deviation at query rows ``(U, V)``.

    ``V`` holds 1-based levels. The nugget is added to the cross-correlation
    only for a query that coincides exactly with a training input.
    """
    U, V = _check_queries(model, U, V)
    m = U.shape[0]
    if m == 0:
        return np.zeros(0), np.zeros(0)
    c = _cache(model)
    d = model.train
    p = model.params
    r = correlation(d.U, d.V - 1, U, V - 1, p.phi, c.tables, model.config.structure, c.psi)
    if model.delta > 0:
        same = np.all(d.U[:, None, :] == U[None, :, :], axis=2) & \
            np.all(d.V[:, None, :] == V[None, :, :], axis=2)
        r = r + model.delta * same
    mean = p.mu + r.T @ model.alpha
    w = sla.solve_triangular(model.chol, r, lower=True, check_finite=False)
    rmr = np.einsum("ij,ij->j", w, w)
    rm1 = c.s1 @ w
    var = p.sigma2 * (1.0 - rmr + (rm1 - 1.0) ** 2 / c.ones_m_ones)
    neg = var < 0
    if np.any(neg):
        log.debug("clamped %d negative variances (largest %.3e)", int(neg.sum()),
                  float(-var[neg].min()))
        var = np.where(neg, 0.0, var)
    return mean, np.sqrt(var)


def predict_point(model: FittedModel, x: MixedInput) -> Prediction:
    """Prediction at one mixed input."""
    if not isinstance(x, MixedInput):
        x = MixedInput(*x)
    d = model.train
    if len(x.u) != d.I or len(x.v) != d.J:
        raise DimensionMismatch(
            f"input has {len(x.u)} + {len(x.v)} coordinates; model expects {d.I} + {d.J}")
    mean, sd = predict(model, np.array(x.u, float).reshape(1, d.I),
                       np.array(x.v, np.int64).reshape(1, d.J))
    return Prediction(float(mean[0]), float(sd[0]))


def rrmse(truth, pred) -> float:
    """Relative root-mean-squared error ``sqrt(sum (pred-truth)^2 / sum (truth-mean)^2)``."""
    truth = np.asarray(truth, float).reshape(-1)
    pred = np.asarray(pred, float).reshape(-1)
    if truth.size == 0 or truth.shape != pred.shape:
        raise DimensionMismatch("truth and pred must be non-empty with equal lengths")
    den = float(np.sum((truth - truth.mean()) ** 2))
    if den == 0.0:
        raise DegenerateTruth("truth values are all equal")
    return float(np.sqrt(np.sum((pred - truth) ** 2) / den))
