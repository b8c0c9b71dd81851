"""Leave-one-out scores, BIC, model selection and BIC model averaging.

Selection functions return 0-based indices into the candidate list.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .core import EmptyCandidates, FittedModel, MixedInput, SingularSystem, param_count
from .predict import Prediction, predict, predict_point


class Loss(str, enum.Enum):
    LOGLIK = "loglik"
    L2 = "l2"


@dataclass(frozen=True)
class ModelScore:
    bic: float
    loocv_loglik: float
    loocv_l2: float
    avg_weight: float = float("nan")


def loocv_moments(model: FittedModel, literal: bool = False) -> tuple:
    """Closed-form leave-one-out means and variances.

    With ``M = (R + delta I)^{-1}`` and residuals centred at the fitted mean,
    ``mu_i = y_i - (M r)_i / M_ii`` and ``s2_i = sigma2 / M_ii``. With
    ``literal=True`` the residuals are not centred and the variances are not
    scaled by ``sigma2``.
    """
    L = model.chol
    n = model.n
    Linv = sla.solve_triangular(L, np.eye(n), lower=True, check_finite=False)
    m_diag = np.einsum("ij,ij->j", Linv, Linv)
    if np.any(m_diag <= 0) or not np.all(np.isfinite(m_diag)):
        raise SingularSystem("non-positive diagonal of the inverse correlation matrix")
    y = model.train.y
    if literal:
        my = sla.cho_solve((L, True), y, check_finite=False)
        return y - my / m_diag, 1.0 / m_diag
    return y - model.alpha / m_diag, model.params.sigma2 / m_diag


def loocv_score(model: FittedModel, loss=Loss.LOGLIK, literal: bool = False) -> float:
    """Average leave-one-out loss (negative log predictive density or squared error)."""
    loss = Loss(loss)
    mu, s2 = loocv_moments(model, literal)
    y = model.train.y
    if loss is Loss.L2:
        return float(np.mean((y - mu) ** 2))
    if np.any(s2 <= 0):
        raise SingularSystem("zero leave-one-out variance")
    return float(np.mean(0.5 * np.log(2.0 * math.pi * s2) + (y - mu) ** 2 / (2.0 * s2)))


def bic(model: FittedModel) -> float:
    """``-2 log L + p log n`` with the full Gaussian log-likelihood at the estimates."""
    d = model.train
    n = d.n
    p = param_count(model.config, d.level_counts, d.I)
    return 2.0 * model.neg_loglik + n * (1.0 + math.log(2.0 * math.pi)) + p * math.log(n)


def _argmin_first(values) -> int:
    v = np.asarray(values, float)
    if v.size == 0:
        raise EmptyCandidates("no candidate models")
    v = np.where(np.isnan(v), np.inf, v)
    return int(np.argmin(v))


def bic_select(bics) -> int:
    """Index of the smallest BIC; ties go to the earliest candidate."""
    return _argmin_first(bics)


def bic_weights(bics) -> np.ndarray:
    """Averaging weights ``exp(-(BIC - BIC_min) / 2)``, normalised."""
    b = np.asarray(bics, float)
    if b.size == 0:
        raise EmptyCandidates("no candidate models")
    finite = np.isfinite(b)
    if not finite.any():
        raise EmptyCandidates("no candidate has a finite BIC")
    w = np.zeros_like(b)
    w[finite] = np.exp(-(b[finite] - b[finite].min()) / 2.0)
    return w / w.sum()


def combine_predictions(weights, means, sds) -> tuple:
    """Weighted mean and the spread ``sum_k w_k sqrt(s_k^2 + (mean - mean_k)^2)``."""
    w = np.asarray(weights, float)
    means = np.asarray(means, float)
    sds = np.asarray(sds, float)
    keep = w > 0
    w, means, sds = w[keep], means[keep], sds[keep]
    mean = np.tensordot(w, means, axes=1)
    spread = np.tensordot(w, np.sqrt(sds ** 2 + (mean - means) ** 2), axes=1)
    return mean, spread


def bic_average(models, x: MixedInput, bics=None) -> Prediction:
    """BIC-weighted model average at one input."""
    if not models:
        raise EmptyCandidates("no candidate models")
    bics = [bic(m) for m in models] if bics is None else bics
    preds = [predict_point(m, x) for m in models]
    mean, sd = combine_predictions(bic_weights(bics), [p.mean for p in preds],
                                   [p.sd for p in preds])
    return Prediction(float(mean), float(sd))


def bic_average_batch(models, U, V, bics=None) -> tuple:
    """BIC-weighted model average at query rows (1-based levels)."""
    if not models:
        raise EmptyCandidates("no candidate models")
    bics = [bic(m) for m in models] if bics is None else bics
    w = bic_weights(bics)
    means, sds = [], []
    for m, wk in zip(models, w):
        if wk > 0:
            mu, sd = predict(m, U, V)
        else:
            mu = sd = np.zeros(np.asarray(U).shape[0])
        means.append(mu)
        sds.append(sd)
    return combine_predictions(w, means, sds)


def loocv_select(models, loss=Loss.LOGLIK, scores=None) -> int:
    """Index of the model with the smallest leave-one-out score."""
    if scores is None:
        if not models:
            raise EmptyCandidates("no candidate models")
        scores = [loocv_score(m, loss) for m in models]
    return _argmin_first(scores)


def score_models(models) -> list:
    """ModelScore for each candidate, including its averaging weight."""
    if not models:
        raise EmptyCandidates("no candidate models")
    bics = [bic(m) for m in models]
    w = bic_weights(bics)
    return [ModelScore(b, loocv_score(m, Loss.LOGLIK), loocv_score(m, Loss.L2), float(wk))
            for m, b, wk in zip(models, bics, w)]
