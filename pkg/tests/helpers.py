"""Shared builders and brute-force oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np

from qqgp.core import (
    Dataset,
    FactorKind,
    ModelConfig,
    QualFactorParams,
    QualKernel,
    Structure,
    iso_nominal_subdiag,
    lin_nominal_upper_bounds,
    n_free,
)
from qqgp.fit import model_at


def random_factor(kind, a, l, rng) -> QualFactorParams:
    """Feasible random parameters for one qualitative factor."""
    kind = FactorKind(kind)
    if kind is FactorKind.LIN_NOMINAL:
        vals = rng.uniform(0.0, lin_nominal_upper_bounds(a, l))
    elif kind is FactorKind.LIN_ORDINAL:
        vals = rng.uniform(0.0, math.pi / a, size=a - 1)
    elif kind is FactorKind.ISO_ORDINAL:
        vals = rng.uniform(0.0, 1.5, size=a - 1)
    else:
        vals = rng.standard_normal(n_free(kind, a, l))
        sub = iso_nominal_subdiag(a, l)
        vals[sub] = np.abs(vals[sub])
    return QualFactorParams(kind, a, l, vals)


def random_config(rng, level_counts, restarts=1) -> ModelConfig:
    kernel = list(QualKernel)[int(rng.integers(3))]
    structure = list(Structure)[int(rng.integers(2))]
    ordinal = bool(rng.integers(2))
    if ordinal:
        latent = "ord"
    else:
        latent = int(rng.integers(2, 4)) if kernel is QualKernel.LINEAR else int(rng.integers(1, 3))
    return ModelConfig.from_method(kernel, latent, structure, level_counts, restarts=restarts)


def smooth_response(U, V):
    """Deterministic test surface with a level-dependent shift and slope."""
    U = np.asarray(U, float)
    V = np.asarray(V, float)
    s = np.sin(3.0 * U[:, 0]) + 0.5 * U[:, -1] ** 2
    if V.shape[1]:
        s = s * (1.0 + 0.3 * V[:, 0]) + 0.2 * V.sum(axis=1)
    return s


def random_dataset(rng, n, I=2, level_counts=(3, 4), response=None) -> Dataset:
    U = rng.random((n, I))
    V = np.column_stack([np.resize(rng.permutation(a) + 1, n) for a in level_counts]) \
        if level_counts else np.zeros((n, 0), dtype=int)
    y = smooth_response(U, V) if response is None else response(U, V)
    return Dataset(U, V, y, level_counts, (True,) * len(level_counts))


def random_model(rng, n=None, level_counts=None, config=None):
    """Model at random fixed hyperparameters on a random dataset."""
    n = int(rng.integers(6, 26)) if n is None else n
    if level_counts is None:
        level_counts = tuple(int(a) for a in rng.integers(2, 5, size=int(rng.integers(1, 3))))
    d = random_dataset(rng, n, 2, level_counts,
                       response=lambda U, V: smooth_response(U, V) + 0.1 * rng.standard_normal(n))
    cfg = random_config(rng, level_counts) if config is None else config
    qual = [random_factor(k, a, l, rng) for k, a, l in
            zip(cfg.kinds(), level_counts, cfg.latent_dims)]
    psi = rng.dirichlet(np.ones(len(level_counts))) \
        if cfg.structure is Structure.ADDITIVE else None
    phi = np.exp(rng.uniform(np.log(0.5), np.log(20.0), size=2))
    return model_at(d, cfg, phi, qual, psi)


def explicit_loo(model):
    """Leave-one-out moments by deleting each row (mean and variance held fixed)."""
    A = model.chol @ model.chol.T
    y = model.train.y
    mu, s2 = model.params.mu, model.params.sigma2
    n = y.size
    m, v = np.empty(n), np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        Ak = A[np.ix_(keep, keep)]
        r = A[keep, i]
        w = np.linalg.solve(Ak, r)
        m[i] = mu + w @ (y[keep] - mu)
        v[i] = s2 * (A[i, i] - w @ r)
    return m, v


def eig_profile_nll(R, y, eps):
    """Profile NLL of ``R + max(0, eps - lam_min) I`` from a full eigendecomposition."""
    lam, Q = np.linalg.eigh(R)
    d = max(0.0, eps - lam[0])
    w = lam + d
    if np.any(w <= 0):
        return math.inf
    qy = Q.T @ y
    q1 = Q.T @ np.ones(y.size)
    a11 = np.sum(q1 * q1 / w)
    a1y = np.sum(q1 * qy / w)
    mu = a1y / a11
    r = qy - mu * q1
    s2 = np.sum(r * r / w) / y.size
    return 0.5 * (y.size * math.log(s2) + np.sum(np.log(w)))


def near_singular_matrix(rng, n=None):
    """Gaussian-kernel correlation matrix over clustered points."""
    n = int(rng.integers(5, 31)) if n is None else n
    k = int(rng.integers(1, 4))
    X = rng.random((n, k))
    if rng.random() < 0.5:
        X[rng.integers(n)] = X[rng.integers(n)] + 1e-4 * rng.standard_normal(k)
    theta = 10.0 ** rng.uniform(-1.5, 0.5)
    D2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    R = np.exp(-theta * D2)
    np.fill_diagonal(R, 1.0)
    return R


def strip_wall_time(text: str) -> str:
    """Output text with the manifest's wall_time zeroed (JSON or CSV output)."""
    import json
    if text.startswith("# manifest: "):
        head, _, rest = text.partition("\n")
        man = json.loads(head[len("# manifest: "):])
        man["wall_time"] = 0.0
        return "# manifest: " + json.dumps(man, sort_keys=True) + "\n" + rest
    obj = json.loads(text)
    if "manifest" in obj:
        obj["manifest"]["wall_time"] = 0.0
    return json.dumps(obj, sort_keys=True)


def strip_timing(text: str) -> str:
    """``strip_wall_time`` plus a blanked ``fit_seconds`` column in CSV output."""
    import csv
    import io
    text = strip_wall_time(text)
    if not text.startswith("# manifest: "):
        return text
    head, _, body = text.partition("\n")
    rows = list(csv.reader(io.StringIO(body)))
    if rows and "fit_seconds" in rows[0]:
        k = rows[0].index("fit_seconds")
        for r in rows[1:]:
            r[k] = ""
    out = io.StringIO()
    csv.writer(out, lineterminator="\n").writerows(rows)
    return head + "\n" + out.getvalue()
