"""RRMSE experiment pipeline over a grid of model configurations."""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from ..core import Dataset, ModelConfig, QQGPError, Structure
from ..fit import fit_model
from ..predict import predict, rrmse
from ..select import Loss, bic, bic_average_batch, bic_select, bic_weights, loocv_score
from .design import maximin_lhd, random_design
from .functions import BenchmarkSpec

RESULT_COLUMNS = ("benchmark", "replication", "method", "structure", "kernel", "latent",
                  "ordinal", "rrmse", "bic", "loocv_loglik", "loocv_l2", "fit_seconds")
META_METHODS = ("BIC_MSel", "BIC_MAvr", "LOOCV_loglik", "LOOCV_l2")


def default_methods(level_counts, **kw) -> list:
    """The 18 base configurations, Gaussian and exponential kernels first."""
    cells = [("gaussian", 1), ("gaussian", 2), ("gaussian", "ord"),
             ("exponential", 1), ("exponential", 2), ("exponential", "ord"),
             ("linear", 2), ("linear", 3), ("linear", "ord")]
    out = []
    for structure in (Structure.MULTIPLICATIVE, Structure.ADDITIVE):
        for kernel, latent in cells:
            out.append(ModelConfig.from_method(kernel, latent, structure, level_counts, **kw))
    return out


def _latent_label(cfg: ModelConfig) -> str:
    if cfg.J and all(cfg.ordinal_mode):
        return "ord"
    return "-".join(str(l) for l in cfg.latent_dims)


def _row(spec_name, rep, method, cfg, err, b, ll, l2, secs) -> dict:
    return {
        "benchmark": spec_name, "replication": rep, "method": method,
        "structure": "" if cfg is None else cfg.structure.value,
        "kernel": "" if cfg is None else cfg.qual_kernel.value,
        "latent": "" if cfg is None else _latent_label(cfg),
        "ordinal": "" if cfg is None else int(all(cfg.ordinal_mode) and cfg.J > 0),
        "rrmse": err, "bic": b, "loocv_loglik": ll, "loocv_l2": l2, "fit_seconds": secs,
    }


def make_dataset(spec: BenchmarkSpec, design) -> Dataset:
    y = spec.evaluate(design.U, design.V)
    return Dataset(design.U, design.V, y, spec.level_counts, spec.ordinal_flags)


def run_experiment(spec: BenchmarkSpec, configs, n_train: int, n_test: int = 2000,
                   replications: int = 10, seed: int = 0, restarts: int | None = None,
                   n_jobs: int = 1, progress=None) -> list:
    """Fit every configuration on each replication and score it on a shared test set.

    Returns a list of row dicts with keys ``RESULT_COLUMNS``: one row per
    base configuration and one per meta method (BIC selection, BIC
    averaging, leave-one-out selection under both losses) per replication.
    ``restarts`` overrides the restart count of every configuration.
    """
    configs = list(configs)
    if restarts is not None:
        configs = [replace(c, restarts=int(restarts)) for c in configs]
    root = np.random.SeedSequence(int(seed))
    test_seq, *rep_seqs = root.spawn(replications + 1)
    test = random_design(n_test, spec.quant_ranges, spec.level_counts,
                         np.random.default_rng(test_seq))
    y_test = spec.evaluate(test.U, test.V)
    rows = []
    for rep, seq in enumerate(rep_seqs, start=1):
        design = maximin_lhd(n_train, spec.I, spec.J, spec.level_counts, spec.quant_ranges,
                             np.random.default_rng(seq))
        data = make_dataset(spec, design)
        models, means, scores = [], [], []
        for k, cfg in enumerate(configs):
            t0 = time.perf_counter()
            try:
                model = fit_model(data, cfg, seed=int(seq.generate_state(1)[0]) + k,
                                  n_jobs=n_jobs)
                secs = time.perf_counter() - t0
                mean, _ = predict(model, test.U, test.V)
                err = rrmse(y_test, mean)
                b = bic(model)
                ll = loocv_score(model, Loss.LOGLIK)
                l2 = loocv_score(model, Loss.L2)
            except QQGPError:
                model, mean, secs = None, None, time.perf_counter() - t0
                err = b = ll = l2 = float("nan")
            models.append(model)
            means.append(mean)
            scores.append((b, ll, l2))
            rows.append(_row(spec.name, rep, cfg.method_name, cfg, err, b, ll, l2, secs))
            if progress is not None:
                progress(rep, cfg.method_name, err)
        rows.extend(_meta_rows(spec.name, rep, configs, models, means, scores, test, y_test))
    return rows


def _meta_rows(name, rep, configs, models, means, scores, test, y_test) -> list:
    ok = [i for i, m in enumerate(models) if m is not None]
    out = []
    if not ok:
        for meth in META_METHODS:
            out.append(_row(name, rep, meth, None, *([float("nan")] * 4), 0.0))
        return out
    bics = np.array([scores[i][0] for i in ok])
    lls = np.array([scores[i][1] for i in ok])
    l2s = np.array([scores[i][2] for i in ok])
    picks = {"BIC_MSel": ok[bic_select(bics)],
             "LOOCV_loglik": ok[int(np.argmin(np.where(np.isnan(lls), np.inf, lls)))],
             "LOOCV_l2": ok[int(np.argmin(np.where(np.isnan(l2s), np.inf, l2s)))]}
    for meth in META_METHODS:
        if meth == "BIC_MAvr":
            sel = [models[i] for i in ok]
            mean, _ = bic_average_batch(sel, test.U, test.V, bics)
            w = bic_weights(bics)
            avg = lambda v: float(np.dot(w, v))  # noqa: E731
            out.append(_row(name, rep, meth, None, rrmse(y_test, mean), avg(bics),
                            avg(lls), avg(l2s), 0.0))
            continue
        i = picks[meth]
        out.append(_row(name, rep, meth, configs[i], rrmse(y_test, means[i]), *scores[i], 0.0))
    return out


def normalized_ranks(rows, method: str, base_methods=None) -> dict:
    """Per-replication rank of ``method`` among the base methods plus itself.

    Ranks are 1-based and divided by the number of ranked methods.
    """
    by_rep = {}
    for r in rows:
        by_rep.setdefault(r["replication"], {})[r["method"]] = r["rrmse"]
    out = {}
    for rep, res in by_rep.items():
        names = [m for m in res if m not in META_METHODS] if base_methods is None \
            else list(base_methods)
        vals = np.array([res[m] for m in names], float)
        target = res[method]
        vals = np.where(np.isnan(vals), np.inf, vals)
        rank = 1 + int(np.sum(vals < target))
        out[rep] = rank / (len(names) + 1)
    return out


def median_by_method(rows) -> dict:
    acc = {}
    for r in rows:
        acc.setdefault(r["method"], []).append(r["rrmse"])
    return {m: float(np.nanmedian(v)) for m, v in acc.items()}
