"""Maximum-likelihood fitting over the box-constrained reparameterisation.

The free vector is laid out as ``[log phi | factor blocks | psi logits]``.
Quantitative inputs are rescaled to the unit cube and the response is
standardised inside the objective; the returned parameters are in problem
units and the final likelihood is evaluated on the raw data.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .core import (
    AllRestartsFailed,
    Dataset,
    FactorKind,
    FittedModel,
    FullParams,
    InfeasibleStart,
    ModelConfig,
    NonFiniteObjective,
    NumericalError,
    QualFactorParams,
    RankDeficient,
    Structure,
    ValidationError,
    iso_nominal_free_mask,
    iso_nominal_subdiag,
    lin_nominal_upper_bounds,
    n_free,
    validate_dataset,
)
from .identify import canon_isotropic, equivalent
from .kernels import correlation_train, embed, embed_values, level_table
from .likelihood import (
    build_correlation,
    condition_nugget,
    profile_mean_var,
    select_nugget,
)

LOG_PHI_BOUNDS = (math.log(1e-6), math.log(1e6))
START_LOG_PHI = (math.log(0.01), math.log(10.0))
BARRIER_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
SUM_MARGIN = 1e-6
PENALTY = 1e10
MAXITER = 500
GTOL = 1e-5


@dataclass(frozen=True)
class Layout:
    """Positions of each parameter group inside the free vector."""

    n_quant: int
    kinds: tuple
    level_counts: tuple
    latent_dims: tuple
    additive: bool

    @property
    def block_sizes(self) -> tuple:
        return tuple(n_free(k, a, l) for k, a, l in
                     zip(self.kinds, self.level_counts, self.latent_dims))

    @property
    def blocks(self) -> tuple:
        out, start = [], self.n_quant
        for size in self.block_sizes:
            out.append(slice(start, start + size))
            start += size
        return tuple(out)

    @property
    def n_psi(self) -> int:
        return len(self.kinds) - 1 if self.additive else 0

    @property
    def size(self) -> int:
        return self.n_quant + sum(self.block_sizes) + self.n_psi

    def bounds(self) -> tuple:
        lo = np.full(self.size, -np.inf)
        hi = np.full(self.size, np.inf)
        lo[:self.n_quant], hi[:self.n_quant] = LOG_PHI_BOUNDS
        for kind, a, l, sl in zip(self.kinds, self.level_counts, self.latent_dims, self.blocks):
            if kind is FactorKind.LIN_NOMINAL:
                lo[sl] = 0.0
                hi[sl] = lin_nominal_upper_bounds(a, l)
            elif kind is FactorKind.LIN_ORDINAL:
                lo[sl], hi[sl] = 0.0, math.pi
            elif kind is FactorKind.ISO_ORDINAL:
                lo[sl] = 0.0
            else:
                sub = iso_nominal_subdiag(a, l)
                lo[sl] = np.where(sub, 0.0, -np.inf)
        return lo, hi

    def sum_groups(self) -> tuple:
        """Index sets whose sum must stay below pi (LinOrdinal increments)."""
        return tuple(np.arange(sl.start, sl.stop) for kind, sl in zip(self.kinds, self.blocks)
                     if kind is FactorKind.LIN_ORDINAL)

    def unpack(self, x: np.ndarray) -> tuple:
        """Split ``x`` into (log phi, factor parameter list, psi or None)."""
        x = np.asarray(x, float)
        qual = [QualFactorParams(k, a, l, x[sl]) for k, a, l, sl in
                zip(self.kinds, self.level_counts, self.latent_dims, self.blocks)]
        psi = softmax_last_zero(x[self.size - self.n_psi:]) if self.additive else None
        return x[:self.n_quant], qual, psi


def make_layout(config: ModelConfig, level_counts, n_quant: int) -> Layout:
    additive = config.structure is Structure.ADDITIVE and len(level_counts) > 1
    return Layout(int(n_quant), config.kinds(), tuple(int(a) for a in level_counts),
                  tuple(int(l) for l in config.latent_dims), additive)


def softmax_last_zero(logits: np.ndarray) -> np.ndarray:
    """Simplex weights from ``J-1`` free logits with the last logit pinned at 0."""
    z = np.append(np.asarray(logits, float), 0.0)
    z = np.exp(z - z.max())
    return z / z.sum()


def logits_from_weights(psi: np.ndarray) -> np.ndarray:
    psi = np.clip(np.asarray(psi, float), 1e-300, None)
    return np.log(psi[:-1]) - np.log(psi[-1])


@dataclass
class OptProblem:
    """Box-constrained minimisation problem with optional sum-below-pi groups.

    ``objective`` may return ``inf`` where it cannot be evaluated.
    """

    objective: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    sum_groups: tuple = ()
    layout: Optional[Layout] = None
    n_evals: int = field(default=0, compare=False)

    @property
    def size(self) -> int:
        return self.lower.shape[0]

    def feasible(self, x: np.ndarray, strict: bool = True) -> bool:
        if np.any(x < self.lower) or np.any(x > self.upper):
            return False
        cap = math.pi if strict else math.pi + 1e-12
        for g in self.sum_groups:
            s = x[g].sum()
            if s >= cap if strict else s > cap:
                return False
        return True


class _ProfileObjective:
    """Profile NLL of the standardised response as a function of the free vector."""

    def __init__(self, dataset: Dataset, config: ModelConfig, layout: Layout):
        U = dataset.U
        self.lo = U.min(axis=0) if U.shape[1] else np.zeros(0)
        rng = np.ptp(U, axis=0) if U.shape[1] else np.zeros(0)
        self.scale = np.where(rng > 0, rng, 1.0)
        self.U = np.ascontiguousarray((U - self.lo) / self.scale)
        self.V = np.ascontiguousarray(dataset.V - 1)
        y = dataset.y
        self.y = np.ascontiguousarray((y - y.mean()) / y.std())
        self.grid = np.asarray(config.nugget_grid, float)
        self.config = config
        self.layout = layout
        self.factors = tuple(zip(layout.kinds, layout.level_counts, layout.latent_dims,
                                 layout.blocks))
        self.amax = max(layout.level_counts, default=1)

    def __call__(self, x: np.ndarray) -> float:
        lay = self.layout
        try:
            tables = np.zeros((len(lay.kinds), self.amax, self.amax))
            for j, (kind, a, l, sl) in enumerate(self.factors):
                Z = embed_values(kind, a, l, x[sl])
                tables[j, :a, :a] = level_table(self.config.qual_kernel, Z)
            psi = softmax_last_zero(x[lay.size - lay.n_psi:]) if lay.additive else None
            R = correlation_train(self.U, self.V, np.exp(x[:lay.n_quant]), tables,
                                  self.config.structure, psi)
            return select_nugget(R, self.y, self.grid)[0]
        except (NumericalError, ValidationError, FloatingPointError):
            return math.inf


def build_problem(dataset: Dataset, config: ModelConfig) -> OptProblem:
    layout = make_layout(config, dataset.level_counts, dataset.I)
    lo, hi = layout.bounds()
    return OptProblem(_ProfileObjective(dataset, config, layout), lo, hi,
                      layout.sum_groups(), layout)


def fd_gradient(fun, x: np.ndarray, f0: float, lower, upper) -> np.ndarray:
    """Central differences with step ``1e-6 * max(1, |x_i|)``.

    Falls back to a one-sided difference next to a bound or where the
    objective is not finite on one side.
    """
    g = np.zeros_like(x)
    for i in range(x.size):
        h = 1e-6 * max(1.0, abs(x[i]))
        up = x[i] + h <= upper[i]
        dn = x[i] - h >= lower[i]
        fp = fm = math.inf
        if up:
            xp = x.copy()
            xp[i] += h
            fp = fun(xp)
        if dn:
            xm = x.copy()
            xm[i] -= h
            fm = fun(xm)
        if math.isfinite(fp) and math.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * h)
        elif math.isfinite(fp):
            g[i] = (fp - f0) / h
        elif math.isfinite(fm):
            g[i] = (f0 - fm) / h
    return g


def _barrier(x: np.ndarray, groups, mu: float) -> float:
    """Log barrier ``-mu * log(pi - sum)`` with a quadratic continuation.

    Below a slack of ``tau = mu / 10`` the barrier is replaced by its
    second-order Taylor expansion at ``tau``, so it stays finite and smooth
    past the constraint and line searches never see an infinite value.
    """
    tau = 0.1 * mu
    total = 0.0
    for g in groups:
        t = math.pi - x[g].sum()
        if t >= tau:
            total -= mu * math.log(t)
        else:
            d = (t - tau) / tau
            total -= mu * (math.log(tau) + d - 0.5 * d * d)
    return total


def _pull_inside(x: np.ndarray, groups) -> np.ndarray:
    x = x.copy()
    for g in groups:
        s = x[g].sum()
        if s > math.pi - SUM_MARGIN:
            x[g] *= (math.pi - SUM_MARGIN) / s
    return x


def optimize(problem: OptProblem, start, maxiter: int = MAXITER, gtol: float = GTOL) -> tuple:
    """Local minimisation from ``start`` with L-BFGS-B and numerical gradients.

    When sum groups are present a log barrier ``-mu * log(pi - sum)`` is added
    and ``mu`` is lowered through ``BARRIER_SCHEDULE`` with warm starts.

    Returns
    -------
    x : ndarray
        Best point found (never worse than ``start``).
    f : float
        Objective at ``x`` without the barrier term.
    """
    x0 = np.asarray(start, float).copy()
    if x0.shape != (problem.size,):
        raise InfeasibleStart(f"start has length {x0.size}, expected {problem.size}")
    if not problem.feasible(x0):
        raise InfeasibleStart("start point violates the box or a sum constraint")
    f0 = problem.objective(x0)
    if not math.isfinite(f0):
        raise NonFiniteObjective("objective is not finite at the start point")
    groups = problem.sum_groups
    bounds = list(zip(np.where(np.isfinite(problem.lower), problem.lower, None),
                      np.where(np.isfinite(problem.upper), problem.upper, None)))
    schedule = BARRIER_SCHEDULE if groups else (0.0,)
    x = x0
    for mu in schedule:
        def fun(z, mu=mu):
            return problem.objective(z) + (_barrier(z, groups, mu) if groups else 0.0)

        def fun_grad(z):
            fz = fun(z)
            if not math.isfinite(fz):
                return PENALTY, np.zeros_like(z)
            return fz, fd_gradient(fun, z, fz, problem.lower, problem.upper)

        res = minimize(fun_grad, x, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": maxiter, "gtol": gtol})
        cand = _pull_inside(np.clip(res.x, problem.lower, problem.upper), groups)
        if math.isfinite(fun(cand)):
            x = cand
    f = problem.objective(x)
    if not math.isfinite(f) or f > f0:
        return x0, f0
    return x, f


def random_start(config: ModelConfig, level_counts, rng: np.random.Generator,
                 n_quant: int = 0) -> np.ndarray:
    """Random feasible starting vector in the free-parameter layout."""
    parts = [rng.uniform(*START_LOG_PHI, size=n_quant)]
    for kind, a, l in zip(config.kinds(), level_counts, config.latent_dims):
        if kind is FactorKind.LIN_NOMINAL:
            parts.append(rng.uniform(0.0, lin_nominal_upper_bounds(a, l)))
        elif kind is FactorKind.LIN_ORDINAL:
            parts.append(rng.uniform(0.0, math.pi / a, size=a - 1))
        elif kind is FactorKind.ISO_ORDINAL:
            parts.append(rng.uniform(0.0, 1.0, size=a - 1))
        else:
            z = rng.standard_normal(n_free(kind, a, l))
            sub = iso_nominal_subdiag(a, l)
            z[sub] = np.abs(z[sub])
            parts.append(z)
    if config.structure is Structure.ADDITIVE and len(level_counts) > 1:
        parts.append(rng.standard_normal(len(level_counts) - 1))
    return np.concatenate(parts) if parts else np.zeros(0)


def _canonical_iso(q: QualFactorParams, kernel) -> QualFactorParams:
    """Re-express an IsoNominal block in canonical form when that is well defined."""
    Z = embed(q)
    try:
        W = canon_isotropic(Z)
    except RankDeficient:
        return q
    vals = W[iso_nominal_free_mask(q.a, q.l)]
    out = QualFactorParams(q.kind, q.a, q.l, vals)
    try:
        ok = equivalent(kernel, Z, embed(out))
    except ValidationError:
        ok = False
    return out if ok else q


def model_at(dataset: Dataset, config: ModelConfig, phi, qual, psi=None,
             info: Optional[dict] = None) -> FittedModel:
    """Model with fixed kernel parameters; mean, variance and nugget are profiled.

    ``phi`` is in problem units and ``qual`` is a sequence of QualFactorParams.
    """
    if config.structure is Structure.ADDITIVE and psi is None:
        psi = np.full(dataset.J, 1.0 / max(dataset.J, 1))
    params = FullParams(0.0, 0.0, phi, tuple(qual), psi)
    R = build_correlation(dataset, config, params)
    system = condition_nugget(R, config.nugget_grid, dataset.y)
    mu, sigma2 = profile_mean_var(dataset.y, system)
    if not sigma2 > 0:
        raise NonFiniteObjective("profile variance is zero")
    alpha = system.solve(dataset.y - mu)
    nll = 0.5 * (dataset.n * math.log(sigma2) + system.logdet)
    params = FullParams(mu, sigma2, phi, tuple(qual), psi)
    return FittedModel(config, params, system.delta, system.epsilon_star, system.chol,
                       alpha, dataset, nll, dict(info or {}))


def finalize(dataset: Dataset, config: ModelConfig, problem: OptProblem, x: np.ndarray,
             info: Optional[dict] = None) -> FittedModel:
    """Turn a free vector into a FittedModel evaluated on the raw data."""
    log_phi, qual, psi = problem.layout.unpack(x)
    phi = np.exp(log_phi) / problem.objective.scale ** 2
    qual = tuple(_canonical_iso(q, config.qual_kernel) if q.kind is FactorKind.ISO_NOMINAL else q
                 for q in qual)
    if config.structure is Structure.ADDITIVE and psi is None:
        psi = np.ones(dataset.J)
    return model_at(dataset, config, phi, qual, psi, info)


def _run_restart(problem: OptProblem, config: ModelConfig, level_counts, n_quant, seq):
    rng = np.random.default_rng(seq)
    x0 = random_start(config, level_counts, rng, n_quant)
    try:
        return optimize(problem, x0)
    except NumericalError:
        return None


def fit_model(dataset: Dataset, config: ModelConfig, seed: int = 0,
              n_jobs: int = 1) -> FittedModel:
    """Multi-start maximum-likelihood fit.

    Restart ``i`` draws its start from child ``i`` of ``SeedSequence(seed)``,
    so results do not depend on ``n_jobs`` or on the completion order; the
    lowest NLL wins with ties going to the lowest restart index.
    """
    validate_dataset(dataset)
    config.validate(dataset.level_counts, dataset.ordinal_flags)
    problem = build_problem(dataset, config)
    seqs = np.random.SeedSequence(int(seed)).spawn(config.restarts)
    args = [(problem, config, dataset.level_counts, dataset.I, s) for s in seqs]
    if n_jobs > 1 and len(seqs) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(lambda a: _run_restart(*a), args))
    else:
        results = [_run_restart(*a) for a in args]
    ok = [(r[1], i, r[0]) for i, r in enumerate(results) if r is not None]
    if not ok:
        raise AllRestartsFailed(f"all {config.restarts} restarts failed")
    f, best, x = min(ok, key=lambda t: (t[0], t[1]))
    info = {
        "best_restart": best,
        "restart_nll_standardized": [None if r is None else float(r[1]) for r in results],
        "failed_restarts": sum(r is None for r in results),
    }
    return finalize(dataset, config, problem, x, info)
