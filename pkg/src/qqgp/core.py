"""Shared data model: mixed inputs, datasets, model configuration and parameters.

Level indices are 1-based at every public boundary. Arrays held by the
dataclasses below are made read-only on construction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class QQGPError(Exception):
    """Base class for all package errors."""


class ValidationError(QQGPError, ValueError):
    """Malformed input, configuration or parameters."""


class NumericalError(QQGPError, ArithmeticError):
    """A numerical procedure failed."""


class DimensionMismatch(ValidationError):
    pass


class LevelOutOfRange(ValidationError):
    pass


class DegenerateResponse(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class ConstraintViolation(ValidationError):
    pass


class NonUnitNorm(ValidationError):
    pass


class WeightError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class EmptyCandidates(ValidationError):
    pass


class DegenerateTruth(ValidationError):
    pass


class InfeasibleStart(ValidationError):
    pass


class EigenFailure(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NonFiniteObjective(NumericalError):
    pass


class AllRestartsFailed(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class NegativeDiscriminant(NumericalError):
    pass


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class Structure(str, enum.Enum):
    MULTIPLICATIVE = "multiplicative"
    ADDITIVE = "additive"


class QualKernel(str, enum.Enum):
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"
    LINEAR = "linear"


class FactorKind(str, enum.Enum):
    ISO_NOMINAL = "IsoNominal"
    ISO_ORDINAL = "IsoOrdinal"
    LIN_NOMINAL = "LinNominal"
    LIN_ORDINAL = "LinOrdinal"


DEFAULT_NUGGET_GRID = tuple(10.0 ** -k for k in range(1, 9))


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# Inputs and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixedInput:
    """One design point: real coordinates ``u`` and 1-based level indices ``v``."""

    u: tuple
    v: tuple

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        object.__setattr__(self, "v", tuple(int(x) for x in self.v))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training data with ``n`` points, ``I`` quantitative and ``J`` qualitative columns.

    ``U`` has shape (n, I), ``V`` has shape (n, J) and holds 1-based levels.
    """

    U: np.ndarray
    V: np.ndarray
    y: np.ndarray
    level_counts: tuple
    ordinal_flags: tuple = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        n = y.shape[0]
        U = np.asarray(self.U, dtype=float)
        if U.ndim == 1:
            U = U.reshape(n, -1) if U.size else np.zeros((n, 0))
        V = np.asarray(self.V)
        if V.ndim == 1:
            V = V.reshape(n, -1) if V.size else np.zeros((n, 0), dtype=int)
        if V.size and not np.all(np.equal(np.mod(V, 1), 0)):
            raise ValidationError("qualitative columns must hold integer levels")
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "V", _frozen(V, dtype=np.int64))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "level_counts", tuple(int(a) for a in self.level_counts))
        flags = self.ordinal_flags
        if flags is None:
            flags = (False,) * len(self.level_counts)
        object.__setattr__(self, "ordinal_flags", tuple(bool(f) for f in flags))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def I(self) -> int:  # noqa: E743
        return self.U.shape[1]

    @property
    def J(self) -> int:
        return self.V.shape[1]

    @property
    def inputs(self) -> list:
        return [MixedInput(self.U[i], self.V[i]) for i in range(self.n)]

    @classmethod
    def from_inputs(cls, inputs: Sequence[MixedInput], y, level_counts, ordinal_flags=None):
        if not inputs:
            raise DimensionMismatch("empty input list")
        I = len(inputs[0].u)
        J = len(inputs[0].v)
        for x in inputs:
            if len(x.u) != I or len(x.v) != J:
                raise DimensionMismatch("inputs have inconsistent dimensions")
        U = np.array([x.u for x in inputs], dtype=float).reshape(len(inputs), I)
        V = np.array([x.v for x in inputs], dtype=np.int64).reshape(len(inputs), J)
        return cls(U, V, y, level_counts, ordinal_flags)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.U[idx], self.V[idx], self.y[idx], self.level_counts, self.ordinal_flags)


def validate_dataset(d: Dataset) -> None:
    """Raise if ``d`` breaks any dataset invariant."""
    n = d.n
    if n < 2:
        raise DimensionMismatch(f"need at least 2 points, got {n}")
    if d.U.shape[0] != n or d.V.shape[0] != n:
        raise DimensionMismatch("U, V and y disagree on the number of points")
    if len(d.level_counts) != d.J:
        raise DimensionMismatch(
            f"{d.J} qualitative columns but {len(d.level_counts)} level counts")
    if len(d.ordinal_flags) != d.J:
        raise DimensionMismatch("ordinal_flags length differs from J")
    for j, a in enumerate(d.level_counts):
        if a < 2:
            raise InvalidConfig(f"factor {j + 1} declares {a} levels; need >= 2")
        col = d.V[:, j]
        bad = (col < 1) | (col > a)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise LevelOutOfRange(
                f"point {i + 1}: level {int(col[i])} of factor {j + 1} outside 1..{a}")
    if not np.all(np.isfinite(d.U)) or not np.all(np.isfinite(d.y)):
        raise ValidationError("non-finite values in inputs or responses")
    if np.ptp(d.y) == 0.0:
        raise DegenerateResponse("all responses are equal")


# ---------------------------------------------------------------------------
# Model configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    structure: Structure = Structure.MULTIPLICATIVE
    qual_kernel: QualKernel = QualKernel.GAUSSIAN
    latent_dims: tuple = ()
    ordinal_mode: tuple = ()
    nugget_grid: tuple = DEFAULT_NUGGET_GRID
    restarts: int = 15

    def __post_init__(self):
        object.__setattr__(self, "structure", Structure(self.structure))
        object.__setattr__(self, "qual_kernel", QualKernel(self.qual_kernel))
        object.__setattr__(self, "latent_dims", tuple(int(l) for l in self.latent_dims))
        om = tuple(bool(o) for o in self.ordinal_mode)
        if not om:
            om = (False,) * len(self.latent_dims)
        object.__setattr__(self, "ordinal_mode", om)
        object.__setattr__(self, "nugget_grid", tuple(float(e) for e in self.nugget_grid))
        object.__setattr__(self, "restarts", int(self.restarts))

    @property
    def J(self) -> int:
        return len(self.latent_dims)

    def kinds(self) -> tuple:
        out = []
        for l, o in zip(self.latent_dims, self.ordinal_mode):
            if self.qual_kernel is QualKernel.LINEAR:
                out.append(FactorKind.LIN_ORDINAL if o else FactorKind.LIN_NOMINAL)
            else:
                out.append(FactorKind.ISO_ORDINAL if o else FactorKind.ISO_NOMINAL)
        return tuple(out)

    def validate(self, level_counts, ordinal_flags=None) -> None:
        if len(level_counts) != self.J:
            raise InvalidConfig(
                f"config has {self.J} latent dims, data has {len(level_counts)} factors")
        if len(self.ordinal_mode) != self.J:
            raise InvalidConfig("ordinal_mode length differs from latent_dims")
        if self.restarts < 1:
            raise InvalidConfig("restarts must be positive")
        if not self.nugget_grid or any(e <= 0 for e in self.nugget_grid):
            raise InvalidConfig("nugget grid must hold positive thresholds")
        for j, (a, l, kind) in enumerate(zip(level_counts, self.latent_dims, self.kinds())):
            if not 1 <= l <= a:
                raise InvalidConfig(f"factor {j + 1}: latent dim {l} outside 1..{a}")
            if kind is FactorKind.LIN_ORDINAL and l != 2:
                raise InvalidConfig(f"factor {j + 1}: ordinal linear kernel needs latent dim 2")
            if kind is FactorKind.ISO_ORDINAL and l != 1:
                raise InvalidConfig(f"factor {j + 1}: ordinal isotropic kernel needs latent dim 1")
            if kind is FactorKind.LIN_NOMINAL and l < 2:
                raise InvalidConfig(f"factor {j + 1}: nominal linear kernel needs latent dim >= 2")
            if ordinal_flags is not None and self.ordinal_mode[j] and not ordinal_flags[j]:
                raise InvalidConfig(f"factor {j + 1} is not ordinal in the data")

    @property
    def method_name(self) -> str:
        kern = {QualKernel.GAUSSIAN: "Gau", QualKernel.EXPONENTIAL: "Exp",
                QualKernel.LINEAR: "Linear"}[self.qual_kernel]
        if self.J and all(self.ordinal_mode):
            sub = "ord"
        elif len(set(self.latent_dims)) == 1:
            sub = str(self.latent_dims[0])
        else:
            sub = "-".join(str(l) for l in self.latent_dims)
        sup = "multi" if self.structure is Structure.MULTIPLICATIVE else "add"
        return f"{kern}_{sub}_{sup}"

    @classmethod
    def from_method(cls, kernel, latent, structure, level_counts, **kw) -> "ModelConfig":
        """Build a config such as ``Gau_ord_multi`` for factors with ``level_counts`` levels.

        ``latent`` is an integer dimension or ``"ord"``. Requested dimensions
        larger than a factor's level count are clipped to it.
        """
        qk = QualKernel(kernel)
        J = len(level_counts)
        if latent == "ord":
            l = 2 if qk is QualKernel.LINEAR else 1
            dims = (l,) * J
            om = (True,) * J
        else:
            dims = tuple(min(int(latent), int(a)) for a in level_counts)
            om = (False,) * J
        return cls(structure=structure, qual_kernel=qk, latent_dims=dims, ordinal_mode=om, **kw)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.value,
            "qual_kernel": self.qual_kernel.value,
            "latent_dims": list(self.latent_dims),
            "ordinal_mode": list(self.ordinal_mode),
            "nugget_grid": list(self.nugget_grid),
            "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            kw = dict(
                structure=d.get("structure", "multiplicative"),
                qual_kernel=d.get("qual_kernel", "gaussian"),
                latent_dims=d["latent_dims"],
                ordinal_mode=d.get("ordinal_mode", ()),
                restarts=d.get("restarts", 15),
            )
            if "nugget_grid" in d:
                kw["nugget_grid"] = d["nugget_grid"]
            return cls(**kw)
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidConfig(f"bad model config: {exc}") from exc


def factor_param_count(kind: FactorKind, a: int, l: int) -> int:
    """Number of free parameters of one qualitative factor as tabulated for BIC."""
    kind = FactorKind(kind)
    if kind is FactorKind.LIN_NOMINAL:
        return (a - 1) * (l - 1)
    if kind is FactorKind.ISO_NOMINAL:
        return (2 * a - l - 1) * l // 2
    return a - 1


def param_count(config: ModelConfig, level_counts, n_quant: int) -> int:
    """Total parameter count used by BIC: mean, variance, scales, latents, weights."""
    config.validate(level_counts)
    total = 2 + n_quant
    for kind, a, l in zip(config.kinds(), level_counts, config.latent_dims):
        total += factor_param_count(kind, a, l)
    if config.structure is Structure.ADDITIVE:
        total += config.J - 1
    return total


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def lin_nominal_free_mask(a: int, l: int) -> np.ndarray:
    """Boolean (a, l-1) mask of the free hyperspherical angles.

    Row v (1-based) has angles 1..min(v-1, l-1) free; the rest are pinned at 0.
    """
    mask = np.zeros((a, max(l - 1, 0)), dtype=bool)
    for v in range(1, a + 1):
        mask[v - 1, :min(v - 1, l - 1)] = True
    return mask


def lin_nominal_upper_bounds(a: int, l: int) -> np.ndarray:
    """Upper bounds for the free angles, in free-entry order."""
    mask = lin_nominal_free_mask(a, l)
    ub = np.full(mask.shape, math.pi)
    for v in range(l + 1, a + 1):
        ub[v - 1, l - 2] = 2.0 * math.pi
    return ub[mask]


def iso_nominal_free_mask(a: int, l: int) -> np.ndarray:
    """Boolean (a, l) mask of free coordinates: z[v, k] free iff k < v (1-based)."""
    mask = np.zeros((a, l), dtype=bool)
    for v in range(1, a + 1):
        mask[v - 1, :min(v - 1, l)] = True
    return mask


def iso_nominal_subdiag(a: int, l: int) -> np.ndarray:
    """Boolean flags over free entries marking the sub-diagonal z[v, v-1]."""
    mask = iso_nominal_free_mask(a, l)
    sub = np.zeros_like(mask)
    for v in range(2, min(a, l + 1) + 1):
        sub[v - 1, v - 2] = True
    return sub[mask]


def n_free(kind: FactorKind, a: int, l: int) -> int:
    """Length of the stored parameter vector of one factor."""
    kind = FactorKind(kind)
    if kind is FactorKind.LIN_NOMINAL:
        return int(lin_nominal_free_mask(a, l).sum())
    if kind is FactorKind.ISO_NOMINAL:
        return int(iso_nominal_free_mask(a, l).sum())
    return a - 1


@dataclass(frozen=True, eq=False)
class QualFactorParams:
    """Free parameters of one qualitative factor.

    ``values`` holds, by kind: free angles (LinNominal, row-major), increments
    Delta_2..Delta_a (both ordinal kinds), or free latent coordinates
    (IsoNominal, row-major).
    """

    kind: FactorKind
    a: int
    l: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", FactorKind(self.kind))
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, float).reshape(-1)))
        want = n_free(self.kind, self.a, self.l)
        if self.values.size != want:
            raise DimensionMismatch(
                f"{self.kind.value} with a={self.a}, l={self.l} needs {want} values, "
                f"got {self.values.size}")

    def check(self, slack: float = 0.0) -> None:
        """Raise ConstraintViolation if the values leave the feasible region."""
        x = self.values
        if not np.all(np.isfinite(x)):
            raise ConstraintViolation("non-finite parameter")
        if self.kind is FactorKind.LIN_NOMINAL:
            ub = lin_nominal_upper_bounds(self.a, self.l)
            if np.any(x < -slack) or np.any(x > ub + slack):
                raise ConstraintViolation("hyperspherical angle outside its range")
        elif self.kind is FactorKind.ISO_NOMINAL:
            if np.any(x[iso_nominal_subdiag(self.a, self.l)] < -slack):
                raise ConstraintViolation("negative sub-diagonal latent coordinate")
        else:
            if np.any(x < -slack):
                raise ConstraintViolation("negative ordinal increment")
            if self.kind is FactorKind.LIN_ORDINAL and x.sum() > math.pi + slack:
                raise ConstraintViolation("ordinal angles exceed pi")

    # JSON uses the symbol names of the reparameterisation table.
    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "levels": self.a, "latent_dim": self.l}
        if self.kind is FactorKind.LIN_NOMINAL:
            full = np.zeros((self.a, self.l - 1))
            full[lin_nominal_free_mask(self.a, self.l)] = self.values
            d["theta"] = full.tolist()
        elif self.kind is FactorKind.ISO_NOMINAL:
            full = np.zeros((self.a, self.l))
            full[iso_nominal_free_mask(self.a, self.l)] = self.values
            d["z"] = full.tolist()
        elif self.kind is FactorKind.LIN_ORDINAL:
            d["delta_theta"] = [0.0] + self.values.tolist()
        else:
            d["delta_z"] = [0.0] + self.values.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QualFactorParams":
        kind = FactorKind(d["kind"])
        a, l = int(d["levels"]), int(d["latent_dim"])
        if kind is FactorKind.LIN_NOMINAL:
            full = np.asarray(d["theta"], float).reshape(a, l - 1)
            vals = full[lin_nominal_free_mask(a, l)]
        elif kind is FactorKind.ISO_NOMINAL:
            full = np.asarray(d["z"], float).reshape(a, l)
            vals = full[iso_nominal_free_mask(a, l)]
        elif kind is FactorKind.LIN_ORDINAL:
            vals = np.asarray(d["delta_theta"], float)[1:]
        else:
            vals = np.asarray(d["delta_z"], float)[1:]
        return cls(kind, a, l, vals)


@dataclass(frozen=True, eq=False)
class FullParams:
    mu: float
    sigma2: float
    phi: np.ndarray
    qual: tuple
    psi: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "phi", _frozen(np.asarray(self.phi, float).reshape(-1)))
        object.__setattr__(self, "qual", tuple(self.qual))
        if self.psi is not None:
            object.__setattr__(self, "psi", _frozen(np.asarray(self.psi, float).reshape(-1)))
        if not self.sigma2 >= 0:
            raise ConstraintViolation("sigma2 must be non-negative")
        if np.any(self.phi <= 0):
            raise ConstraintViolation("scale parameters must be positive")

    def to_dict(self) -> dict:
        d = {
            "mu": self.mu,
            "sigma2": self.sigma2,
            "phi": self.phi.tolist(),
            "qual": [q.to_dict() for q in self.qual],
        }
        d["psi"] = None if self.psi is None else self.psi.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FullParams":
        psi = d.get("psi")
        return cls(
            mu=d["mu"], sigma2=d["sigma2"], phi=d["phi"],
            qual=tuple(QualFactorParams.from_dict(q) for q in d["qual"]),
            psi=None if psi is None else np.asarray(psi, float),
        )

    def __eq__(self, other):
        if not isinstance(other, FullParams):
            return NotImplemented
        return self.to_dict() == other.to_dict()


@dataclass(eq=False)
class FittedModel:
    """Estimated model together with the cached factorisation used for prediction."""

    config: ModelConfig
    params: FullParams
    delta: float
    epsilon_star: float
    chol: np.ndarray
    alpha: np.ndarray
    train: Dataset
    neg_loglik: float
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.train.n

    @property
    def method_name(self) -> str:
        return self.config.method_name
