"""Latent embeddings of qualitative levels and the kernels built on them."""

from __future__ import annotations

import math

import numpy as np

from .core import (
    DimensionMismatch,
    FactorKind,
    NonUnitNorm,
    QualFactorParams,
    QualKernel,
    RangeError,
    Structure,
    WeightError,
    iso_nominal_free_mask,
    lin_nominal_free_mask,
)
from . import _backend

_CONSTRAINT_SLACK = 1e-12


def hyperspherical(theta: np.ndarray) -> np.ndarray:
    """Map an (a, l-1) angle matrix to unit vectors in R^l.

    Coordinate k < l is ``cos(theta_k) * prod_{i<k} sin(theta_i)``; the last
    coordinate is the product of all sines.
    """
    theta = np.atleast_2d(theta)
    a, m = theta.shape
    z = np.empty((a, m + 1))
    s = np.ones(a)
    for k in range(m):
        z[:, k] = np.cos(theta[:, k]) * s
        s = s * np.sin(theta[:, k])
    z[:, m] = s
    return z


def embed(qp: QualFactorParams) -> np.ndarray:
    """Latent embedding (a, l) of one factor, row v is the latent vector of level v."""
    qp.check(_CONSTRAINT_SLACK)
    return embed_values(qp.kind, qp.a, qp.l, qp.values)


def embed_values(kind: FactorKind, a: int, l: int, x: np.ndarray) -> np.ndarray:
    """Embedding from a raw free-parameter block, without feasibility checks."""
    if kind is FactorKind.LIN_NOMINAL:
        theta = np.zeros((a, l - 1))
        theta[lin_nominal_free_mask(a, l)] = x
        return hyperspherical(theta)
    if kind is FactorKind.LIN_ORDINAL:
        ang = np.concatenate(([0.0], np.cumsum(x)))
        return np.column_stack((np.cos(ang), np.sin(ang)))
    if kind is FactorKind.ISO_NOMINAL:
        z = np.zeros((a, l))
        z[iso_nominal_free_mask(a, l)] = x
        return z
    return np.concatenate(([0.0], np.cumsum(x)))[:, None]


def quant_kernel(u, u2, phi) -> float:
    """Gaussian product kernel ``exp(-sum phi_i (u_i - u2_i)^2)``."""
    u = np.asarray(u, float)
    u2 = np.asarray(u2, float)
    phi = np.asarray(phi, float)
    if not (u.shape == u2.shape == phi.shape):
        raise DimensionMismatch("u, u2 and phi must have equal lengths")
    return float(np.exp(-np.sum(phi * (u - u2) ** 2)))


def qual_factor_kernel(kernel, z, z2) -> float:
    kernel = QualKernel(kernel)
    z = np.asarray(z, float)
    z2 = np.asarray(z2, float)
    if z.shape != z2.shape:
        raise DimensionMismatch("latent vectors differ in length")
    if kernel is QualKernel.LINEAR:
        for w in (z, z2):
            if abs(np.linalg.norm(w) - 1.0) > 1e-8:
                raise NonUnitNorm(f"linear kernel needs unit vectors, got norm {np.linalg.norm(w)}")
        return float(z @ z2)
    if np.array_equal(z, z2):
        return 1.0
    d2 = float(np.sum((z - z2) ** 2))
    if kernel is QualKernel.GAUSSIAN:
        return math.exp(-d2)
    return math.exp(-math.sqrt(d2))


def level_table(kernel, Z: np.ndarray) -> np.ndarray:
    """(a, a) matrix of kernel values between all level pairs of one factor."""
    kernel = QualKernel(kernel)
    Z = np.asarray(Z, float)
    if kernel is QualKernel.LINEAR:
        T = Z @ Z.T
        T = 0.5 * (T + T.T)
        np.clip(T, -1.0, 1.0, out=T)
    else:
        diff = Z[:, None, :] - Z[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        T = np.exp(-d2) if kernel is QualKernel.GAUSSIAN else np.exp(-np.sqrt(d2))
    np.fill_diagonal(T, 1.0)
    return T


def stack_tables(tables) -> np.ndarray:
    """Pad per-factor tables into one (J, amax, amax) array."""
    J = len(tables)
    amax = max((t.shape[0] for t in tables), default=1)
    out = np.zeros((J, amax, amax))
    for j, t in enumerate(tables):
        out[j, :t.shape[0], :t.shape[0]] = t
    return out


def check_weights(psi, J: int) -> np.ndarray:
    psi = np.asarray(psi, float).reshape(-1)
    if psi.size != J or np.any(psi < -1e-10) or abs(psi.sum() - 1.0) > 1e-10:
        raise WeightError(f"additive weights must lie on the simplex, got {psi}")
    return psi


def qual_kernel(structure, kernel, embeddings, psi, v, v2) -> float:
    """Joint qualitative kernel between 1-based level vectors ``v`` and ``v2``."""
    structure = Structure(structure)
    v = tuple(int(x) for x in v)
    v2 = tuple(int(x) for x in v2)
    if len(v) != len(embeddings) or len(v2) != len(embeddings):
        raise DimensionMismatch("level vectors must have one entry per factor")
    if structure is Structure.ADDITIVE:
        psi = check_weights(psi, len(embeddings))
    if v == v2:
        return 1.0
    vals = [qual_factor_kernel(kernel, Z[a - 1], Z[b - 1])
            for Z, a, b in zip(embeddings, v, v2)]
    return combine(structure, vals, psi)


def combine(structure, values, psi=None) -> float:
    """Multiply per-factor kernel values, or take their psi-weighted sum."""
    values = np.asarray(values, float)
    if Structure(structure) is Structure.MULTIPLICATIVE:
        return float(np.prod(values))
    psi = check_weights(psi, values.size)
    return float(psi @ values)


def ordinal_chain_check(kernel, tau12: float, tau23: float) -> float:
    """Correlation between levels 1 and 3 of a 3-level ordinal chain.

    Given the correlations of the two adjacent pairs, returns the value the
    increment parameterisation forces on the outer pair. The Gaussian case
    uses ``exp(-2 sqrt(log(tau12) log(tau23)))``: both logs are non-positive,
    so their product is the non-negative quantity under the root.
    """
    kernel = QualKernel(kernel)
    if kernel is QualKernel.LINEAR:
        for t in (tau12, tau23):
            if not -1.0 <= t <= 1.0:
                raise RangeError(f"linear-kernel correlation {t} outside [-1, 1]")
        return tau12 * tau23 - math.sqrt(1.0 - tau12 ** 2) * math.sqrt(1.0 - tau23 ** 2)
    for t in (tau12, tau23):
        if not 0.0 < t <= 1.0:
            raise RangeError(f"isotropic-kernel correlation {t} outside (0, 1]")
    if kernel is QualKernel.EXPONENTIAL:
        return tau12 * tau23
    return tau12 * tau23 * math.exp(-2.0 * math.sqrt(math.log(tau12) * math.log(tau23)))


def correlation(U1, V1, U2, V2, phi, tables, structure, psi=None) -> np.ndarray:
    """Cross-correlation matrix between two point sets.

    ``V1``/``V2`` hold 0-based level indices; ``tables`` is the stacked
    (J, amax, amax) array of per-factor level kernels.
    """
    additive = Structure(structure) is Structure.ADDITIVE
    w = np.ones(tables.shape[0]) if psi is None else np.asarray(psi, float)
    return _backend.active().corr_cross(
        np.ascontiguousarray(U1, float), np.ascontiguousarray(V1, np.int64),
        np.ascontiguousarray(U2, float), np.ascontiguousarray(V2, np.int64),
        np.ascontiguousarray(phi, float), np.ascontiguousarray(tables, float),
        additive, np.ascontiguousarray(w, float))


def correlation_train(U, V, phi, tables, structure, psi=None) -> np.ndarray:
    """Symmetric training correlation matrix with an exact unit diagonal."""
    additive = Structure(structure) is Structure.ADDITIVE
    w = np.ones(tables.shape[0]) if psi is None else np.asarray(psi, float)
    return _backend.active().corr_train(
        np.ascontiguousarray(U, float), np.ascontiguousarray(V, np.int64),
        np.ascontiguousarray(phi, float), np.ascontiguousarray(tables, float),
        additive, np.ascontiguousarray(w, float))
