"""Analytic engineering test functions with discretised ordinal inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import NegativeDiscriminant, RangeError

BEAM_INERTIA = (0.0491, 0.0833, 0.0449, 0.0633, 0.0373, 0.0167)

BEAM_RANGES = {"L": (10.0, 20.0), "h": (1.0, 2.0)}
BOREHOLE_RANGES = {
    "r_w": (0.05, 0.15), "r": (100.0, 50000.0), "T_u": (63070.0, 115600.0),
    "H_u": (990.0, 1110.0), "T_l": (63.1, 116.0), "H_l": (700.0, 820.0),
    "L": (1120.0, 1680.0), "K_w": (9855.0, 12045.0),
}
OTL_RANGES = {
    "R_b1": (50.0, 150.0), "R_b2": (25.0, 70.0), "R_f": (0.5, 3.0),
    "R_c1": (1.2, 2.5), "R_c2": (0.25, 1.2), "beta": (50.0, 300.0),
}
PISTON_RANGES = {
    "M": (30.0, 60.0), "S": (0.005, 0.020), "V0": (0.002, 0.010), "k": (1000.0, 5000.0),
    "P0": (90000.0, 110000.0), "Ta": (290.0, 296.0), "T0": (340.0, 360.0),
}

OTL_RF_LEVELS = (0.5, 1.2, 2.1, 2.9)
OTL_BETA_LEVELS = (50.0, 100.0, 150.0, 200.0, 250.0, 300.0)
PISTON_P0_LEVELS = (90000.0, 100000.0, 110000.0)
PISTON_K_LEVELS = (1000.0, 2000.0, 3000.0, 4000.0, 5000.0)


def _check(name: str, value, ranges: dict) -> None:
    lo, hi = ranges[name]
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    x = np.asarray(value, float)
    if not np.all(np.isfinite(x)) or np.any(x < lo - tol) or np.any(x > hi + tol):
        raise RangeError(f"{name}={value} outside [{lo}, {hi}]")


def eval_beam(L, h, v_level):
    """Tip deflection of a cantilever beam for cross-section type ``v_level`` (1..6)."""
    _check("L", L, BEAM_RANGES)
    _check("h", h, BEAM_RANGES)
    v = np.asarray(v_level)
    if np.any((v < 1) | (v > len(BEAM_INERTIA))) or np.any(v != np.round(v)):
        raise RangeError(f"cross-section type {v_level} outside 1..{len(BEAM_INERTIA)}")
    inertia = np.asarray(BEAM_INERTIA)[v.astype(int) - 1]
    return L ** 3 / (3e9 * h ** 4 * inertia)


def eval_borehole(r_w, r, T_u, H_u, T_l, H_l, L, K_w):
    """Water flow rate through a borehole."""
    for name, val in zip(("r_w", "r", "T_u", "H_u", "T_l", "H_l", "L", "K_w"),
                         (r_w, r, T_u, H_u, T_l, H_l, L, K_w)):
        _check(name, val, BOREHOLE_RANGES)
    log_ratio = np.log(r / r_w)
    denom = log_ratio * (1.0 + 2.0 * L * T_u / (log_ratio * r_w ** 2 * K_w) + T_u / T_l)
    return 2.0 * math.pi * T_u * (H_u - H_l) / denom


def eval_otl(R_b1, R_b2, R_f, R_c1, R_c2, beta):
    """Midpoint voltage of a push-pull transformerless amplifier."""
    for name, val in zip(("R_b1", "R_b2", "R_f", "R_c1", "R_c2", "beta"),
                         (R_b1, R_b2, R_f, R_c1, R_c2, beta)):
        _check(name, val, OTL_RANGES)
    v_b1 = 12.0 * R_b2 / (R_b1 + R_b2)
    c2 = R_c2 + 9.0
    den = beta * c2 + R_f
    return (v_b1 + 0.74) * beta * c2 / den + 11.35 * R_f / den + 0.74 * R_f * beta * c2 / (R_c1 * den)


def eval_piston(M, S, V0, k, P0, Ta, T0):
    """Cycle time of a piston in a cylinder.

    The gas volume uses ``V = S / (2k) * (sqrt(A^2 + 4 k P0 V0 Ta / T0) - A)``,
    the positive root of ``k V^2 + A S V - S^2 P0 V0 Ta / T0 = 0``.
    """
    for name, val in zip(("M", "S", "V0", "k", "P0", "Ta", "T0"), (M, S, V0, k, P0, Ta, T0)):
        _check(name, val, PISTON_RANGES)
    A = P0 * S + 19.62 * M - k * V0 / S
    disc = A ** 2 + 4.0 * k * P0 * V0 * Ta / T0
    if np.any(np.asarray(disc) < 0):
        raise NegativeDiscriminant("negative radicand in the gas volume")
    V = S / (2.0 * k) * (np.sqrt(disc) - A)
    if np.any(np.asarray(V) <= 0):
        raise NegativeDiscriminant("non-positive gas volume")
    return 2.0 * math.pi * np.sqrt(M / (k + S ** 2 * P0 * V0 * Ta / (V ** 2 * T0)))


@dataclass(frozen=True)
class BenchmarkSpec:
    """Test function with its quantitative ranges and ordinal factor levels.

    ``arg_order`` lists the simulator's positional arguments; each name is
    either in ``quant_names`` or in ``qual_names``.
    """

    name: str
    func: Callable
    arg_order: tuple
    quant_names: tuple
    quant_ranges: tuple
    qual_names: tuple
    qual_levels: tuple
    level_is_index: tuple = ()

    def __post_init__(self):
        for levels in self.qual_levels:
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise RangeError(f"{self.name}: levels must be strictly increasing")

    @property
    def I(self) -> int:  # noqa: E743
        return len(self.quant_names)

    @property
    def J(self) -> int:
        return len(self.qual_names)

    @property
    def level_counts(self) -> tuple:
        return tuple(len(lv) for lv in self.qual_levels)

    @property
    def ordinal_flags(self) -> tuple:
        return (True,) * self.J

    def evaluate(self, U: np.ndarray, V: np.ndarray) -> np.ndarray:
        """Simulator output for quantitative rows ``U`` and 1-based level rows ``V``."""
        U = np.atleast_2d(np.asarray(U, float))
        V = np.atleast_2d(np.asarray(V, int))
        args = {}
        for i, name in enumerate(self.quant_names):
            args[name] = U[:, i]
        for j, name in enumerate(self.qual_names):
            lv = np.asarray(self.qual_levels[j], float)
            if np.any((V[:, j] < 1) | (V[:, j] > lv.size)):
                raise RangeError(f"{name}: level index outside 1..{lv.size}")
            args[name] = V[:, j] if self.level_is_index[j] else lv[V[:, j] - 1]
        return np.asarray(self.func(*(args[a] for a in self.arg_order)), float)


def beam() -> BenchmarkSpec:
    return BenchmarkSpec(
        "beam", eval_beam, ("L", "h", "v"), ("L", "h"),
        (BEAM_RANGES["L"], BEAM_RANGES["h"]), ("v",),
        (tuple(float(i) for i in range(1, 7)),), (True,))


def borehole(q1: int = 3, q2: int = 4) -> BenchmarkSpec:
    """Borehole with ``r_w`` on ``q1`` and ``H_l`` on ``q2`` equally spaced levels."""
    if not (2 <= q1 and 2 <= q2):
        raise RangeError("need at least two levels per discretised input")
    quant = ("r", "T_u", "H_u", "T_l", "L", "K_w")
    rw = tuple(float(x) for x in np.round(np.linspace(*BOREHOLE_RANGES["r_w"], q1), 12))
    hl = tuple(float(x) for x in np.round(np.linspace(*BOREHOLE_RANGES["H_l"], q2), 9))
    return BenchmarkSpec(
        "borehole", eval_borehole, ("r_w", "r", "T_u", "H_u", "T_l", "H_l", "L", "K_w"),
        quant, tuple(BOREHOLE_RANGES[q] for q in quant), ("r_w", "H_l"), (rw, hl),
        (False, False))


def otl() -> BenchmarkSpec:
    quant = ("R_b1", "R_b2", "R_c1", "R_c2")
    return BenchmarkSpec(
        "otl", eval_otl, ("R_b1", "R_b2", "R_f", "R_c1", "R_c2", "beta"), quant,
        tuple(OTL_RANGES[q] for q in quant), ("R_f", "beta"),
        (OTL_RF_LEVELS, OTL_BETA_LEVELS), (False, False))


def piston() -> BenchmarkSpec:
    quant = ("M", "S", "V0", "Ta", "T0")
    return BenchmarkSpec(
        "piston", eval_piston, ("M", "S", "V0", "k", "P0", "Ta", "T0"), quant,
        tuple(PISTON_RANGES[q] for q in quant), ("P0", "k"),
        (PISTON_P0_LEVELS, PISTON_K_LEVELS), (False, False))


def get_spec(name: str, **kw) -> BenchmarkSpec:
    name = name.lower()
    makers = {"beam": beam, "borehole": borehole, "otl": otl, "piston": piston}
    if name not in makers:
        raise RangeError(f"unknown benchmark {name!r}; choose from {sorted(makers)}")
    return makers[name](**kw)
