import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qqgp.core import (
    Dataset,
    DegenerateResponse,
    DimensionMismatch,
    FactorKind,
    FullParams,
    InvalidConfig,
    LevelOutOfRange,
    MixedInput,
    ModelConfig,
    QualFactorParams,
    QualKernel,
    Structure,
    ConstraintViolation,
    factor_param_count,
    iso_nominal_free_mask,
    lin_nominal_free_mask,
    n_free,
    param_count,
    validate_dataset,
)

from helpers import random_factor


def _dataset(V, y, counts=(2,)):
    V = np.asarray(V).reshape(len(y), -1)
    return Dataset(np.linspace(0, 1, len(y)).reshape(-1, 1), V, y, counts)


def test_validate_dataset_accepts_well_formed():
    validate_dataset(_dataset([1, 2, 1, 2], [0.1, 0.4, 0.3, 0.9]))


def test_validate_dataset_level_out_of_range():
    with pytest.raises(LevelOutOfRange):
        validate_dataset(_dataset([1, 3, 1, 2], [0.1, 0.4, 0.3, 0.9]))


def test_validate_dataset_zero_level_rejected():
    with pytest.raises(LevelOutOfRange):
        validate_dataset(_dataset([0, 1, 1, 2], [0.1, 0.4, 0.3, 0.9]))


def test_validate_dataset_constant_response():
    with pytest.raises(DegenerateResponse):
        validate_dataset(_dataset([1, 2, 1, 2], [5, 5, 5, 5]))


def test_validate_dataset_needs_two_points():
    with pytest.raises(DimensionMismatch):
        validate_dataset(_dataset([1], [1.0]))


def test_validate_dataset_counts_must_match_columns():
    with pytest.raises(DimensionMismatch):
        validate_dataset(_dataset([1, 2, 1, 2], [0.1, 0.4, 0.3, 0.9], counts=(2, 2)))


def test_validate_dataset_single_level_factor_rejected():
    with pytest.raises(InvalidConfig):
        validate_dataset(_dataset([1, 1, 1, 1], [0.1, 0.4, 0.3, 0.9], counts=(1,)))


def test_non_integer_levels_rejected():
    with pytest.raises(Exception):
        Dataset(np.zeros((2, 1)), np.array([[1.5], [2.0]]), [0.0, 1.0], (2,))


def test_dataset_arrays_are_read_only():
    d = _dataset([1, 2, 1, 2], [0.1, 0.4, 0.3, 0.9])
    with pytest.raises(ValueError):
        d.y[0] = 3.0


def test_dataset_from_inputs_round_trip():
    xs = [MixedInput((0.1, 0.2), (1,)), MixedInput((0.3, 0.4), (2,))]
    d = Dataset.from_inputs(xs, [1.0, 2.0], (2,))
    assert d.inputs == xs
    assert d.n == 2 and d.I == 2 and d.J == 1


def test_dataset_from_inputs_inconsistent():
    xs = [MixedInput((0.1,), (1,)), MixedInput((0.3, 0.4), (2,))]
    with pytest.raises(DimensionMismatch):
        Dataset.from_inputs(xs, [1.0, 2.0], (2,))


def test_param_count_iso_nominal_table_value():
    assert factor_param_count(FactorKind.ISO_NOMINAL, 6, 2) == 9


def test_param_count_lin_nominal_table_value():
    assert factor_param_count(FactorKind.LIN_NOMINAL, 6, 2) == 5


def test_param_count_two_ordinal_factors():
    cfg = ModelConfig(Structure.MULTIPLICATIVE, QualKernel.GAUSSIAN, (1, 1), (True, True))
    assert param_count(cfg, (4, 6), 4) == 14


def test_param_count_additive_adds_weights():
    cfg = ModelConfig(Structure.ADDITIVE, QualKernel.GAUSSIAN, (1, 1), (True, True))
    assert param_count(cfg, (4, 6), 4) == 15


@given(kind=st.sampled_from(list(FactorKind)), a=st.integers(2, 9), l=st.integers(1, 9))
def test_param_count_monotone(kind, a, l):
    if kind is FactorKind.LIN_ORDINAL or kind is FactorKind.ISO_ORDINAL:
        assert factor_param_count(kind, a + 1, l) >= factor_param_count(kind, a, l)
        return
    l = min(l, a)
    if kind is FactorKind.LIN_NOMINAL and l < 2:
        l = 2
    p = factor_param_count(kind, a, l)
    assert factor_param_count(kind, a + 1, l) >= p
    if l + 1 <= a:
        assert factor_param_count(kind, a, l + 1) >= p


@given(a=st.integers(2, 9), l=st.integers(1, 9))
def test_iso_nominal_free_count_matches_table(a, l):
    l = min(l, a)
    assert n_free(FactorKind.ISO_NOMINAL, a, l) == factor_param_count(FactorKind.ISO_NOMINAL, a, l)
    assert iso_nominal_free_mask(a, l).sum() == (2 * a - l - 1) * l // 2


@given(a=st.integers(2, 9), l=st.integers(2, 9))
def test_lin_nominal_free_angles_pinned_above_diagonal(a, l):
    l = min(l, a)
    mask = lin_nominal_free_mask(a, l)
    for v in range(1, a + 1):
        assert mask[v - 1].sum() == min(v - 1, l - 1)


def test_config_rejects_linear_nominal_dim_one():
    cfg = ModelConfig(Structure.MULTIPLICATIVE, QualKernel.LINEAR, (1,), (False,))
    with pytest.raises(InvalidConfig):
        cfg.validate((3,))


def test_config_ordinal_forces_latent_dim():
    with pytest.raises(InvalidConfig):
        ModelConfig(Structure.MULTIPLICATIVE, QualKernel.GAUSSIAN, (2,), (True,)).validate((3,))
    with pytest.raises(InvalidConfig):
        ModelConfig(Structure.MULTIPLICATIVE, QualKernel.LINEAR, (1,), (True,)).validate((3,))


def test_config_latent_dim_above_levels():
    with pytest.raises(InvalidConfig):
        ModelConfig(latent_dims=(4,)).validate((3,))


def test_config_ordinal_needs_ordinal_data():
    cfg = ModelConfig(latent_dims=(1,), ordinal_mode=(True,))
    with pytest.raises(InvalidConfig):
        cfg.validate((3,), (False,))


def test_from_method_names():
    counts = (4, 6)
    assert ModelConfig.from_method("gaussian", "ord", "multiplicative", counts).method_name \
        == "Gau_ord_multi"
    assert ModelConfig.from_method("exponential", 1, "additive", counts).method_name \
        == "Exp_1_add"
    cfg = ModelConfig.from_method("linear", 3, "multiplicative", (2, 6))
    assert cfg.latent_dims == (2, 3)


def test_config_dict_round_trip():
    cfg = ModelConfig.from_method("linear", "ord", "additive", (3, 4), restarts=4)
    assert ModelConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_config_from_dict_missing_key():
    with pytest.raises(InvalidConfig):
        ModelConfig.from_dict({"structure": "additive"})


def test_qual_params_wrong_length():
    with pytest.raises(DimensionMismatch):
        QualFactorParams(FactorKind.ISO_ORDINAL, 4, 1, [0.1, 0.2])


def test_lin_ordinal_sum_constraint():
    with pytest.raises(ConstraintViolation):
        QualFactorParams(FactorKind.LIN_ORDINAL, 3, 2, [2.0, 2.0]).check()


def test_negative_increment_rejected():
    with pytest.raises(ConstraintViolation):
        QualFactorParams(FactorKind.ISO_ORDINAL, 3, 1, [0.5, -0.1]).check()


def test_lin_nominal_angle_range():
    # a=3, l=2: row 2 angle in [0, 2pi] because v >= l; row 3 likewise
    QualFactorParams(FactorKind.LIN_NOMINAL, 3, 2, [1.0, 6.0]).check()
    with pytest.raises(ConstraintViolation):
        QualFactorParams(FactorKind.LIN_NOMINAL, 3, 2, [1.0, 6.5]).check()


def test_iso_nominal_negative_subdiagonal_rejected():
    with pytest.raises(ConstraintViolation):
        QualFactorParams(FactorKind.ISO_NOMINAL, 3, 2, [-0.5, 0.1, 0.2]).check()


def test_qual_params_json_uses_symbol_names():
    d = QualFactorParams(FactorKind.LIN_ORDINAL, 3, 2, [0.5, 0.25]).to_dict()
    assert d["delta_theta"] == [0.0, 0.5, 0.25]
    d = QualFactorParams(FactorKind.ISO_ORDINAL, 3, 1, [0.5, 0.25]).to_dict()
    assert d["delta_z"] == [0.0, 0.5, 0.25]
    assert "theta" in QualFactorParams(FactorKind.LIN_NOMINAL, 3, 2, [0.5, 0.25]).to_dict()
    assert "z" in QualFactorParams(FactorKind.ISO_NOMINAL, 3, 2, [0.5, 0.25, 0.1]).to_dict()


@given(seed=st.integers(0, 2 ** 32 - 1), additive=st.booleans())
def test_full_params_serialization_round_trip(seed, additive):
    rng = np.random.default_rng(seed)
    kinds = list(FactorKind)
    qual = []
    for _ in range(int(rng.integers(1, 4))):
        kind = kinds[int(rng.integers(4))]
        a = int(rng.integers(2, 6))
        l = {FactorKind.LIN_ORDINAL: 2, FactorKind.ISO_ORDINAL: 1,
             FactorKind.LIN_NOMINAL: int(rng.integers(2, a + 1))}.get(kind, int(rng.integers(1, a + 1)))
        qual.append(random_factor(kind, a, l, rng))
    psi = rng.dirichlet(np.ones(len(qual))) if additive else None
    p = FullParams(rng.normal(), rng.random() + 0.1, rng.random(3) + 0.01, qual, psi)
    text = json.dumps(p.to_dict())
    q = FullParams.from_dict(json.loads(text))
    assert q == p
    assert json.dumps(q.to_dict()) == text


def test_full_params_rejects_bad_scales():
    with pytest.raises(ConstraintViolation):
        FullParams(0.0, 1.0, [0.0], ())
    with pytest.raises(ConstraintViolation):
        FullParams(0.0, -1.0, [1.0], ())
