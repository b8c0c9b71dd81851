import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qqgp.core import (
    Dataset,
    DegenerateTruth,
    DimensionMismatch,
    LevelOutOfRange,
    MixedInput,
    ModelConfig,
)
from qqgp.fit import fit_model, model_at
from qqgp.predict import predict, predict_point, rrmse

from helpers import random_dataset, random_model


def _quant_model(U, y, phi):
    U = np.asarray(U, float).reshape(len(y), -1)
    d = Dataset(U, np.zeros((len(y), 0), int), y, ())
    return model_at(d, ModelConfig(latent_dims=()), phi, ())


def test_two_point_hand_computation():
    m = _quant_model([[0.0], [1.0]], [0.0, 2.0], [1e4])
    assert m.params.mu == pytest.approx(1.0) and m.params.sigma2 == pytest.approx(1.0)
    u = math.sqrt(math.log(2.0) / 1e4)  # correlation 0.5 with the first point, 0 with the second
    p = predict_point(m, MixedInput((u,), ()))
    assert p.mean == pytest.approx(0.5, rel=1e-12)
    assert p.sd ** 2 == pytest.approx(1.0 - 0.25 + 0.25 / 2.0, rel=1e-12)


def test_far_point_limit():
    rng = np.random.default_rng(0)
    m = random_model(rng, n=15)
    d = m.train
    far = np.full((1, d.I), 1e3)
    mean, sd = predict(m, far, d.V[:1])
    L = m.chol
    s1 = np.linalg.solve(L, np.ones(d.n))
    assert mean[0] == pytest.approx(m.params.mu, rel=1e-12)
    assert sd[0] ** 2 == pytest.approx(m.params.sigma2 * (1 + 1 / (s1 @ s1)), rel=1e-10)


def _fitted_small(seed=0, kernel="gaussian", latent=2):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, 16, 2, (3, 2))
    cfg = ModelConfig.from_method(kernel, latent, "multiplicative", d.level_counts, restarts=2)
    return fit_model(d, cfg, seed=seed)


@pytest.mark.parametrize("kernel,latent", [("gaussian", 2), ("exponential", 1), ("linear", 2),
                                           ("linear", "ord")])
def test_interpolates_training_points(kernel, latent):
    m = _fitted_small(1, kernel, latent)
    d = m.train
    mean, sd = predict(m, d.U, d.V)
    if m.delta == 0.0:
        np.testing.assert_allclose(mean, d.y, rtol=1e-6, atol=1e-6 * np.ptp(d.y))
        assert np.all(sd <= 1e-4 * np.ptp(d.y))
        assert np.all(sd ** 2 <= 1e-8 * m.params.sigma2)
    else:
        # with a nugget the training point still gets the nugget-inclusive correlation
        assert np.all(np.abs(mean - d.y) <= 10 * math.sqrt(m.delta) * np.ptp(d.y) + 1e-9)


def test_batch_and_point_predictions_agree():
    m = _fitted_small(2)
    rng = np.random.default_rng(3)
    U = rng.random((6, 2))
    V = np.column_stack([rng.integers(1, 4, 6), rng.integers(1, 3, 6)])
    mean, sd = predict(m, U, V)
    for i in range(6):
        p = predict_point(m, MixedInput(U[i], V[i]))
        assert p.mean == pytest.approx(mean[i], rel=1e-13, abs=1e-15)
        assert p.sd == pytest.approx(sd[i], rel=1e-10, abs=1e-15)


def test_prediction_sd_nonnegative_and_finite():
    rng = np.random.default_rng(4)
    for _ in range(10):
        m = random_model(rng)
        U = rng.random((20, 2))
        V = np.column_stack([rng.integers(1, a + 1, 20) for a in m.train.level_counts])
        mean, sd = predict(m, U, V)
        assert np.all(np.isfinite(mean)) and np.all(np.isfinite(sd)) and np.all(sd >= 0)


def test_nugget_only_on_exact_match():
    rng = np.random.default_rng(5)
    d = random_dataset(rng, 12, 1, (2,))
    U = np.vstack([d.U, d.U[:1] + 1e-9])
    V = np.vstack([d.V, d.V[:1]])
    y = np.append(d.y, d.y[0] + 1e-3)
    d2 = Dataset(U, V, y, (2,), (True,))
    cfg = ModelConfig.from_method("gaussian", "ord", "multiplicative", (2,))
    from qqgp.core import FactorKind, QualFactorParams
    m = model_at(d2, cfg, [1.0], [QualFactorParams(FactorKind.ISO_ORDINAL, 2, 1, [0.5])])
    assert m.delta > 0
    exact = predict(m, d2.U[:1], d2.V[:1])[0][0]
    near = predict(m, d2.U[:1] + 1e-12, d2.V[:1])[0][0]
    r = np.exp(-1.0 * (d2.U[:, 0] - d2.U[0, 0]) ** 2) * np.where(d2.V[:, 0] == d2.V[0, 0], 1.0,
                                                                 math.exp(-0.25))
    r_nug = r.copy()
    r_nug[0] += m.delta
    assert exact == pytest.approx(m.params.mu + r_nug @ m.alpha, rel=1e-10)
    assert near != exact


def test_dimension_mismatch():
    m = _fitted_small(0)
    with pytest.raises(DimensionMismatch):
        predict(m, np.zeros((2, 3)), np.ones((2, 2), int))
    with pytest.raises(DimensionMismatch):
        predict_point(m, MixedInput((0.1, 0.2), (1,)))


def test_level_out_of_range():
    m = _fitted_small(0)
    with pytest.raises(LevelOutOfRange):
        predict(m, np.zeros((1, 2)), np.array([[4, 1]]))


def test_empty_query():
    m = _fitted_small(0)
    mean, sd = predict(m, np.zeros((0, 2)), np.zeros((0, 2), int))
    assert mean.shape == (0,) and sd.shape == (0,)


def test_rrmse_examples():
    t = np.array([0.0, 2.0, 5.0])
    assert rrmse(t, t) == 0.0
    assert rrmse(t, np.full(3, t.mean())) == pytest.approx(1.0)
    assert rrmse([0.0, 2.0], [1.0, 1.0]) == pytest.approx(1.0)


def test_rrmse_degenerate_truth():
    with pytest.raises(DegenerateTruth):
        rrmse([1.0, 1.0], [0.0, 2.0])


@given(seed=st.integers(0, 2 ** 32 - 1), a=st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3),
       b=st.floats(-100, 100))
def test_rrmse_affine_invariant(seed, a, b):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(20)
    p = t + 0.3 * rng.standard_normal(20)
    assert rrmse(a * t + b, a * p + b) == pytest.approx(rrmse(t, p), rel=1e-8)


def test_prediction_continuous_in_quantitative_inputs():
    m = _fitted_small(6)
    u = np.array([[0.37, 0.61]])
    v = np.array([[2, 1]])
    base = predict(m, u, v)[0][0]
    slope = abs(predict(m, u + 1e-3, v)[0][0] - base) / 1e-3
    small = abs(predict(m, u + 1e-6, v)[0][0] - base)
    assert small <= 10 * slope * 1e-6 + 1e-12
