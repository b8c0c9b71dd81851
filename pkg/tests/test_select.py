import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qqgp.core import (
    Dataset,
    EmptyCandidates,
    FactorKind,
    MixedInput,
    ModelConfig,
    QualFactorParams,
    iso_nominal_free_mask,
    param_count,
)
from qqgp.fit import model_at
from qqgp.kernels import embed
from qqgp.predict import predict, predict_point
from qqgp.select import (
    Loss,
    bic,
    bic_average,
    bic_average_batch,
    bic_select,
    bic_weights,
    combine_predictions,
    loocv_moments,
    loocv_score,
    loocv_select,
    score_models,
)

from helpers import explicit_loo, random_model

LOG2PI = math.log(2 * math.pi)


def _identity_model():
    # far apart inputs with a huge scale give R = I, mean 0 and variance 1
    d = Dataset([[0.0], [1.0]], np.zeros((2, 0), int), [1.0, -1.0], ())
    return model_at(d, ModelConfig(latent_dims=()), [1e4], ())


def test_loocv_identity_l2():
    m = _identity_model()
    assert m.params.mu == pytest.approx(0.0, abs=1e-15)
    assert m.params.sigma2 == pytest.approx(1.0)
    assert loocv_score(m, Loss.L2) == pytest.approx(1.0, rel=1e-14)


def test_loocv_identity_loglik():
    assert loocv_score(_identity_model(), "loglik") == pytest.approx(0.5 * LOG2PI + 0.5, rel=1e-14)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_loocv_closed_form_matches_deletion(seed):
    m = random_model(np.random.default_rng(seed))
    mu, s2 = loocv_moments(m)
    m_ref, v_ref = explicit_loo(m)
    scale = max(1.0, float(np.abs(m.train.y).max()))
    np.testing.assert_allclose(mu, m_ref, rtol=0, atol=1e-8 * scale)
    np.testing.assert_allclose(s2, v_ref, rtol=1e-6, atol=1e-10 * m.params.sigma2)


def test_loocv_closed_form_n20():
    rng = np.random.default_rng(20)
    m = random_model(rng, n=20)
    np.testing.assert_allclose(loocv_moments(m)[0], explicit_loo(m)[0], rtol=0, atol=1e-8)


def test_literal_mode_is_uncentred_and_unscaled():
    m = random_model(np.random.default_rng(3), n=12)
    A = m.chol @ m.chol.T
    M = np.linalg.inv(A)
    y = m.train.y
    mu, s2 = loocv_moments(m, literal=True)
    np.testing.assert_allclose(mu, y - (M @ y) / np.diag(M), rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(s2, 1.0 / np.diag(M), rtol=1e-8)


def test_bic_hand_value():
    rng = np.random.default_rng(0)
    cfg = ModelConfig.from_method("gaussian", 3, "multiplicative", (4,))
    m = random_model(rng, n=20, level_counts=(4,), config=cfg)
    p = param_count(cfg, (4,), 2)
    assert p == 10
    const = 2 * m.neg_loglik + 20 * (1 + LOG2PI)
    assert bic(m) - const == pytest.approx(10 * math.log(20), rel=1e-12)
    assert 10 * math.log(20) == pytest.approx(29.957, abs=1e-3)


def test_bic_gap_between_latent_dimensions():
    rng = np.random.default_rng(1)
    c1 = ModelConfig.from_method("gaussian", 1, "multiplicative", (4,))
    c2 = ModelConfig.from_method("gaussian", 2, "multiplicative", (4,))
    m1 = random_model(rng, n=15, level_counts=(4,), config=c1)
    # the 1-D embedding padded with a zero column fits identically
    Z = np.column_stack([embed(m1.params.qual[0]), np.zeros(4)])
    q2 = QualFactorParams(FactorKind.ISO_NOMINAL, 4, 2, Z[iso_nominal_free_mask(4, 2)])
    m2 = model_at(m1.train, c2, m1.params.phi, [q2])
    assert m2.neg_loglik == pytest.approx(m1.neg_loglik, rel=1e-10)
    assert param_count(c2, (4,), 2) - param_count(c1, (4,), 2) == 2
    assert bic(m2) - bic(m1) == pytest.approx(2 * math.log(15), rel=1e-9)


def test_bic_penalty_doubling_identity():
    for p in (3, 7, 12):
        assert p * math.log(2 * 30) - p * math.log(30) == pytest.approx(p * math.log(2), rel=1e-14)


def test_bic_select_examples():
    assert bic_select([3.0, 1.0, 2.0]) == 1
    assert bic_select([5.0, 5.0, 5.0]) == 0
    with pytest.raises(EmptyCandidates):
        bic_select([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=10), st.floats(-1e6, 1e6))
def test_bic_select_shift_invariant(bics, c):
    b = np.array(bics)
    shifted = b + c
    # a shift can merge values that differ by less than the rounding of c
    if len(set(shifted.tolist())) == len(set(bics)):
        assert bic_select(shifted) == bic_select(b)


@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=12))
def test_bic_weights_sum_to_one(bics):
    w = bic_weights(bics)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.all(w >= 0) and w[int(np.argmin(bics))] == w.max()


def test_bic_weights_dominance():
    w = bic_weights([0.0, 100.0, 120.0])
    np.testing.assert_allclose(w, [1.0, 0.0, 0.0], rtol=0, atol=1e-20)


def test_bic_weights_underflow_safe():
    w = bic_weights([1e5, 1e5 + 2])
    assert np.all(np.isfinite(w))
    assert w[0] / w[1] == pytest.approx(math.e, rel=1e-12)


def test_combine_example():
    mean, sd = combine_predictions([0.5, 0.5], [0.0, 2.0], [1.0, 1.0])
    assert mean == pytest.approx(1.0) and sd == pytest.approx(math.sqrt(2.0))


@given(seed=st.integers(0, 2 ** 32 - 1), k=st.integers(1, 6))
def test_combined_mean_within_model_means(seed, k):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(k))
    means = rng.standard_normal(k)
    sds = rng.random(k)
    mean, sd = combine_predictions(w, means, sds)
    assert means.min() - 1e-12 <= mean <= means.max() + 1e-12
    assert sd >= np.dot(w, sds) - 1e-12


def _fitted_candidates(seed=0, k=3):
    rng = np.random.default_rng(seed)
    base = random_model(rng, n=14, level_counts=(3,))
    out = [base]
    for _ in range(k - 1):
        cfg = ModelConfig.from_method("gaussian", int(rng.integers(1, 3)), "multiplicative", (3,))
        out.append(random_model(np.random.default_rng(int(rng.integers(1 << 30))), n=14,
                                level_counts=(3,), config=cfg))
    # all candidates must share the training data
    return [model_at(base.train, m.config, m.params.phi, m.params.qual, m.params.psi)
            for m in out]


def test_single_model_average_is_its_prediction():
    m = _fitted_candidates(0, 1)[0]
    x = MixedInput((0.3, 0.7), (2,))
    p = bic_average([m], x)
    q = predict_point(m, x)
    assert p.mean == pytest.approx(q.mean, rel=1e-14) and p.sd == pytest.approx(q.sd, rel=1e-14)


def test_average_batch_matches_pointwise():
    models = _fitted_candidates(1, 3)
    rng = np.random.default_rng(2)
    U = rng.random((5, 2))
    V = rng.integers(1, 4, (5, 1))
    mean, sd = bic_average_batch(models, U, V)
    for i in range(5):
        p = bic_average(models, MixedInput(U[i], V[i]))
        assert p.mean == pytest.approx(mean[i], rel=1e-12, abs=1e-14)
        assert p.sd == pytest.approx(sd[i], rel=1e-12, abs=1e-14)
    means = np.array([predict(m, U, V)[0] for m in models])
    assert np.all(mean >= means.min(axis=0) - 1e-12) and np.all(mean <= means.max(axis=0) + 1e-12)


def test_average_empty():
    with pytest.raises(EmptyCandidates):
        bic_average([], MixedInput((0.1,), ()))


def test_loocv_select_examples():
    assert loocv_select([], scores=[0.5, 0.2, 0.9]) == 1
    assert loocv_select([], scores=[0.5, 0.2, 0.9, 0.2]) == 1
    with pytest.raises(EmptyCandidates):
        loocv_select([])


def test_loocv_select_with_duplicate_winner():
    models = _fitted_candidates(3, 3)
    k = loocv_select(models, Loss.L2)
    assert loocv_select(models + [models[k]], Loss.L2) == k


def test_score_models_weights_sum_to_one():
    scores = score_models(_fitted_candidates(4, 3))
    assert abs(sum(s.avg_weight for s in scores) - 1.0) <= 1e-12
    for s in scores:
        assert np.isfinite(s.bic) and s.loocv_l2 >= 0 and np.isfinite(s.loocv_loglik)
