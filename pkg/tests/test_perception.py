import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptive_sensing.core import Observation, SensorOption, SpecError
from adaptive_sensing.perception import (
    PerceptionModel,
    compose_affine,
    load_model,
    loss_and_grad,
    predict,
    quality_grip,
    quality_max_confidence,
    quality_visual_alignment,
    save_model,
    softmax,
    train_perception,
)


def _model_with_bias(bias):
    bias = np.asarray(bias, float)
    return PerceptionModel(np.zeros((bias.size, 1)), bias)


def test_zero_model_is_uniform():
    p = predict(PerceptionModel.zeros(4, 3), np.ones(3))
    np.testing.assert_allclose(p, 0.25)


@pytest.mark.parametrize("z", [-1e3, 0.0, 7.5, 1e3])
def test_equal_logits_split_evenly(z):
    np.testing.assert_allclose(predict(_model_with_bias([z, z]), [0.0]), [0.5, 0.5])


def test_three_class_hand_softmax():
    e = np.e
    p = predict(_model_with_bias([1, 0, 0]), [0.0])
    np.testing.assert_allclose(p, [e / (e + 2), 1 / (e + 2), 1 / (e + 2)], atol=1e-12)
    np.testing.assert_allclose(p, [0.5761, 0.2119, 0.2119], atol=1e-3)
    assert quality_max_confidence(_model_with_bias([1, 0, 0]), [0.0]).value == pytest.approx(0.5761, abs=1e-3)


def test_max_confidence_bounds():
    assert quality_max_confidence(PerceptionModel.zeros(3, 2), [1, 2]).value == pytest.approx(1 / 3)
    assert quality_max_confidence(_model_with_bias([100, 0, 0]), [0.0]).value == pytest.approx(1.0, abs=1e-6)


def test_dimension_mismatch():
    with pytest.raises(SpecError):
        predict(PerceptionModel.zeros(2, 3), np.ones(4))


def test_predict_fuzz_1e4(rng):
    for _ in range(100):
        C, d = int(rng.integers(2, 8)), int(rng.integers(1, 12))
        model = PerceptionModel(rng.normal(0, 10, (C, d)), rng.normal(0, 10, C))
        for x in rng.normal(0, 50, (100, d)):
            p = predict(model, x)
            assert np.all(p >= 0) and abs(p.sum() - 1.0) <= 1e-9
            q = quality_max_confidence(model, x).value
            assert 1.0 / C - 1e-12 <= q <= 1.0


@given(arrays(np.float64, st.integers(2, 10), elements=st.floats(-1e4, 1e4)))
def test_softmax_is_distribution(z):
    p = softmax(z)
    assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-9
    assert p.max() >= 1.0 / z.size - 1e-12


def _numeric_grad(W, b, X, y, h=1e-6):
    gW, gb = np.zeros_like(W), np.zeros_like(b)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        gW[idx] = (loss_and_grad(Wp, b, X, y)[0] - loss_and_grad(Wm, b, X, y)[0]) / (2 * h)
    for i in range(b.size):
        bp, bm = b.copy(), b.copy()
        bp[i] += h
        bm[i] -= h
        gb[i] = (loss_and_grad(W, bp, X, y)[0] - loss_and_grad(W, bm, X, y)[0]) / (2 * h)
    return gW, gb


def _relative_error(a, n):
    return np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)


def test_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(100):
        C, d, n = int(rng.integers(2, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 8))
        W, b = rng.normal(0, 1, (C, d)), rng.normal(0, 1, C)
        X, y = rng.normal(0, 1, (n, d)), rng.integers(0, C, n)
        _, gW, gb = loss_and_grad(W, b, X, y)
        nW, nb = _numeric_grad(W, b, X, y)
        worst = max(worst, _relative_error(np.concatenate([gW.ravel(), gb]),
                                           np.concatenate([nW.ravel(), nb])))
    assert worst < 1e-5


def test_separable_clusters_fit_perfectly(rng):
    X = np.vstack([rng.normal(-2, 0.3, (40, 2)), rng.normal(2, 0.3, (40, 2))])
    y = np.repeat([0, 1], 40)
    model = train_perception(list(zip(X, y)), 2, epochs=200, learning_rate=0.5, seed=3)
    assert np.mean(np.argmax(X @ model.weights.T + model.bias, axis=1) == y) == 1.0


def test_single_class_predicts_that_class():
    data = [(np.array([v, 1.0 - v]), 1) for v in np.linspace(0, 1, 10)]
    model = train_perception(data, 2, epochs=50, seed=0)
    for x, _ in data:
        assert int(np.argmax(predict(model, x))) == 1


def test_training_is_deterministic(rng):
    data = [(x, int(x[0] > 0)) for x in rng.normal(0, 1, (30, 3))]
    a = train_perception(data, 2, epochs=30, seed=5)
    b = train_perception(data, 2, epochs=30, seed=5)
    assert a == b


def test_training_at_least_majority(rng):
    # labels unrelated to features: the fit must not fall below the majority rate
    X = rng.normal(0, 1, (50, 2))
    y = np.array([0] * 35 + [1] * 15)
    model = train_perception(list(zip(X, y)), 2, epochs=5, learning_rate=50.0, seed=0)
    acc = np.mean(np.argmax(X @ model.weights.T + model.bias, axis=1) == y)
    assert acc >= 0.7


def test_empty_dataset_rejected():
    with pytest.raises(SpecError):
        train_perception([], 2)


def test_model_save_load_round_trip(tmp_path, rng):
    model = PerceptionModel(rng.normal(0, 1, (3, 5)), rng.normal(0, 1, 3))
    save_model(model, tmp_path / "m.txt")
    assert load_model(tmp_path / "m.txt") == model


def test_compose_affine(rng):
    model = PerceptionModel(rng.normal(0, 1, (3, 4)), rng.normal(0, 1, 3))
    y = rng.uniform(0, 1, 4)
    composed = compose_affine(model, 2.5, -0.3)
    np.testing.assert_allclose(predict(composed, y), predict(model, 2.5 * y - 0.3))


def _tactile(values, flags, threshold=0.1):
    opt = SensorOption((0.0, 1.0, threshold))
    return Observation((values,), (flags,), opt, ("tactile",)), opt


def test_grip_quality_examples():
    obs, opt = _tactile([1.0, 1.0], [True, True])
    assert quality_grip(obs, None, opt).value == 0.0
    obs, opt = _tactile([0.5, 0.6], [False, False])
    assert quality_grip(obs, None, opt).value == 1.0
    obs, opt = _tactile([1.0, 0.05, 0.5, 0.7], [True, False, False, False])
    assert quality_grip(obs, 0, opt).value == 0.5


def test_grip_quality_needs_tactile():
    obs = Observation(([0.5],), ([False],), SensorOption((0.0,)), ("visual",))
    with pytest.raises(SpecError):
        quality_grip(obs, None, SensorOption((0.0, 1.0, 0.1)))


def _visual(values, flags):
    opt = SensorOption((0.0, 1.0))
    return Observation((values,), (flags,), opt, ("visual",)), opt


def test_visual_alignment_examples():
    obs, opt = _visual([0.2, 0.4], [False, False])
    assert quality_visual_alignment(obs, None, opt, opt, PerceptionModel.zeros(4, 2)).value == pytest.approx(0.25)
    obs, opt = _visual([1.0, 1.0], [True, True])
    assert quality_visual_alignment(obs, None, opt, opt, PerceptionModel.zeros(4, 2)).value == 0.0
    # max confidence 0.8 with half the elements clipped
    model = PerceptionModel(np.zeros((2, 2)), np.array([np.log(4.0), 0.0]))
    obs, opt = _visual([1.0, 0.3], [True, False])
    assert quality_visual_alignment(obs, None, opt, opt, model).value == pytest.approx(0.4)


@given(arrays(np.float64, 6, elements=st.floats(0, 1)), arrays(np.bool_, 6),
       st.floats(0, 1), st.integers(0, 2**32))
def test_quality_metrics_in_unit_interval(values, flags, threshold, seed):
    rng = np.random.default_rng(seed)
    obs, opt = _tactile(values, flags, threshold)
    assert 0.0 <= quality_grip(obs, None, opt).value <= 1.0
    vobs, vopt = _visual(values, flags)
    model = PerceptionModel(rng.normal(0, 5, (3, 6)), rng.normal(0, 5, 3))
    assert 0.0 <= quality_visual_alignment(vobs, None, vopt, vopt, model).value <= 1.0


def test_oversized_step_is_capped(rng):
    X = rng.uniform(0, 1, (200, 16))
    y = (X[:, 0] + rng.normal(0, 0.3, 200) > 0.5).astype(int)
    data = list(zip(X, y))
    capped = train_perception(data, 2, epochs=300, learning_rate=1e3, seed=0)
    safe = train_perception(data, 2, epochs=300, seed=0)
    assert capped == safe


def test_training_is_insensitive_to_rounding_noise(rng):
    X = rng.uniform(0, 1, (300, 8))
    y = rng.integers(0, 3, 300)
    a = train_perception(list(zip(X, y)), 3, epochs=400, seed=1)
    b = train_perception(list(zip(X * (1 + 1e-13), y)), 3, epochs=400, seed=1)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-8)
