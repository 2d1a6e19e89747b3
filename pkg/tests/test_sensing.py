import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptive_sensing.core import AnalogScene, SensorOption, SpecError, weights_project
from adaptive_sensing.sensing import RANGE, CaptureModel, decode_range, measure, measure_multi

GRID = np.arange(256) / 255.0


def _scene(x, name="visual"):
    return AnalogScene({name: x})


def test_half_maps_to_nearest_level():
    obs = measure(_scene([0.5]), SensorOption((0.0, 1.0)), CaptureModel(), seed=0)
    assert obs.part("visual")[0] == 128 / 255
    assert not obs.flags("visual")[0]


def test_overexposure_saturates_and_flags():
    obs = measure(_scene([0.4]), SensorOption((8.0, 1.0)), CaptureModel(), seed=0)
    assert obs.part("visual")[0] == 1.0
    assert obs.flags("visual")[0]


def test_same_seed_same_observation():
    cm = CaptureModel(sigma0=0.05, gain_noise=0.02, blur=3)
    scene = _scene(np.linspace(0, 1, 16))
    opt = SensorOption((0.5, 2.0))
    assert measure(scene, opt, cm, 99) == measure(scene, opt, cm, 99)
    assert measure(scene, opt, cm, 99) != measure(scene, opt, cm, 100)


def test_noise_grows_with_gain():
    cm = CaptureModel(sigma0=0.01, gain_noise=0.02)
    assert cm.noise_sigma(1.0) == 0.01
    assert cm.noise_sigma(3.0) == pytest.approx(0.05)
    assert cm.noise_sigma(0.5) == 0.01


@pytest.mark.parametrize("opt", [SensorOption((0.0, -1.0))])
def test_negative_gain_rejected(opt):
    with pytest.raises(SpecError):
        measure(_scene([0.1]), opt, CaptureModel(), 0)


def test_missing_modality_rejected():
    with pytest.raises(SpecError):
        measure(_scene([0.1], "tactile"), SensorOption((0.0,)), CaptureModel(), 0)


@given(
    arrays(np.float64, st.integers(1, 24), elements=st.floats(-0.5, 3.0)),
    st.floats(-4, 4), st.floats(0.5, 4), st.sampled_from([1, 3, 5]),
    st.floats(0, 0.2), st.integers(0, 2**64 - 1),
)
def test_grid_values_and_flags_by_reconstruction(x, stops, gain, blur, sigma, seed):
    cm = CaptureModel(sigma0=sigma, gain_noise=0.01, blur=blur)
    opt = SensorOption((stops, gain))
    obs = measure(_scene(x), opt, cm, seed)
    q = obs.part("visual")
    assert np.all(np.isin(np.round(q * 255), np.arange(256)))
    np.testing.assert_allclose(q * 255, np.round(q * 255), atol=1e-9)
    pre = cm.pre_quantization(np.asarray(x, float), opt, seed)
    np.testing.assert_array_equal(obs.flags("visual"), (pre < 0) | (pre > 1))


@given(arrays(np.float64, st.integers(1, 16), elements=st.floats(0.0, 2.0)),
       st.lists(st.floats(-4, 4), min_size=2, max_size=6))
def test_monotone_saturation(x, stops):
    prev = None
    for e in sorted(stops):
        q = measure(_scene(x), SensorOption((e, 1.0)), CaptureModel(), 0).part("visual")
        if prev is not None:
            assert np.all(q >= prev)
        prev = q


def test_range_response_round_trip():
    cm = CaptureModel(response=RANGE)
    x = np.array([0.45, 0.5, 0.55, 0.9])
    obs = measure(_scene(x, "state"), SensorOption((0.1,)), cm, 0, modality="state")
    dec = decode_range(obs)
    np.testing.assert_allclose(dec[:3], x[:3] - 0.5, atol=0.2 / 255)
    assert obs.flags("state")[3] and dec[3] == pytest.approx(0.1)


def test_range_must_be_positive():
    with pytest.raises(SpecError):
        CaptureModel(response=RANGE).transfer(SensorOption((0.0,)))


def test_multi_full_weight_on_first():
    scene = AnalogScene({"a": [0.2, 0.4], "b": [0.3, 0.6]})
    opts = [SensorOption((0.0, 1.0))] * 2
    obs = measure_multi(scene, opts, weights_project([1, 0]), [CaptureModel()] * 2, 0)
    np.testing.assert_array_equal(obs.features[2:], 0.0)
    np.testing.assert_array_equal(obs.features[:2], obs.part("a"))


def test_multi_symmetric_halves():
    scene = AnalogScene({"a": [0.2, 0.4], "b": [0.2, 0.4]})
    opts = [SensorOption((0.0, 1.0))] * 2
    obs = measure_multi(scene, opts, weights_project([1, 1]), [CaptureModel()] * 2, 0)
    np.testing.assert_array_equal(obs.features[:2], obs.features[2:])


def test_multi_three_way_scaling():
    scene = AnalogScene({"a": [0.2], "b": [0.2], "c": [0.2]})
    opts = [SensorOption((0.0, 1.0))] * 3
    obs = measure_multi(scene, opts, weights_project([1, 1, 2]), [CaptureModel()] * 3, 0)
    level = obs.part("a")[0]
    np.testing.assert_allclose(obs.features, [0.25 * level, 0.25 * level, 0.5 * level])


def test_multi_count_mismatch():
    scene = AnalogScene({"a": [0.2], "b": [0.2]})
    with pytest.raises(SpecError):
        measure_multi(scene, [SensorOption((0.0,))], weights_project([1, 1]), [CaptureModel()] * 2, 0)
