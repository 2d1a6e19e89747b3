import numpy as np
import pytest
from hypothesis import given, strategies as st

from adaptive_sensing.core import LearnerConfig, ModalityWeights, OptionSpace, SpecError
from adaptive_sensing.policies import (
    ActionPolicyState,
    SensePolicyState,
    bucket,
    epsilon_greedy,
    load_table,
    multi_sense_policy_step,
    quality_softmax_weights,
    sample_candidates,
    sense_policy_step,
    save_table,
)


def grid(n):
    return OptionSpace.from_axes(("a", 0.0, 1.0, n))


def test_candidate_inclusion_rate():
    space = grid(8)
    hits = np.zeros(8)
    n = 100_000
    for s in range(n):
        for o in sample_candidates(space, 2, s):
            hits[space.index_of(o)] += 1
    np.testing.assert_allclose(hits / n, 0.25, atol=0.01)


@given(st.integers(1, 12), st.data())
def test_candidates_distinct_and_in_space(n, data):
    k = data.draw(st.integers(1, n))
    seed = data.draw(st.integers(0, 2**64 - 1))
    space = grid(n)
    picks = sample_candidates(space, k, seed)
    idx = [space.index_of(o) for o in picks]
    assert len(set(idx)) == k


def test_candidates_reject_bad_k():
    for k in (0, 9):
        with pytest.raises(SpecError):
            sample_candidates(grid(8), k, 0)


def test_full_exploration_is_uniform():
    row = np.array([0.0, 5.0, 1.0, 2.0])
    counts = np.bincount([epsilon_greedy(row, 1.0, s) for s in range(40_000)], minlength=4)
    np.testing.assert_allclose(counts / 40_000, 0.25, atol=0.02 * 0.25 * 4)


def test_half_exploration_greedy_share():
    row = np.array([0.0, 5.0])
    picks = np.array([epsilon_greedy(row, 0.5, s) for s in range(40_000)])
    assert abs(np.mean(picks == 1) - 0.75) < 0.02


def test_ties_break_to_lowest_index():
    assert epsilon_greedy(np.array([1.0, 3.0, 3.0]), 0.0, 7) == 1
    assert epsilon_greedy(np.zeros(5), 0.0, 7) == 0


@pytest.mark.parametrize("q,expected", [(0.0, 0), (0.249, 0), (0.25, 1), (0.999, 3), (1.0, 3)])
def test_bucket_edges(q, expected):
    assert bucket(q, 4) == expected


@given(st.floats(0, 1), st.integers(1, 20))
def test_bucket_in_range(q, n):
    assert 0 <= bucket(q, n) < n


def test_softmax_weights_example():
    w = quality_softmax_weights([1.0, 0.0], 1.0)
    assert w.weights == pytest.approx((0.7310585786, 0.2689414214))


def test_zero_temperature_gives_uniform():
    assert quality_softmax_weights([0.9, 0.1, 0.4], 0.0).weights == pytest.approx((1 / 3,) * 3)


# integer rows and maps keep the transform exact in floating point
@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=6), st.integers(-50, 50),
       st.integers(1, 30))
def test_greedy_choice_invariant_under_monotone_maps(values, shift, scale):
    row = np.array(values, dtype=float)
    assert epsilon_greedy(row, 0.0, 0) == epsilon_greedy(row * scale + shift, 0.0, 0)


def test_pinned_sense_policy_never_moves():
    st_ = SensePolicyState(6, LearnerConfig(epsilon=1.0), pinned=4)
    assert {sense_policy_step(st_, 0.3, 1, s) for s in range(200)} == {4}


def test_sense_step_validates_inputs():
    st_ = SensePolicyState(3)
    with pytest.raises(SpecError):
        sense_policy_step(st_, 1.5, 0, 0)
    with pytest.raises(SpecError):
        sense_policy_step(st_, 0.5, 3, 0)


def test_sense_learning_moves_the_chosen_entry():
    st_ = SensePolicyState(3, LearnerConfig(alpha=0.5, buckets=2))
    st_.learn(0.2, 1, 2, 1.0, 0.9, True)
    assert st_.table[0, 1, 2] == 0.5
    assert np.count_nonzero(st_.table) == 1


def test_action_state_index_is_a_bijection():
    st_ = ActionPolicyState(3, 2, quality_buckets=2)
    seen = {st_.state_index(b, p, q) for b in range(3) for p in (None, 0, 1) for q in (0.1, 0.9)}
    assert seen == set(range(st_.n_states))


def test_multi_step_requires_matching_lengths():
    states = [SensePolicyState(3), SensePolicyState(3)]
    with pytest.raises(SpecError):
        multi_sense_policy_step(states, ModalityWeights.uniform(2), [0.5], [0, 0], 0)


def test_table_roundtrip(tmp_path, rng):
    t = rng.normal(size=(2, 3, 4))
    save_table(t, tmp_path / "t.txt")
    np.testing.assert_array_equal(load_table(tmp_path / "t.txt"), t)


def test_truncated_table_rejected(tmp_path):
    save_table(np.ones((3, 2)), tmp_path / "t.txt")
    lines = (tmp_path / "t.txt").read_text().splitlines()
    (tmp_path / "t.txt").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(SpecError):
        load_table(tmp_path / "t.txt")


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=8), st.integers(1, 9))
def test_single_shot_selection_ignores_monotone_rescaling(scores, power):
    from adaptive_sensing.core import QualityScore
    from adaptive_sensing.policies import select_single_shot

    cands = [(None, i) for i in range(len(scores))]
    raw = lambda _, i: QualityScore(scores[i] / 1000)
    bent = lambda _, i: QualityScore((scores[i] / 1000) ** (1 / power) if scores[i] else 0.0)
    assert select_single_shot(cands, None, raw)[0] == select_single_shot(cands, None, bent)[0]
