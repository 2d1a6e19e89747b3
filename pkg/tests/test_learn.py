import numpy as np
import pytest

from adaptive_sensing.core import SpecError
from adaptive_sensing.learn import q_learning, q_update, toy_mdp_fixture, value_iteration

GAMMA = 0.9


def test_q_update_terminal_overwrite():
    t = np.array([[3.0, -2.0], [5.0, 5.0]])
    q_update(t, 0, 1, 0.7, 1, True, 1.0, 0.9)
    assert t[0, 1] == pytest.approx(0.7, abs=1e-15)


def test_q_update_fixed_point():
    t = np.zeros((3, 2))
    q_update(t, 1, 0, 0.0, 2, False, 0.5, 0.9)
    assert not t.any()


def test_q_update_hand_arithmetic():
    t = np.array([[1.0, 0.0], [2.0, 0.5]])
    q_update(t, 0, 0, 1.0, 1, False, 0.5, 0.9)
    assert t[0, 0] == pytest.approx(1.9)


def test_q_update_index_errors():
    with pytest.raises(SpecError):
        q_update(np.zeros((2, 2)), 2, 0, 0, 0, False, 0.1, 0.9)
    with pytest.raises(SpecError):
        q_update(np.zeros((2, 2)), 0, 2, 0, 0, False, 0.1, 0.9)


def test_single_absorbing_state_has_zero_value():
    res = value_iteration(np.ones((1, 1, 1)), np.zeros(1), 0.9)
    assert res.values[0] == 0.0


def test_two_state_chain_hand_solution():
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    res = value_iteration(P, np.array([0.0, 1.0]), 0.5)
    np.testing.assert_allclose(res.values, [0.5, 1.0])


def test_non_stochastic_rows_rejected():
    P = np.full((2, 1, 2), 0.6)
    with pytest.raises(SpecError):
        value_iteration(P, np.zeros(2), 0.5)


def test_fixture_is_row_stochastic():
    P = toy_mdp_fixture().transitions
    np.testing.assert_allclose(P.sum(axis=2), 1.0, atol=1e-12)
    assert np.all(P >= 0)


def test_fixture_values_and_fast_convergence():
    mdp = toy_mdp_fixture()
    res = value_iteration(mdp.transitions, mdp.rewards, GAMMA, tolerance=1e-8)
    assert res.iterations < 200
    np.testing.assert_allclose(res.values, [0.79760508, 0.89089223, 1.0], atol=1e-7)
    np.testing.assert_array_equal(res.policy[:2], [0, 0])


def test_deltas_non_increasing():
    mdp = toy_mdp_fixture()
    d = value_iteration(mdp.transitions, mdp.rewards, GAMMA, tolerance=1e-12).deltas
    assert all(b <= a + 1e-15 for a, b in zip(d[1:], d[2:]))


def test_fixture_q_matches_monte_carlo():
    mdp = toy_mdp_fixture()
    res = value_iteration(mdp.transitions, mdp.rewards, GAMMA)
    rng = np.random.default_rng(0)
    n = 1_000_000
    cdf = np.cumsum(mdp.transitions, axis=2)
    for first in (0, 1):
        s = np.zeros(n, dtype=int)
        a = np.full(n, first)
        ret, disc = np.zeros(n), np.ones(n)
        alive = np.ones(n, dtype=bool)
        for _ in range(200):
            u = rng.random(n)
            s2 = (u[:, None] > cdf[s, a]).sum(axis=1)
            ret += np.where(alive, disc * mdp.rewards[s2], 0.0)
            disc *= GAMMA
            alive &= ~mdp.terminal[s2]
            s, a = s2, res.policy[s2]
            if not alive.any():
                break
        assert ret.mean() == pytest.approx(res.q[0, first], abs=3e-3)


def test_q_learning_matches_oracle_ten_seeds():
    mdp = toy_mdp_fixture()
    oracle = value_iteration(mdp.transitions, mdp.rewards, GAMMA)
    live = ~mdp.terminal
    for seed in range(10):
        res = q_learning(mdp, 5000, GAMMA, epsilon=0.1, inverse_visits=True, seed=seed)
        np.testing.assert_array_equal(res.policy[live], oracle.policy[live])
        assert np.abs(res.q - oracle.q)[live].max() < 0.05


def test_q_learning_is_seed_deterministic():
    mdp = toy_mdp_fixture()
    a = q_learning(mdp, 200, GAMMA, seed=4)
    b = q_learning(mdp, 200, GAMMA, seed=4)
    np.testing.assert_array_equal(a.q, b.q)
