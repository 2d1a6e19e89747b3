import dataclasses
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adaptive_sensing import envs
from adaptive_sensing.core import LearnerConfig, OptionSpace, QualityScore, SpecError
from adaptive_sensing.loops import (
    brute_force_selection,
    compose_reward,
    n_obs_buckets,
    run_conventional,
    run_multimodal_sparse,
    run_perception_only,
    run_sensorimotor,
    run_single_shot,
)
from adaptive_sensing.policies import ActionPolicyState, SensePolicyState


def test_compose_reward_example():
    r = compose_reward(1.0, [(0.5, QualityScore(1.0))])
    assert r.total == 1.5 and r.recompute() == 1.5


@given(st.floats(-1e6, 1e6), st.lists(st.floats(0, 1), max_size=4))
def test_zero_lambda_keeps_task_bit_exact(task, qs):
    r = compose_reward(task, [(0.0, QualityScore(q)) for q in qs])
    assert r.total == task


def test_compose_reward_rejects_non_finite_lambda():
    with pytest.raises(SpecError):
        compose_reward(0.0, [(float("nan"), QualityScore(0.5))])


def _action_state(spec, **cfg):
    return ActionPolicyState(n_obs_buckets(spec), spec.action_count, LearnerConfig(**cfg))


def test_sensorimotor_nests_conventional():
    spec = envs.make_spec(envs.BALANCE)
    cfg = dict(epsilon=0.2, initial_value=1.0)
    a_conv, a_sm = _action_state(spec, **cfg), _action_state(spec, **cfg)
    sense = SensePolicyState.for_space(spec.space(), LearnerConfig(), pinned=spec.fixed_options[0])
    for seed in range(15):
        c = run_conventional(spec, a_conv, seed=seed)
        s = run_sensorimotor(spec, a_sm, sense, 0.0, seed=seed, model=None)
        assert [x.action for x in c] == [x.action for x in s]
        assert [x.reward.total for x in c] == [x.reward.total for x in s]
        assert all(x.observation == y.observation for x, y in zip(c, s))
    np.testing.assert_array_equal(a_conv.table, a_sm.table)


def test_full_search_equals_oracle():
    spec = envs.make_spec(envs.SCENE)
    model = envs.scene_perception_model(spec)
    n = spec.space().total_size
    for seed in range(40):
        assert run_single_shot(spec, n, model, seed).option_index == brute_force_selection(spec, model, seed)


def test_single_option_space_is_trivial():
    space = OptionSpace.from_axes(("stops", 0.0, 1.0, 1), ("gain", 1.0, 2.0, 1))
    spec = envs.scene_classification_spec(space=space)
    model = envs.scene_perception_model(spec)
    for seed in range(5):
        ad = run_single_shot(spec, 1, model, seed)
        fx = run_single_shot(spec, 1, model, seed, mode="fixed")
        assert ad.option_index == fx.option_index == 0
        assert ad.observation == fx.observation


def test_single_shot_rejects_bad_k():
    spec = envs.make_spec(envs.SCENE)
    model = envs.scene_perception_model(spec)
    with pytest.raises(SpecError):
        run_single_shot(spec, spec.space().total_size + 1, model, 0)


def _pinned_pair(spec, seed):
    model = envs.scene_perception_model(envs.make_spec(envs.SCENE))
    sense = SensePolicyState.for_space(spec.space(), LearnerConfig(), pinned=spec.fixed_options[0])
    po = run_perception_only(spec, sense, model, seed=seed)
    wrapped = envs.with_ignored_actions(spec)
    conv = run_conventional(wrapped, _action_state(wrapped), seed=seed, model=model)
    return po, conv


def test_pinned_perception_only_matches_conventional():
    spec = envs.drifting_perception_spec(horizon=25)
    for seed in range(5):
        po, conv = _pinned_pair(spec, seed)
        assert po.initial_observation == conv.initial_observation
        assert all(a.observation == b.observation for a, b in zip(po, conv))
        assert len(po) == len(conv) == 25


def test_perception_only_scores_every_step():
    spec = envs.drifting_perception_spec(horizon=12)
    model = envs.scene_perception_model(envs.make_spec(envs.SCENE))
    traj = run_perception_only(spec, SensePolicyState.for_space(spec.space(), LearnerConfig()),
                               model, seed=2)
    assert len(traj) == 12 and all(len(s.qualities) == 1 for s in traj)
    assert all(s.reward.task in (0.0, 1.0) for s in traj)


def test_trained_greedy_sensing_settles_under_static_lighting():
    # one quality bucket: the state is the previous option, so greedy play must reach a self-loop
    spec = envs.drifting_perception_spec(horizon=40, lighting_step=0.0)
    model = envs.scene_perception_model(envs.make_spec(envs.SCENE))
    cfg = LearnerConfig(epsilon=0.2, alpha_schedule="inverse-visits", buckets=1)
    sense = SensePolicyState.for_space(spec.space(), cfg)
    for ep in range(60):
        run_perception_only(spec, sense, model, seed=ep)
    greedy = dataclasses.replace(sense, config=dataclasses.replace(cfg, epsilon=0.0))
    for seed in range(1000, 1005):
        chosen = [s.option_index for s in run_perception_only(spec, greedy, model, seed=seed, learn=False)]
        assert len(set(chosen[spec.space().total_size:])) == 1


def test_perception_only_rejects_action_env():
    spec = envs.make_spec(envs.BALANCE)
    with pytest.raises(SpecError):
        run_perception_only(spec, SensePolicyState(5), None)


def test_multimodal_requires_two_modalities():
    spec = envs.make_spec(envs.BALANCE)
    with pytest.raises(SpecError):
        run_multimodal_sparse(spec, _action_state(spec), [SensePolicyState(5)], 0.1, 0.1)


def test_multimodal_weights_stay_on_simplex():
    spec = envs.make_spec(envs.GRIP)
    a = _action_state(spec, epsilon=0.3)
    senses = [SensePolicyState.for_space(sp, LearnerConfig(epsilon=0.3)) for sp in spec.option_spaces]
    for seed in range(5):
        traj = run_multimodal_sparse(spec, a, senses, 0.1, 0.1, seed=seed)
        for s in traj:
            assert abs(sum(s.weights.weights) - 1.0) < 1e-9
            assert min(s.weights.weights) >= 0.0


def test_forced_clipping_range_lowers_quality_and_survival():
    from adaptive_sensing import harness

    cfg = harness.load_config(Path(__file__).resolve().parents[1] / "configs" / "balance_aware.cfg")
    spec = cfg.env_spec()
    model = harness.default_model(spec, 0)
    seeds = cfg.episode_seeds()[:60]
    runs = {}
    for name, pinned in (("adaptive", None), ("clipping", 0)):  # option 0: the narrowest window
        a = ActionPolicyState(n_obs_buckets(spec), 2, cfg.learner)
        s = SensePolicyState.for_space(spec.space(), cfg.sense_config, pinned=pinned)
        runs[name] = [run_sensorimotor(spec, a, s, 0.1, seed=sd, model=model) for sd in seeds]
    survival = {k: np.array([len(t) for t in v]) for k, v in runs.items()}
    quality = {k: np.mean([t.mean_quality() for t in v]) for k, v in runs.items()}
    p, pos, neg, _ = harness.sign_test(survival["adaptive"] - survival["clipping"])
    assert quality["clipping"] < quality["adaptive"]
    assert pos > neg and p < 0.01


def test_early_termination_keeps_every_step():
    spec = envs.make_spec(envs.BALANCE)
    a = _action_state(spec, epsilon=1.0)
    for seed in range(10):
        traj = run_conventional(spec, a, seed=seed)
        assert [s.step for s in traj] == list(range(len(traj)))
        assert traj.info["fell"] and traj.steps[-1].done and not any(s.done for s in traj.steps[:-1])
        assert traj.info["survival"] == len(traj) < spec.horizon
