"""Closed-loop frameworks: conventional RL, single-shot adaptive sensing,
perception-only sensing, the sensorimotor loop and the multimodal
sparse-reward loop.

Seed streams. Every loop derives its per-step seeds the same way, so two loops
that make the same decisions see the same environment and sensor noise:

    reset           derive_seed(seed, INIT)
    env step t      derive_seed(seed, ENV, t)
    capture of s_t  derive_seed(seed, MEASURE, t)
    action at t     derive_seed(seed, POLICY, t)
    sensing at t    derive_seed(seed, SENSE, t)

Step records hold the observation produced by the step (s_{t+1}); the
starting observation lives on ``Trajectory.initial_observation``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import envs
from .core import (
    GRIP,
    MAX_CONFIDENCE,
    VISUAL_ALIGNMENT,
    LearnerConfig,
    ModalityWeights,
    Observation,
    QualityScore,
    RewardBreakdown,
    SensorOption,
    SpecError,
    StepRecord,
    Trajectory,
)
from .envs import EnvSpec, env_reset, env_step
from .perception import (
    PerceptionModel,
    predict,
    quality_grip,
    quality_max_confidence,
    quality_visual_alignment,
)
from .policies import (
    ActionPolicyState,
    SensePolicyState,
    action_policy_step,
    multi_sense_policy_step,
    sample_candidates,
    select_single_shot,
    sense_policy_step,
)
from .seeding import CANDIDATES, ENV, FINAL, INIT, MEASURE, POLICY, SENSE, derive_seed
from .sensing import measure, measure_multi


def compose_reward(task: float, quality_terms: Sequence) -> RewardBreakdown:
    """task + sum(lambda_i * q_i).

    Terms are (lambda, QualityScore) pairs or (metric_id, lambda, q) triples.
    """
    terms = []
    for term in quality_terms:
        if len(term) == 2:
            lam, q = term
            metric = q.metric_id if isinstance(q, QualityScore) else MAX_CONFIDENCE
        else:
            metric, lam, q = term
        lam, qv = float(lam), float(q)
        if not np.isfinite(lam):
            raise SpecError("lambda must be finite")
        terms.append((metric, lam, qv))
    terms = tuple(terms)
    return RewardBreakdown(float(task), terms, RewardBreakdown.sum_terms(task, terms))


# ---------------------------------------------------------------------------
# helpers shared by the loops
# ---------------------------------------------------------------------------


def _capture(spec: EnvSpec, scene, option_index: int, seed: int) -> Observation:
    space = spec.option_spaces[0]
    return measure(scene, space.option(option_index), spec.capture_models[0], seed,
                   modality=spec.modalities[0])


def _capture_multi(spec: EnvSpec, scene, option_indices, weights, seed) -> Observation:
    options = [sp.option(i) for sp, i in zip(spec.option_spaces, option_indices)]
    return measure_multi(scene, options, weights, spec.capture_models, seed, spec.modalities)


def quality(spec: EnvSpec, model: PerceptionModel | None, obs: Observation) -> QualityScore | None:
    """The environment's perception-aware metric Q_M(s, o)."""
    if model is None:
        return None
    if spec.kind == envs.BALANCE:
        return envs.balance_quality(spec, model, obs)
    return quality_max_confidence(model, obs)


def obs_bucket(spec: EnvSpec, obs: Observation) -> int:
    """Discrete observation feature for the action table."""
    if spec.kind == envs.BALANCE:
        return envs.balance_obs_bucket(spec, obs)
    if spec.kind == envs.GRIP:
        return envs.grip_obs_bucket(spec, obs)
    return 0


def n_obs_buckets(spec: EnvSpec) -> int:
    if spec.kind == envs.BALANCE:
        return envs.balance_n_obs_buckets(spec)
    if spec.kind == envs.GRIP:
        return envs.grip_n_obs_buckets(spec)
    return 1


def _correct(model, obs, label) -> bool | None:
    if model is None or label is None:
        return None
    return bool(int(np.argmax(predict(model, obs))) == label)


def _terminal(state) -> bool:
    """True terminal (failure or success), as opposed to horizon truncation."""
    return bool(state.extra.get("fell") or state.extra.get("success"))


def _finish(traj: Trajectory, state) -> Trajectory:
    traj.info["survival"] = len(traj)
    traj.info["success"] = bool(state.extra.get("success", False))
    traj.info["fell"] = bool(state.extra.get("fell", False))
    return traj


# ---------------------------------------------------------------------------
# conventional RL with fixed sensing
# ---------------------------------------------------------------------------


def run_conventional(
    spec: EnvSpec,
    action_state: ActionPolicyState,
    config: LearnerConfig | None = None,
    seed: int = 0,
    fixed: int | Sequence[int] | None = None,
    model: PerceptionModel | None = None,
    learn: bool = True,
) -> Trajectory:
    """Fixed sensing every step; the action table learns from task reward only."""
    if not spec.has_actions:
        raise SpecError("conventional loop needs an environment with actions")
    multi = spec.n_modalities > 1
    if fixed is None:
        opts = spec.fixed_options
    else:
        opts = tuple(fixed) if multi else (int(fixed),)
    weights = ModalityWeights.uniform(spec.n_modalities) if multi else None

    def capture(scene, t):
        s = derive_seed(seed, MEASURE, t)
        return _capture_multi(spec, scene, opts, weights, s) if multi else _capture(spec, scene, opts[0], s)

    state, scene = env_reset(spec, derive_seed(seed, INIT))
    obs = capture(scene, 0)
    traj = Trajectory(seed, initial_observation=obs)
    option = (tuple(sp.option(i) for sp, i in zip(spec.option_spaces, opts))
              if multi else spec.option_spaces[0].option(opts[0]))
    prev = None
    for t in range(spec.horizon):
        b = obs_bucket(spec, obs)
        s_idx = action_state.state_index(b, prev, None)
        a = action_policy_step(action_state, b, prev, None, derive_seed(seed, POLICY, t))
        label = state.label
        state, scene, task, done = env_step(state, a, derive_seed(seed, ENV, t))
        obs = capture(scene, t + 1)
        reward = compose_reward(task, ())
        if learn:
            s2 = action_state.state_index(obs_bucket(spec, obs), a, None)
            action_state.learn(s_idx, a, reward.total, s2, _terminal(state))
        q = quality(spec, model, obs) if not multi else None
        traj.append(StepRecord(
            t, obs, option, reward, (q,) if q is not None else (), a, weights,
            opts if multi else opts[0], _correct(model, obs, state.label) if not multi else None,
            done,
        ))
        prev = a
        if done:
            break
    return _finish(traj, state)


# ---------------------------------------------------------------------------
# single-shot adaptive sensing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SelectionRecord:
    option_index: int
    option: SensorOption
    observation: Observation
    prediction: np.ndarray
    correct: bool | None
    quality: QualityScore
    candidate_indices: tuple[int, ...]
    label: int | None = None


def candidate_seed(seed: int, option_index: int) -> int:
    """Capture seed for a candidate; keyed by option so re-scans are reproducible."""
    return derive_seed(seed, MEASURE, option_index)


def run_single_shot(
    spec: EnvSpec,
    k: int,
    model: PerceptionModel,
    seed: int,
    mode: str = "adaptive",
) -> SelectionRecord:
    """Sample k candidate options, capture each from the frozen scene, keep the
    most confident, then re-capture at the winner.

    ``mode="fixed"`` skips the search and captures at the environment's fixed option
    with the same final-capture noise, giving a paired baseline.
    """
    if spec.kind not in envs.PERCEPTION_KINDS:
        raise SpecError("single-shot sensing needs a perception environment")
    space = spec.option_spaces[0]
    if not 1 <= k <= space.total_size:
        raise SpecError(f"k={k} outside [1, {space.total_size}]")
    state, scene = env_reset(spec, derive_seed(seed, INIT))
    if mode == "fixed":
        chosen, cand_idx = spec.fixed_options[0], ()
    elif mode == "adaptive":
        cands = sample_candidates(space, k, derive_seed(seed, CANDIDATES))
        cand_idx = tuple(space.index_of(o) for o in cands)
        captured = [(o, _capture(spec, scene, i, candidate_seed(seed, i)))
                    for o, i in zip(cands, cand_idx)]
        best, _ = select_single_shot(captured, model)
        chosen = cand_idx[best]
    else:
        raise SpecError(f"unknown single-shot mode {mode!r}")
    final = _capture(spec, scene, chosen, derive_seed(seed, FINAL))
    probs = predict(model, final)
    return SelectionRecord(
        chosen, space.option(chosen), final, probs,
        bool(int(np.argmax(probs)) == state.label), quality_max_confidence(model, final),
        cand_idx, state.label,
    )


def brute_force_selection(spec: EnvSpec, model: PerceptionModel, seed: int) -> int:
    """Oracle: capture the frozen scene at every option, return the argmax index."""
    _, scene = env_reset(spec, derive_seed(seed, INIT))
    space = spec.option_spaces[0]
    best, best_q = -1, -np.inf
    for i in range(space.total_size):
        obs = _capture(spec, scene, i, candidate_seed(seed, i))
        q = float(np.max(predict(model, obs)))
        if q > best_q:
            best, best_q = i, q
    return best


# ---------------------------------------------------------------------------
# perception-only continuous sensing
# ---------------------------------------------------------------------------


def run_perception_only(
    spec: EnvSpec,
    sense_state: SensePolicyState,
    model: PerceptionModel,
    config: LearnerConfig | None = None,
    seed: int = 0,
    learn: bool = True,
) -> Trajectory:
    """Sensing-only MDP: the table learns with reward Q_M of the next capture."""
    if spec.has_actions:
        raise SpecError("perception-only loop takes an action-free environment")
    state, scene = env_reset(spec, derive_seed(seed, INIT))
    opt = spec.fixed_options[0]
    obs = _capture(spec, scene, opt, derive_seed(seed, MEASURE, 0))
    q = quality(spec, model, obs)
    traj = Trajectory(seed, initial_observation=obs)
    space = spec.option_spaces[0]
    for t in range(spec.horizon):
        nxt = sense_policy_step(sense_state, q, opt, derive_seed(seed, SENSE, t))
        state, scene, task, done = env_step(state, None, derive_seed(seed, ENV, t))
        obs = _capture(spec, scene, nxt, derive_seed(seed, MEASURE, t + 1))
        q2 = quality(spec, model, obs)
        if learn:
            sense_state.learn(q.value, opt, nxt, q2.value, q2.value, False)
        correct = _correct(model, obs, state.label)
        reward = compose_reward(float(correct), ())
        traj.append(StepRecord(t, obs, space.option(nxt), reward, (q2,), None, None, nxt,
                               correct, done))
        opt, q = nxt, q2
        if done:
            break
    return _finish(traj, state)


# ---------------------------------------------------------------------------
# sensorimotor loop
# ---------------------------------------------------------------------------


def run_sensorimotor(
    spec: EnvSpec,
    action_state: ActionPolicyState,
    sense_state: SensePolicyState,
    lam: float,
    config: LearnerConfig | None = None,
    seed: int = 0,
    model: PerceptionModel | None = None,
    learn: bool = True,
) -> Trajectory:
    """Joint action and sensing selection with reward R_task + lam * Q_M.

    Q_M scores the capture produced by the step. Passing ``model=None``
    drops quality feedback entirely (quality treated as 0 for bucketing).
    The action table sees the quality bucket only when its
    ``quality_buckets`` > 1.
    """
    if not spec.has_actions or spec.n_modalities != 1:
        raise SpecError("sensorimotor loop needs a single-modality environment with actions")
    if not (np.isfinite(lam) and lam >= 0):
        raise SpecError("lambda must be finite and >= 0")
    space = spec.option_spaces[0]
    state, scene = env_reset(spec, derive_seed(seed, INIT))
    opt = spec.fixed_options[0]
    obs = _capture(spec, scene, opt, derive_seed(seed, MEASURE, 0))
    q = quality(spec, model, obs)
    traj = Trajectory(seed, initial_observation=obs)
    prev = None
    for t in range(spec.horizon):
        qv = q.value if q is not None else 0.0
        b = obs_bucket(spec, obs)
        s_idx = action_state.state_index(b, prev, qv)
        a = action_policy_step(action_state, b, prev, qv, derive_seed(seed, POLICY, t))
        nxt = sense_policy_step(sense_state, qv, opt, derive_seed(seed, SENSE, t))
        state, scene, task, done = env_step(state, a, derive_seed(seed, ENV, t))
        obs = _capture(spec, scene, nxt, derive_seed(seed, MEASURE, t + 1))
        q2 = quality(spec, model, obs)
        q2v = q2.value if q2 is not None else 0.0
        reward = compose_reward(task, [(lam, q2)] if q2 is not None else [])
        if learn:
            terminal = _terminal(state)
            s2 = action_state.state_index(obs_bucket(spec, obs), a, q2v)
            action_state.learn(s_idx, a, reward.total, s2, terminal)
            if sense_state.pinned is None:
                sense_state.learn(qv, opt, nxt, reward.total, q2v, terminal)
        traj.append(StepRecord(t, obs, space.option(nxt), reward,
                               (q2,) if q2 is not None else (), a, None, nxt, None, done))
        prev, opt, q = a, nxt, q2
        if done:
            break
    return _finish(traj, state)


# ---------------------------------------------------------------------------
# multimodal sparse-reward loop
# ---------------------------------------------------------------------------


def run_multimodal_sparse(
    spec: EnvSpec,
    action_state: ActionPolicyState,
    sense_states: Sequence[SensePolicyState],
    lam_tact: float,
    lam_vis: float,
    config: LearnerConfig | None = None,
    seed: int = 0,
    visual_model: PerceptionModel | None = None,
    learn: bool = True,
) -> Trajectory:
    """Grip task: R_sparse + lam_tact * Q_grip + lam_vis * Q_vis.

    Modality 0 is tactile, modality 1 visual. Sensing options and modality
    weights come from the multimodal sensing policy.
    """
    if spec.n_modalities != 2 or spec.modalities != ("tactile", "visual"):
        raise SpecError("multimodal sparse loop needs exactly (tactile, visual) modalities")
    if len(sense_states) != 2:
        raise SpecError("need one sensing policy per modality")
    if visual_model is None:
        visual_model = envs.grip_visual_model(spec)
    tact_space, vis_space = spec.option_spaces
    tau = (config or sense_states[0].config).tau

    def qualities(obs, prev_a, opts):
        t_opt, v_opt = tact_space.option(opts[0]), vis_space.option(opts[1])
        return (quality_grip(obs, prev_a, t_opt),
                quality_visual_alignment(obs, prev_a, v_opt, t_opt, visual_model))

    state, scene = env_reset(spec, derive_seed(seed, INIT))
    opts = tuple(spec.fixed_options)
    weights = ModalityWeights.uniform(2)
    obs = _capture_multi(spec, scene, opts, weights, derive_seed(seed, MEASURE, 0))
    qg, qv = qualities(obs, None, opts)
    traj = Trajectory(seed, initial_observation=obs)
    prev = None
    for t in range(spec.horizon):
        b = obs_bucket(spec, obs)
        s_idx = action_state.state_index(b, prev, qv.value)
        a = action_policy_step(action_state, b, prev, qv.value, derive_seed(seed, POLICY, t))
        nxt, new_w = multi_sense_policy_step(sense_states, weights, (qg, qv), opts,
                                             derive_seed(seed, SENSE, t), tau)
        state, scene, task, done = env_step(state, a, derive_seed(seed, ENV, t))
        obs = _capture_multi(spec, scene, nxt, new_w, derive_seed(seed, MEASURE, t + 1))
        qg2, qv2 = qualities(obs, a, nxt)
        reward = compose_reward(task, [(GRIP, lam_tact, qg2.value),
                                       (VISUAL_ALIGNMENT, lam_vis, qv2.value)])
        if learn:
            terminal = _terminal(state)
            s2 = action_state.state_index(obs_bucket(spec, obs), a, qv2.value)
            action_state.learn(s_idx, a, reward.total, s2, terminal)
            for st, q_old, o_old, o_new, q_new in zip(sense_states, (qg, qv), opts, nxt, (qg2, qv2)):
                if st.pinned is None:
                    st.learn(q_old.value, o_old, o_new, reward.total, q_new.value, terminal)
        options = (tact_space.option(nxt[0]), vis_space.option(nxt[1]))
        traj.append(StepRecord(t, obs, options, reward, (qg2, qv2), a, new_w, nxt, None, done))
        prev, opts, weights, qg, qv = a, nxt, new_w, qg2, qv2
        if done:
            break
    return _finish(traj, state)
