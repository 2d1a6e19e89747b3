"""Sensing and action policies.

Exploration draws use ``seeding.uniform`` on derived seeds rather than a full
generator: one epsilon-greedy decision costs two splitmix64 evaluations.
Ties are always broken toward the lowest index.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    LearnerConfig,
    ModalityWeights,
    Observation,
    OptionSpace,
    QualityScore,
    SensorOption,
    SpecError,
    weights_project,
)
from .learn import q_update
from .perception import PerceptionModel, quality_max_confidence
from .seeding import derive_seed, generator, uniform


def bucket(q: float | QualityScore, n_buckets: int) -> int:
    """Quality bucket min(floor(q * B), B - 1)."""
    return min(int(math.floor(float(q) * n_buckets)), n_buckets - 1)


def epsilon_greedy(row: np.ndarray, epsilon: float, seed: int) -> int:
    if uniform(derive_seed(seed, 0)) < epsilon:
        return min(int(uniform(derive_seed(seed, 1)) * row.size), row.size - 1)
    return int(np.argmax(row))


def _learning_rate(cfg_alpha: float, schedule: str, visits: int) -> float:
    return 1.0 / visits if schedule == "inverse-visits" else cfg_alpha


# ---------------------------------------------------------------------------
# single-shot selection
# ---------------------------------------------------------------------------


def sample_candidates(space: OptionSpace, k: int, seed: int) -> list[SensorOption]:
    """k distinct grid options, uniform over size-k subsets."""
    n = space.total_size
    if not 1 <= k <= n:
        raise SpecError(f"k={k} outside [1, {n}]")
    picks = generator(seed).choice(n, size=k, replace=False)
    return [space.option(int(i)) for i in picks]


def select_single_shot(
    candidates: Sequence[tuple[SensorOption, Observation]],
    model: PerceptionModel,
    quality: Callable[[PerceptionModel, Observation], QualityScore] = quality_max_confidence,
) -> tuple[int, QualityScore]:
    """Argmax-quality candidate; the earliest wins ties."""
    if not candidates:
        raise SpecError("no candidates to select from")
    best_i, best_q = 0, quality(model, candidates[0][1])
    for i in range(1, len(candidates)):
        q = quality(model, candidates[i][1])
        if q.value > best_q.value:
            best_i, best_q = i, q
    return best_i, best_q


# ---------------------------------------------------------------------------
# learned sensing policy
# ---------------------------------------------------------------------------


@dataclass
class SensePolicyState:
    """Q-table over (quality bucket, previous option) -> next option."""

    n_options: int
    config: LearnerConfig = field(default_factory=LearnerConfig)
    pinned: int | None = None
    table: np.ndarray = None
    visits: np.ndarray = None

    def __post_init__(self):
        B, n = self.config.buckets, self.n_options
        if self.table is None:
            self.table = np.full((B, n, n), float(self.config.initial_value))
        if self.visits is None:
            self.visits = np.zeros((B, n, n), dtype=np.int64)
        if self.table.shape != (B, n, n):
            raise SpecError(f"sense table must have shape {(B, n, n)}")
        if self.pinned is not None and not 0 <= self.pinned < n:
            raise SpecError("pinned option out of range")

    @classmethod
    def for_space(cls, space: OptionSpace, config: LearnerConfig, pinned=None):
        return cls(space.total_size, config, pinned)

    def state_index(self, q: float | QualityScore, prev_option: int) -> int:
        return bucket(q, self.config.buckets) * self.n_options + prev_option

    def learn(self, q: float, prev_option: int, chosen: int, reward: float,
              next_q: float, done: bool) -> None:
        flat = self.table.reshape(-1, self.n_options)
        s = self.state_index(q, prev_option)
        s2 = self.state_index(next_q, chosen)
        vis = self.visits.reshape(-1, self.n_options)
        vis[s, chosen] += 1
        lr = _learning_rate(self.config.alpha, self.config.alpha_schedule, vis[s, chosen])
        q_update(flat, s, chosen, reward, s2, done, lr, self.config.gamma)


def sense_policy_step(
    state: SensePolicyState,
    q: float | QualityScore,
    prev_option_index: int,
    seed: int,
    epsilon: float | None = None,
) -> int:
    """Epsilon-greedy next option from the row (bucket(q), previous option)."""
    qv = float(q)
    if not 0.0 <= qv <= 1.0:
        raise SpecError("quality must lie in [0, 1]")
    if not 0 <= prev_option_index < state.n_options:
        raise SpecError("previous option index out of range")
    if state.pinned is not None:
        return state.pinned
    eps = state.config.epsilon if epsilon is None else epsilon
    row = state.table[bucket(qv, state.config.buckets), prev_option_index]
    return epsilon_greedy(row, eps, seed)


# ---------------------------------------------------------------------------
# action policy
# ---------------------------------------------------------------------------


@dataclass
class ActionPolicyState:
    """Q-table over (observation bucket, quality bucket, previous action) -> action.

    With ``quality_buckets == 1`` the quality feedback is ignored. The previous
    action slot ``n_actions`` stands for "no previous action".
    """

    n_obs_buckets: int
    n_actions: int
    config: LearnerConfig = field(default_factory=LearnerConfig)
    quality_buckets: int = 1
    table: np.ndarray = None
    visits: np.ndarray = None

    def __post_init__(self):
        if self.n_obs_buckets < 1 or self.n_actions < 1 or self.quality_buckets < 1:
            raise SpecError("action table dimensions must be >= 1")
        shape = (self.n_states, self.n_actions)
        if self.table is None:
            self.table = np.full(shape, float(self.config.initial_value))
        if self.visits is None:
            self.visits = np.zeros(shape, dtype=np.int64)
        if self.table.shape != shape:
            raise SpecError(f"action table must have shape {shape}")

    @property
    def n_states(self) -> int:
        return self.n_obs_buckets * self.quality_buckets * (self.n_actions + 1)

    def state_index(self, obs_bucket: int, prev_action: int | None,
                    q: float | QualityScore | None) -> int:
        if not 0 <= obs_bucket < self.n_obs_buckets:
            raise SpecError("observation bucket out of range")
        prev = self.n_actions if prev_action is None else prev_action
        if not 0 <= prev <= self.n_actions:
            raise SpecError("previous action out of range")
        qb = 0 if (q is None or self.quality_buckets == 1) else bucket(q, self.quality_buckets)
        return (obs_bucket * self.quality_buckets + qb) * (self.n_actions + 1) + prev

    def learn(self, s: int, action: int, reward: float, s2: int, done: bool) -> None:
        self.visits[s, action] += 1
        lr = _learning_rate(self.config.alpha, self.config.alpha_schedule,
                            self.visits[s, action])
        q_update(self.table, s, action, reward, s2, done, lr, self.config.gamma)


def action_policy_step(
    state: ActionPolicyState,
    obs_bucket: int,
    prev_action: int | None,
    q: float | QualityScore | None,
    seed: int,
    epsilon: float | None = None,
) -> int:
    s = state.state_index(obs_bucket, prev_action, q)
    eps = state.config.epsilon if epsilon is None else epsilon
    return epsilon_greedy(state.table[s], eps, seed)


# ---------------------------------------------------------------------------
# multimodal sensing policy
# ---------------------------------------------------------------------------


def quality_softmax_weights(qualities: Sequence[float], tau: float) -> ModalityWeights:
    """Weights proportional to exp(tau * q_n), projected onto the simplex."""
    z = tau * np.asarray([float(q) for q in qualities], dtype=float)
    return weights_project(np.exp(z - z.max()))


def multi_sense_policy_step(
    states: Sequence[SensePolicyState],
    weights: ModalityWeights,
    qualities: Sequence[float | QualityScore],
    prev_options: Sequence[int],
    seed: int,
    tau: float | None = None,
) -> tuple[tuple[int, ...], ModalityWeights]:
    n = len(states)
    if n < 1:
        raise SpecError("need at least one modality")
    if not (len(weights) == len(qualities) == len(prev_options) == n):
        raise SpecError("modality count mismatch")
    temp = states[0].config.tau if tau is None else tau
    options = tuple(
        sense_policy_step(st, q, prev, derive_seed(seed, i))
        for i, (st, q, prev) in enumerate(zip(states, qualities, prev_options))
    )
    return options, quality_softmax_weights(qualities, temp)


# ---------------------------------------------------------------------------
# persistence: "ndim d0 d1 ...", then rows of the table's last axis
# ---------------------------------------------------------------------------


def save_table(table: np.ndarray, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(str(v) for v in (table.ndim, *table.shape)) + "\n")
        for row in table.reshape(-1, table.shape[-1]):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_table(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = [int(v) for v in fh.readline().split()]
        rows = [line.split() for line in fh if line.strip()]
    if not header or len(header) != header[0] + 1:
        raise SpecError(f"{path}: bad table header")
    shape = tuple(header[1:])
    arr = np.array(rows, dtype=float)
    if arr.size != math.prod(shape):
        raise SpecError(f"{path}: expected {math.prod(shape)} values, found {arr.size}")
    return arr.reshape(shape)
