"""Tabular learning machinery and exact dynamic-programming oracles.

Reward convention: the reward R[s'] is collected on entering s'. A state whose
every action returns to itself with probability 1 is absorbing and terminal:
its value is its entry reward and nothing accrues afterwards. Hence

    V(s)   = R[s]                                   if s is terminal
    V(s)   = R[s] + gamma * max_a sum_s' P[s,a,s'] V(s')   otherwise
    Q*(s,a) = sum_s' P[s,a,s'] (R[s'] + gamma * [s' not terminal] max_a' Q*(s',a'))

and Q-learning with reward R[s'] and done = terminal(s') estimates Q*.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import SpecError
from .seeding import generator


def q_update(
    table: np.ndarray,
    state: int,
    action: int,
    reward: float,
    next_state: int,
    done: bool,
    alpha: float,
    gamma: float,
) -> np.ndarray:
    """In-place Q-learning backup on ``table`` (states x actions); returns it."""
    n_s, n_a = table.shape
    if not (0 <= state < n_s and 0 <= next_state < n_s):
        raise SpecError("state index out of range")
    if not 0 <= action < n_a:
        raise SpecError("action index out of range")
    bootstrap = 0.0 if done else gamma * table[next_state].max()
    table[state, action] += alpha * (reward + bootstrap - table[state, action])
    return table


@dataclass(frozen=True, eq=False)
class ExplicitMDP:
    transitions: np.ndarray  # S x A x S, row-stochastic
    rewards: np.ndarray      # S, collected on entry
    start: int = 0
    terminal: np.ndarray = field(default=None)

    def __post_init__(self):
        P = np.asarray(self.transitions, dtype=float)
        R = np.asarray(self.rewards, dtype=float)
        check_stochastic(P)
        if R.shape != (P.shape[0],):
            raise SpecError("reward table must have one entry per state")
        term = absorbing_states(P) if self.terminal is None else np.asarray(self.terminal, bool)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", R)
        object.__setattr__(self, "terminal", term)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def check_stochastic(P: np.ndarray) -> None:
    if P.ndim != 3 or P.shape[0] != P.shape[2]:
        raise SpecError("transition table must have shape S x A x S")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=2) - 1.0) > 1e-9):
        raise SpecError("transition rows must be stochastic (non-negative, sum 1)")


def absorbing_states(P: np.ndarray) -> np.ndarray:
    idx = np.arange(P.shape[0])
    return np.all(P[idx, :, idx] == 1.0, axis=1)


@dataclass
class ValueIterationResult:
    values: np.ndarray
    policy: np.ndarray
    q: np.ndarray
    iterations: int
    deltas: list[float]


def value_iteration(
    transitions: np.ndarray,
    rewards: np.ndarray,
    gamma: float,
    tolerance: float = 1e-8,
    terminal: np.ndarray | None = None,
    max_iterations: int = 100_000,
) -> ValueIterationResult:
    """Synchronous Bellman backups until the max-norm change drops below tolerance.

    The greedy policy breaks ties toward the lowest action index.
    """
    P = np.ascontiguousarray(transitions, dtype=float)
    R = np.ascontiguousarray(rewards, dtype=float)
    check_stochastic(P)
    if not 0.0 <= gamma < 1.0:
        raise SpecError("gamma must lie in [0, 1)")
    term = absorbing_states(P) if terminal is None else np.asarray(terminal, dtype=bool)
    V = np.zeros(P.shape[0])
    deltas = []
    for it in range(1, max_iterations + 1):
        Vn, _ = _kernels.bellman_sweep(P, R, term, gamma, V)
        delta = float(np.max(np.abs(Vn - V)))
        deltas.append(delta)
        V = Vn
        if delta < tolerance:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    # V(s') already holds R[s'] plus the discounted continuation, so P @ V is
    # exactly the Q* that Q-learning estimates under the entry convention.
    q = P @ V
    q[term] = 0.0  # no action is ever taken from a terminal state
    return ValueIterationResult(V, np.argmax(q, axis=1), q, it, deltas)


def toy_mdp_fixture() -> ExplicitMDP:
    """Three states, two actions; state 2 is the absorbing goal.

    state 0 (start): a0 safe step to 1, a1 long-shot gamble for the goal
    state 1:         a0 reliable approach to the goal, a1 dithering

        R = (0, 0, 1) on entry, gamma = 0.9 in the tests
    """
    P = np.zeros((3, 2, 3))
    P[0, 0] = [0.05, 0.95, 0.0]
    P[0, 1] = [0.95, 0.0, 0.05]
    P[1, 0] = [0.05, 0.0, 0.95]
    P[1, 1] = [0.2, 0.5, 0.3]
    P[2, 0] = [0.0, 0.0, 1.0]
    P[2, 1] = [0.0, 0.0, 1.0]
    return ExplicitMDP(P, np.array([0.0, 0.0, 1.0]), start=0)


@dataclass
class QLearningResult:
    q: np.ndarray
    visits: np.ndarray
    episode_lengths: np.ndarray

    @property
    def policy(self) -> np.ndarray:
        return np.argmax(self.q, axis=1)


def q_learning(
    mdp: ExplicitMDP,
    episodes: int,
    gamma: float,
    epsilon: float = 0.1,
    alpha: float = 0.1,
    inverse_visits: bool = True,
    seed: int = 0,
    max_steps: int = 100,
) -> QLearningResult:
    """Epsilon-greedy Q-learning on an explicit MDP, episodes from ``mdp.start``.

    Random draws come from one seeded generator so the numba and numpy kernels
    see identical inputs.
    """
    draws = generator(seed).random((episodes, max_steps, 3))
    cdf = np.cumsum(mdp.transitions, axis=2)
    cdf[..., -1] = 1.0
    Q = np.zeros((mdp.n_states, mdp.n_actions))
    visits = np.zeros((mdp.n_states, mdp.n_actions), dtype=np.int64)
    Q, visits, lengths = _kernels.q_learning_mdp(
        cdf, mdp.rewards, mdp.terminal, mdp.start, gamma, epsilon, Q, visits, draws,
        alpha, inverse_visits,
    )
    return QLearningResult(Q, visits, lengths)
