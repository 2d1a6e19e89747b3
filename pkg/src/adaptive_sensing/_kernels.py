"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``ASL_NUMBA`` is not set to a
false value (``0``, ``false``, ``no``, ``off``). Both paths implement the same
arithmetic; random numbers are always drawn by the caller with numpy so both
paths consume identical inputs.

Kernels:
    capture            affine response + noise, moving-average blur, clip, 8-bit quantize
    bellman_sweep      one synchronous value-iteration backup
    q_learning_mdp     epsilon-greedy Q-learning episodes on an explicit MDP
    logistic_grad      mean cross-entropy loss and gradient of a softmax classifier
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

LEVELS = 255.0


def _flag_enabled() -> bool:
    return os.environ.get("ASL_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _capture_np(x, scale, offset, noise, width):
    y = x * scale + offset + noise
    n = y.shape[0]
    if width > 1 and n > 1:
        h = width // 2
        c = np.concatenate(([0.0], np.cumsum(y)))
        lo = np.maximum(np.arange(n) - h, 0)
        hi = np.minimum(np.arange(n) + h + 1, n)
        y = (c[hi] - c[lo]) / (hi - lo)
    flags = (y < 0.0) | (y > 1.0)
    q = np.floor(np.clip(y, 0.0, 1.0) * LEVELS + 0.5) / LEVELS
    return q, flags


def _bellman_sweep_np(P, R, terminal, gamma, V):
    Q = P @ V
    best = Q.max(axis=1)
    Vn = np.where(terminal, R, R + gamma * best)
    return Vn, Q


def _q_learning_mdp_np(cdf, R, terminal, start, gamma, epsilon, Q, visits, draws,
                       alpha, inverse_visits):
    n_states, n_actions = Q.shape
    n_episodes, max_steps, _ = draws.shape
    steps_taken = np.zeros(n_episodes, dtype=np.int64)
    for ep in range(n_episodes):
        s = start
        for t in range(max_steps):
            coin, pick, move = draws[ep, t]
            if coin < epsilon:
                a = min(int(pick * n_actions), n_actions - 1)
            else:
                a = int(np.argmax(Q[s]))
            s2 = int(np.searchsorted(cdf[s, a], move, side="right"))
            s2 = min(s2, n_states - 1)
            visits[s, a] += 1
            lr = 1.0 / visits[s, a] if inverse_visits else alpha
            done = terminal[s2]
            target = R[s2] + (0.0 if done else gamma * Q[s2].max())
            Q[s, a] += lr * (target - Q[s, a])
            s = s2
            steps_taken[ep] = t + 1
            if done:
                break
    return Q, visits, steps_taken


def _logistic_grad_np(W, b, X, Y):
    z = X @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = X.shape[0]
    loss = -np.mean(np.log(p[np.arange(n), Y]))
    g = p.copy()
    g[np.arange(n), Y] -= 1.0
    g /= n
    return loss, g.T @ X, g.sum(axis=0)


numpy_impl = SimpleNamespace(
    name="numpy",
    capture=_capture_np,
    bellman_sweep=_bellman_sweep_np,
    q_learning_mdp=_q_learning_mdp_np,
    logistic_grad=_logistic_grad_np,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None


def _build_numba():
    @njit(cache=True)
    def capture(x, scale, offset, noise, width):
        n = x.shape[0]
        y = np.empty(n)
        for i in range(n):
            y[i] = x[i] * scale + offset + noise[i]
        if width > 1 and n > 1:
            h = width // 2
            c = np.zeros(n + 1)
            for i in range(n):
                c[i + 1] = c[i] + y[i]
            out = np.empty(n)
            for i in range(n):
                lo = max(i - h, 0)
                hi = min(i + h + 1, n)
                out[i] = (c[hi] - c[lo]) / (hi - lo)
            y = out
        q = np.empty(n)
        flags = np.empty(n, dtype=np.bool_)
        for i in range(n):
            v = y[i]
            flags[i] = v < 0.0 or v > 1.0
            v = min(max(v, 0.0), 1.0)
            q[i] = np.floor(v * LEVELS + 0.5) / LEVELS
        return q, flags

    @njit(cache=True)
    def bellman_sweep(P, R, terminal, gamma, V):
        S, A, _ = P.shape
        Q = np.zeros((S, A))
        Vn = np.empty(S)
        for s in range(S):
            best = -np.inf
            for a in range(A):
                acc = 0.0
                for s2 in range(S):
                    acc += P[s, a, s2] * V[s2]
                Q[s, a] = acc
                if acc > best:
                    best = acc
            Vn[s] = R[s] if terminal[s] else R[s] + gamma * best
        return Vn, Q

    @njit(cache=True)
    def q_learning_mdp(cdf, R, terminal, start, gamma, epsilon, Q, visits, draws,
                       alpha, inverse_visits):
        n_states, n_actions = Q.shape
        n_episodes, max_steps, _ = draws.shape
        steps_taken = np.zeros(n_episodes, dtype=np.int64)
        for ep in range(n_episodes):
            s = start
            for t in range(max_steps):
                coin = draws[ep, t, 0]
                pick = draws[ep, t, 1]
                move = draws[ep, t, 2]
                if coin < epsilon:
                    a = min(int(pick * n_actions), n_actions - 1)
                else:
                    a = 0
                    for j in range(1, n_actions):
                        if Q[s, j] > Q[s, a]:
                            a = j
                s2 = np.searchsorted(cdf[s, a], move, side="right")
                if s2 > n_states - 1:
                    s2 = n_states - 1
                visits[s, a] += 1
                lr = 1.0 / visits[s, a] if inverse_visits else alpha
                done = terminal[s2]
                nxt = Q[s2, 0]
                for j in range(1, n_actions):
                    if Q[s2, j] > nxt:
                        nxt = Q[s2, j]
                target = R[s2] + (0.0 if done else gamma * nxt)
                Q[s, a] += lr * (target - Q[s, a])
                s = s2
                steps_taken[ep] = t + 1
                if done:
                    break
        return Q, visits, steps_taken

    @njit(cache=True)
    def logistic_grad(W, b, X, Y):
        n, d = X.shape
        C = W.shape[0]
        gW = np.zeros((C, d))
        gb = np.zeros(C)
        loss = 0.0
        z = np.empty(C)
        for i in range(n):
            zmax = -np.inf
            for c in range(C):
                acc = b[c]
                for j in range(d):
                    acc += W[c, j] * X[i, j]
                z[c] = acc
                if acc > zmax:
                    zmax = acc
            tot = 0.0
            for c in range(C):
                z[c] = np.exp(z[c] - zmax)
                tot += z[c]
            for c in range(C):
                p = z[c] / tot
                if c == Y[i]:
                    loss -= np.log(p)
                    p -= 1.0
                p /= n
                gb[c] += p
                for j in range(d):
                    gW[c, j] += p * X[i, j]
        return loss / n, gW, gb

    return SimpleNamespace(
        name="numba",
        capture=capture,
        bellman_sweep=bellman_sweep,
        q_learning_mdp=q_learning_mdp,
        logistic_grad=logistic_grad,
    )


numba_impl = _build_numba() if njit is not None else None

HAVE_NUMBA = numba_impl is not None
active = numba_impl if (HAVE_NUMBA and _flag_enabled()) else numpy_impl
BACKEND = active.name


def capture(x, scale, offset, noise, width):
    return active.capture(
        np.ascontiguousarray(x, dtype=np.float64), float(scale), float(offset),
        np.ascontiguousarray(noise, dtype=np.float64), int(width),
    )


def bellman_sweep(P, R, terminal, gamma, V):
    return active.bellman_sweep(P, R, terminal, float(gamma), V)


def q_learning_mdp(cdf, R, terminal, start, gamma, epsilon, Q, visits, draws, alpha,
                   inverse_visits):
    return active.q_learning_mdp(cdf, R, terminal, int(start), float(gamma), float(epsilon),
                                 Q, visits, draws, float(alpha), bool(inverse_visits))


def logistic_grad(W, b, X, Y):
    return active.logistic_grad(W, b, X, Y)
