"""Independent oracles used to check the fast implementations.

Everything here is deliberately naive: plain-Python enumeration over all
state paths, counting, and power iteration.  None of it shares code with
the package internals it validates.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

import alertpredict as ap


def brute_force_log_likelihood(model: ap.Hmm, obs) -> float:
    """log P(O | model) by summing over every hidden state path."""
    obs = list(obs)
    total = 0.0
    for path in product(range(model.n_states), repeat=len(obs)):
        p = model.init[path[0]] * model.emit[path[0], obs[0]]
        for t in range(1, len(obs)):
            p *= model.trans[path[t - 1], path[t]] * model.emit[path[t], obs[t]]
        total += p
    return math.log(total) if total > 0.0 else -math.inf


def brute_force_viterbi(model: ap.Hmm, obs) -> tuple[float, tuple[int, ...]]:
    """(joint probability, path) of the most probable state path."""
    obs = list(obs)
    best_p = -1.0
    best_path: tuple[int, ...] = ()
    for path in product(range(model.n_states), repeat=len(obs)):
        p = model.init[path[0]] * model.emit[path[0], obs[0]]
        for t in range(1, len(obs)):
            p *= model.trans[path[t - 1], path[t]] * model.emit[path[t], obs[t]]
        if p > best_p:
            best_p = p
            best_path = path
    return best_p, best_path


def path_probability(model: ap.Hmm, obs, path) -> float:
    obs = list(obs)
    p = model.init[path[0]] * model.emit[path[0], obs[0]]
    for t in range(1, len(obs)):
        p *= model.trans[path[t - 1], path[t]] * model.emit[path[t], obs[t]]
    return float(p)


def naive_evaluate(model: ap.Hmm, test, context, horizon: int, aggregate: bool = False):
    """Reference scorer built directly on predict_multi (full recompute)."""
    test = list(test)
    context = list(context)
    hits = [0, 0, 0]
    n = 0
    anchors = len(test) - 1 if aggregate else len(test) - horizon
    for t in range(anchors):
        seen = np.array(context + test[: t + 1], dtype=np.int64)
        dists = ap.predict_multi(model, seen, horizon)
        if aggregate:
            for s in range(1, horizon + 1):
                if t + s < len(test):
                    pos = list(dists[s - 1].ranked).index(test[t + s])
                    for k in range(3):
                        if pos <= k:
                            hits[k] += 1
                    n += 1
        else:
            pos = list(dists[horizon - 1].ranked).index(test[t + horizon])
            for k in range(3):
                if pos <= k:
                    hits[k] += 1
            n += 1
    return hits, n


def naive_em_step(model: ap.Hmm, obs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Baum-Welch re-estimation using unscaled alpha/beta (short T only).

    Returns (trans, emit, init) before any probability flooring.
    """
    obs = list(obs)
    T, N, M = len(obs), model.n_states, model.n_symbols
    A, B, pi = model.trans, model.emit, model.init

    alpha = np.zeros((T, N))
    alpha[0] = pi * B[:, obs[0]]
    for t in range(1, T):
        for j in range(N):
            alpha[t, j] = sum(alpha[t - 1, i] * A[i, j] for i in range(N)) * B[j, obs[t]]
    beta = np.zeros((T, N))
    beta[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        for i in range(N):
            beta[t, i] = sum(A[i, j] * B[j, obs[t + 1]] * beta[t + 1, j] for j in range(N))
    total = alpha[T - 1].sum()

    gamma = alpha * beta / total
    xi = np.zeros((T - 1, N, N))
    for t in range(T - 1):
        for i in range(N):
            for j in range(N):
                xi[t, i, j] = alpha[t, i] * A[i, j] * B[j, obs[t + 1]] * beta[t + 1, j] / total

    new_init = gamma[0]
    new_trans = xi.sum(axis=0) / gamma[:-1].sum(axis=0)[:, None]
    new_emit = np.zeros((N, M))
    for k in range(M):
        mask = np.array([o == k for o in obs])
        new_emit[:, k] = gamma[mask].sum(axis=0)
    new_emit /= gamma.sum(axis=0)[:, None]
    return new_trans, new_emit, new_init


def stationary_symbol_distribution(model: ap.Hmm, iterations: int = 10_000) -> np.ndarray:
    """Long-run symbol frequencies: stationary state dist (power iteration) mixed with emissions."""
    v = np.full(model.n_states, 1.0 / model.n_states)
    for _ in range(iterations):
        nxt = v @ model.trans
        if np.abs(nxt - v).max() < 1e-15:
            v = nxt
            break
        v = nxt
    return v @ model.emit


def modal_frequency(symbols) -> float:
    arr = np.asarray(symbols, dtype=np.int64)
    return float(np.bincount(arr).max() / arr.shape[0])
