"""Compiled numerical kernels for the HMM routines.

Every kernel is deterministic: no fastmath, no parallel reductions, and
all tie-breaks resolve to the lowest index.  Randomness never lives here;
callers pass pre-drawn uniforms so seeding stays in one place.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def forward_pass(trans, emit, init, obs):
    """Scaled forward recursion.

    Returns (alphas, log_likelihood) where alphas[t] is the normalized
    forward vector at step t (the state posterior given symbols up to t).
    A symbol impossible under the model yields log-likelihood -inf.
    """
    T = obs.shape[0]
    N = trans.shape[0]
    alphas = np.empty((T, N))
    s = 0.0
    for i in range(N):
        v = init[i] * emit[i, obs[0]]
        alphas[0, i] = v
        s += v
    if s <= 0.0:
        return alphas, -np.inf
    for i in range(N):
        alphas[0, i] /= s
    ll = np.log(s)
    for t in range(1, T):
        s = 0.0
        for j in range(N):
            acc = 0.0
            for i in range(N):
                acc += alphas[t - 1, i] * trans[i, j]
            v = acc * emit[j, obs[t]]
            alphas[t, j] = v
            s += v
        if s <= 0.0:
            return alphas, -np.inf
        for j in range(N):
            alphas[t, j] /= s
        ll += np.log(s)
    return alphas, ll


@njit(cache=True)
def backward_pass(trans, emit, obs):
    """Backward recursion with per-step row normalization.

    Rows are each scaled to sum 1; only the per-step direction matters
    because posteriors are renormalized per step during re-estimation.
    """
    T = obs.shape[0]
    N = trans.shape[0]
    betas = np.empty((T, N))
    for i in range(N):
        betas[T - 1, i] = 1.0 / N
    for t in range(T - 2, -1, -1):
        s = 0.0
        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc += trans[i, j] * emit[j, obs[t + 1]] * betas[t + 1, j]
            betas[t, i] = acc
            s += acc
        if s <= 0.0:
            for i in range(N):
                betas[t, i] = 1.0 / N
        else:
            for i in range(N):
                betas[t, i] /= s
    return betas


@njit(cache=True)
def _floor_rows(mat, floor):
    """Clamp entries at `floor` and renormalize each row to sum 1."""
    rows = mat.shape[0]
    cols = mat.shape[1]
    for r in range(rows):
        s = 0.0
        for c in range(cols):
            if mat[r, c] < floor:
                mat[r, c] = floor
            s += mat[r, c]
        for c in range(cols):
            mat[r, c] /= s
    return mat


@njit(cache=True)
def _em_update(trans, emit, init, obs, alphas, betas, floor):
    """One Baum-Welch re-estimation step (with the probability floor)."""
    T = obs.shape[0]
    N = trans.shape[0]
    M = emit.shape[1]
    gamma = np.empty(N)
    gamma_all = np.zeros(N)
    gamma_trans = np.zeros(N)
    xi_sum = np.zeros((N, N))
    xi = np.empty((N, N))
    emit_num = np.zeros((N, M))
    new_init = np.empty((1, N))
    for t in range(T):
        gs = 0.0
        for i in range(N):
            g = alphas[t, i] * betas[t, i]
            gamma[i] = g
            gs += g
        for i in range(N):
            gamma[i] /= gs
        if t == 0:
            for i in range(N):
                new_init[0, i] = gamma[i]
        sym = obs[t]
        for i in range(N):
            gamma_all[i] += gamma[i]
            emit_num[i, sym] += gamma[i]
        if t < T - 1:
            nxt = obs[t + 1]
            xs = 0.0
            for i in range(N):
                gamma_trans[i] += gamma[i]
                for j in range(N):
                    v = alphas[t, i] * trans[i, j] * emit[j, nxt] * betas[t + 1, j]
                    xi[i, j] = v
                    xs += v
            for i in range(N):
                for j in range(N):
                    xi_sum[i, j] += xi[i, j] / xs
    new_trans = np.empty((N, N))
    new_emit = np.empty((N, M))
    for i in range(N):
        if gamma_trans[i] > 0.0:
            for j in range(N):
                new_trans[i, j] = xi_sum[i, j] / gamma_trans[i]
        else:
            for j in range(N):
                new_trans[i, j] = trans[i, j]
        if gamma_all[i] > 0.0:
            for m in range(M):
                new_emit[i, m] = emit_num[i, m] / gamma_all[i]
        else:
            for m in range(M):
                new_emit[i, m] = emit[i, m]
    _floor_rows(new_trans, floor)
    _floor_rows(new_emit, floor)
    _floor_rows(new_init, floor)
    return new_trans, new_emit, new_init[0]


@njit(cache=True)
def baum_welch_run(trans0, emit0, init0, obs, max_iter, tol, floor):
    """Full EM loop.

    Returns (trans, emit, init, trace, count) where trace[:count] holds the
    log-likelihood of every successive model including the returned one.
    Stops on max_iter or when the improvement drops below tol; if a floored
    update would lower the log-likelihood, the previous model is returned so
    the reported trace is always non-decreasing.
    """
    trans = _floor_rows(trans0.copy(), floor)
    emit = _floor_rows(emit0.copy(), floor)
    init2 = init0.copy().reshape(1, -1)
    init = _floor_rows(init2, floor)[0]
    trace = np.empty(max_iter + 1)
    alphas, ll = forward_pass(trans, emit, init, obs)
    trace[0] = ll
    count = 1
    for _ in range(max_iter):
        betas = backward_pass(trans, emit, obs)
        new_trans, new_emit, new_init = _em_update(trans, emit, init, obs, alphas, betas, floor)
        new_alphas, new_ll = forward_pass(new_trans, new_emit, new_init, obs)
        if new_ll < ll:
            return trans, emit, init, trace, count
        trace[count] = new_ll
        count += 1
        improvement = new_ll - ll
        trans, emit, init = new_trans, new_emit, new_init
        alphas, ll = new_alphas, new_ll
        if improvement < tol:
            return trans, emit, init, trace, count
    return trans, emit, init, trace, count


@njit(cache=True)
def viterbi_path(log_trans, log_emit, log_init, obs):
    """Most probable state path in log space; ties go to the lowest index."""
    T = obs.shape[0]
    N = log_trans.shape[0]
    psi = np.zeros((T, N), dtype=np.int64)
    delta = np.empty(N)
    for j in range(N):
        delta[j] = log_init[j] + log_emit[j, obs[0]]
    nxt = np.empty(N)
    for t in range(1, T):
        for j in range(N):
            best = -np.inf
            arg = 0
            for i in range(N):
                v = delta[i] + log_trans[i, j]
                if v > best:
                    best = v
                    arg = i
            nxt[j] = best + log_emit[j, obs[t]]
            psi[t, j] = arg
        for j in range(N):
            delta[j] = nxt[j]
    best = -np.inf
    q = 0
    for j in range(N):
        if delta[j] > best:
            best = delta[j]
            q = j
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = q
    for t in range(T - 1, 0, -1):
        q = psi[t, q]
        path[t - 1] = q
    return path


@njit(cache=True)
def viterbi_deltas(log_trans, log_emit, log_init, obs):
    """All Viterbi score rows; row t's argmax is the path's state at t."""
    T = obs.shape[0]
    N = log_trans.shape[0]
    deltas = np.empty((T, N))
    for j in range(N):
        deltas[0, j] = log_init[j] + log_emit[j, obs[0]]
    for t in range(1, T):
        for j in range(N):
            best = -np.inf
            for i in range(N):
                v = deltas[t - 1, i] + log_trans[i, j]
                if v > best:
                    best = v
            deltas[t, j] = best + log_emit[j, obs[t]]
    return deltas


@njit(cache=True)
def _argmax_first(values):
    best = -np.inf
    arg = 0
    for i in range(values.shape[0]):
        if values[i] > best:
            best = values[i]
            arg = i
    return arg


@njit(cache=True)
def _advance_delta(d, nd, log_trans, log_emit, sym):
    N = d.shape[0]
    for j in range(N):
        best = -np.inf
        for i in range(N):
            v = d[i] + log_trans[i, j]
            if v > best:
                best = v
        nd[j] = best + log_emit[j, sym]
    for j in range(N):
        d[j] = nd[j]


@njit(cache=True)
def _score(ranked, j, true_sym, hits, levels, kmax):
    for pos in range(kmax):
        if ranked[j, pos] == true_sym:
            for k in range(pos, levels):
                hits[k] += 1
            break


@njit(cache=True)
def eval_hits(log_trans, log_emit, deltas, ranked, ctx_len, test, horizon, levels, aggregate):
    """Score multi-step forecasts over a test segment.

    deltas are the Viterbi rows of context+test; at anchor t the model has
    seen everything through test[t], forecasts `horizon` steps by appending
    its own top-1 picks, and (by default) only the horizon-th distribution
    is scored, against test[t+horizon].  With aggregate=True every step
    1..horizon with an in-range target is scored instead.
    Returns (hits per level, number of scored predictions).
    """
    N = log_trans.shape[0]
    M = ranked.shape[1]
    n_test = test.shape[0]
    hits = np.zeros(levels, dtype=np.int64)
    n = 0
    anchors = n_test - 1 if aggregate else n_test - horizon
    kmax = levels if levels < M else M
    d = np.empty(N)
    nd = np.empty(N)
    for t in range(anchors):
        for i in range(N):
            d[i] = deltas[ctx_len + t, i]
        for s in range(1, horizon + 1):
            j = _argmax_first(d)
            target = t + s
            if (aggregate and target < n_test) or (not aggregate and s == horizon):
                _score(ranked, j, test[target], hits, levels, kmax)
                n += 1
            if s < horizon:
                if aggregate and target >= n_test - 1:
                    break
                _advance_delta(d, nd, log_trans, log_emit, ranked[j, 0])
    return hits, n


@njit(cache=True)
def eval_hits_windowed(
    log_trans, log_emit, log_init, full, ranked, ctx_len, n_test, horizon, levels, window, aggregate
):
    """Windowed variant: each anchor re-runs Viterbi over its last `window` symbols."""
    N = log_trans.shape[0]
    M = ranked.shape[1]
    hits = np.zeros(levels, dtype=np.int64)
    n = 0
    anchors = n_test - 1 if aggregate else n_test - horizon
    kmax = levels if levels < M else M
    d = np.empty(N)
    nd = np.empty(N)
    for t in range(anchors):
        end = ctx_len + t + 1
        start = end - window
        if start < 0:
            start = 0
        for j in range(N):
            d[j] = log_init[j] + log_emit[j, full[start]]
        for p in range(start + 1, end):
            _advance_delta(d, nd, log_trans, log_emit, full[p])
        for s in range(1, horizon + 1):
            j = _argmax_first(d)
            target = t + s
            if (aggregate and target < n_test) or (not aggregate and s == horizon):
                _score(ranked, j, full[ctx_len + target], hits, levels, kmax)
                n += 1
            if s < horizon:
                if aggregate and target >= n_test - 1:
                    break
                _advance_delta(d, nd, log_trans, log_emit, ranked[j, 0])
    return hits, n


@njit(cache=True)
def _pick(cum, u):
    n = cum.shape[0]
    for i in range(n - 1):
        if u < cum[i]:
            return i
    return n - 1


@njit(cache=True)
def sample_symbols(cum_trans, cum_emit, cum_init, u_state, u_sym):
    """Ancestral sampling driven by pre-drawn uniforms (one state/symbol pair per step)."""
    T = u_state.shape[0]
    syms = np.empty(T, dtype=np.int64)
    state = _pick(cum_init, u_state[0])
    syms[0] = _pick(cum_emit[state], u_sym[0])
    for t in range(1, T):
        state = _pick(cum_trans[state], u_state[t])
        syms[t] = _pick(cum_emit[state], u_sym[t])
    return syms
