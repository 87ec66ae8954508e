"""Discrete-observation hidden Markov model.

Training is Baum-Welch (scaled forward-backward EM), decoding is Viterbi
in log space, and the next-symbol predictor conditions on the final
Viterbi state j: probs[i] = sum_r trans[j][r] * emit[r][i].  Multi-step
forecasts append the previous step's top pick to the working sequence and
re-run the predictor.

All probabilities are floored at PROB_FLOOR after each re-estimation step
so sequences containing transitions unseen in training never produce -inf
likelihoods.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels

PROB_FLOOR = 1e-12
DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-6

_ROW_SUM_TOL = 1e-9


def _check_stochastic(mat: np.ndarray, name: str) -> None:
    if np.any(mat < 0.0) or np.any(mat > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    sums = mat.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
        raise ValueError(f"{name} rows must sum to 1 within {_ROW_SUM_TOL}")


@dataclass(frozen=True, eq=False)
class Hmm:
    """Model parameters: transitions, emissions, and the initial distribution."""

    trans: np.ndarray
    emit: np.ndarray
    init: np.ndarray
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        trans = np.ascontiguousarray(self.trans, dtype=np.float64)
        emit = np.ascontiguousarray(self.emit, dtype=np.float64)
        init = np.ascontiguousarray(self.init, dtype=np.float64)
        n = trans.shape[0]
        if trans.ndim != 2 or trans.shape != (n, n):
            raise ValueError("trans must be a square matrix")
        if emit.ndim != 2 or emit.shape[0] != n:
            raise ValueError("emit must have one row per state")
        if init.shape != (n,):
            raise ValueError("init length must equal the state count")
        _check_stochastic(trans, "trans")
        _check_stochastic(emit, "emit")
        _check_stochastic(init.reshape(1, -1), "init")
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "emit", emit)
        object.__setattr__(self, "init", init)

    @property
    def n_states(self) -> int:
        return self.trans.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.emit.shape[1]

    def log_params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        with np.errstate(divide="ignore"):
            return np.log(self.trans), np.log(self.emit), np.log(self.init)

    def save(self, path: str | Path) -> None:
        obj = {
            "n_states": self.n_states,
            "n_symbols": self.n_symbols,
            "trans": self.trans.tolist(),
            "emit": self.emit.tolist(),
            "init": self.init.tolist(),
            "meta": self.meta,
        }
        Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Hmm":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        model = cls(
            trans=np.asarray(obj["trans"], dtype=np.float64),
            emit=np.asarray(obj["emit"], dtype=np.float64),
            init=np.asarray(obj["init"], dtype=np.float64),
            meta=obj.get("meta", {}),
        )
        if model.n_states != obj["n_states"] or model.n_symbols != obj["n_symbols"]:
            raise ValueError(f"matrix shapes in {path} disagree with declared dimensions")
        return model


@dataclass(frozen=True)
class PredictionDistribution:
    """Next-symbol probabilities plus the symbol ids ranked by probability."""

    probs: np.ndarray
    ranked: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        ranked = np.asarray(self.ranked, dtype=np.int64)
        if abs(probs.sum() - 1.0) > _ROW_SUM_TOL:
            raise ValueError("prediction probabilities must sum to 1")
        if sorted(ranked.tolist()) != list(range(probs.shape[0])):
            raise ValueError("ranked must be a permutation of the symbol ids")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "ranked", ranked)

    def top(self, n: int) -> list[tuple[int, float]]:
        return [(int(s), float(self.probs[s])) for s in self.ranked[:n]]


def rank_symbols(probs: np.ndarray) -> np.ndarray:
    """Symbol ids by descending probability; equal probabilities keep id order."""
    return np.argsort(-np.asarray(probs), kind="stable").astype(np.int64)


def check_observations(obs, n_symbols: int, min_len: int = 1) -> np.ndarray:
    """Validate and coerce an observation sequence to an int64 array."""
    arr = np.asarray(obs, dtype=np.int64).ravel()
    if arr.shape[0] < min_len:
        raise ValueError(f"observation sequence must have at least {min_len} symbols")
    if arr.shape[0] and (arr.min() < 0 or arr.max() >= n_symbols):
        bad = arr[(arr < 0) | (arr >= n_symbols)][0]
        raise ValueError(f"symbol {bad} out of range [0, {n_symbols})")
    return arr


def init_random(n_states: int, n_symbols: int, seed: int) -> Hmm:
    """Seeded random model: uniform rows, row-normalized, strictly positive.

    Exactly uniform rows are a saddle point of EM, so training always
    starts from a randomized (but reproducible) model.
    """
    if n_states < 1 or n_symbols < 1:
        raise ValueError("n_states and n_symbols must be >= 1")
    rng = np.random.default_rng(seed)

    def rows(shape):
        mat = np.maximum(rng.random(shape), PROB_FLOOR)
        return mat / mat.sum(axis=-1, keepdims=True)

    return Hmm(
        trans=rows((n_states, n_states)),
        emit=rows((n_states, n_symbols)),
        init=rows((1, n_states))[0],
        meta={"seed": int(seed)},
    )


def log_likelihood(model: Hmm, obs) -> float:
    """log P(observations | model), scaled per step so long sequences never underflow."""
    arr = check_observations(obs, model.n_symbols)
    _, ll = _kernels.forward_pass(model.trans, model.emit, model.init, arr)
    return float(ll)


def baum_welch(
    model: Hmm,
    obs,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> tuple[Hmm, np.ndarray]:
    """Train by EM; returns the trained model and the log-likelihood trace.

    The trace holds one entry per successive model, including the returned
    one, and is non-decreasing within numerical slack.  Training stops when
    the improvement drops below tol or after max_iter updates.
    """
    arr = check_observations(obs, model.n_symbols, min_len=2)
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    trans, emit, init, trace, count = _kernels.baum_welch_run(
        model.trans, model.emit, model.init, arr, max_iter, tol, PROB_FLOOR
    )
    trace = trace[:count].copy()
    trained = Hmm(
        trans=trans,
        emit=emit,
        init=init,
        meta={
            **model.meta,
            "training": {
                "iterations": int(count - 1),
                "max_iter": int(max_iter),
                "tol": float(tol),
                "sequence_length": int(arr.shape[0]),
                "final_log_likelihood": float(trace[-1]),
            },
        },
    )
    return trained, trace


def viterbi(model: Hmm, obs) -> np.ndarray:
    """Most probable hidden-state path; ties break to the lower state id."""
    arr = check_observations(obs, model.n_symbols)
    log_trans, log_emit, log_init = model.log_params()
    return _kernels.viterbi_path(log_trans, log_emit, log_init, arr)


def final_viterbi_state(model: Hmm, obs) -> int:
    """Last state of the Viterbi path.

    Equals the argmax of the final Viterbi score row: backtracking starts
    there, so the full path never needs materializing for prediction.
    """
    arr = check_observations(obs, model.n_symbols)
    log_trans, log_emit, log_init = model.log_params()
    deltas = _kernels.viterbi_deltas(log_trans, log_emit, log_init, arr)
    return int(np.argmax(deltas[-1]))


def predict_next(model: Hmm, obs) -> PredictionDistribution:
    """Next-symbol distribution conditioned on the final Viterbi state."""
    j = final_viterbi_state(model, obs)
    probs = model.trans[j] @ model.emit
    return PredictionDistribution(probs=probs, ranked=rank_symbols(probs))


def predict_multi(model: Hmm, obs, steps: int) -> list[PredictionDistribution]:
    """Forecast `steps` symbols ahead.

    Each step after the first appends the previous step's most probable
    symbol to the working sequence before re-running the predictor, so the
    forecast is deterministic.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    working = check_observations(obs, model.n_symbols)
    out: list[PredictionDistribution] = []
    for _ in range(steps):
        dist = predict_next(model, working)
        out.append(dist)
        working = np.append(working, dist.ranked[0])
    return out


def posterior_predict(model: Hmm, obs) -> PredictionDistribution:
    """Variant predictor that averages over the full state posterior at T.

    probs[i] = sum_j P(q_T = j | O) * sum_r trans[j][r] * emit[r][i].
    Kept for comparison with the Viterbi-conditioned default.
    """
    arr = check_observations(obs, model.n_symbols)
    alphas, ll = _kernels.forward_pass(model.trans, model.emit, model.init, arr)
    if not np.isfinite(ll):
        raise ValueError("observation sequence is impossible under this model")
    probs = alphas[-1] @ model.trans @ model.emit
    return PredictionDistribution(probs=probs, ranked=rank_symbols(probs))
