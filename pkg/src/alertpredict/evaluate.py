"""Accuracy scoring and the experiment sweep harness.

A prediction counts as a level-k hit when the true next symbol is among
the k most probable symbols of the forecast distribution; the three
levels are nested, so level1 <= level2 <= level3 always holds.  Sweeps
vary one knob at a time (hidden states, training length, cluster count,
forecast horizon) and are bit-reproducible under a fixed master seed.
"""

from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .bow import Vocabulary, count_matrix
from .cluster import kmeans_fit, sequence_from_matrix
from .hmm import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    Hmm,
    baum_welch,
    check_observations,
    init_random,
    rank_symbols,
)
from .ingest import AlertLog

LEVELS = 3


def derive_seed(master: int, label: str) -> int:
    """Deterministic sub-seed so one master seed reproduces a whole run."""
    tag = zlib.crc32(label.encode("utf-8"))
    return int(np.random.SeedSequence([int(master), tag]).generate_state(1)[0])


@dataclass(frozen=True)
class LevelAccuracy:
    """Top-1/2/3 hit rates over a batch of predictions."""

    level1: float
    level2: float
    level3: float
    n_predictions: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "level1", float(self.level1))
        object.__setattr__(self, "level2", float(self.level2))
        object.__setattr__(self, "level3", float(self.level3))
        object.__setattr__(self, "n_predictions", int(self.n_predictions))
        if not 0.0 <= self.level1 <= self.level2 <= self.level3 <= 1.0:
            raise ValueError("accuracy levels must be nested: 0 <= l1 <= l2 <= l3 <= 1")

    def as_dict(self) -> dict:
        return {
            "level1": self.level1,
            "level2": self.level2,
            "level3": self.level3,
            "n_predictions": self.n_predictions,
        }


@dataclass(frozen=True)
class SweepReport:
    """One accuracy row per parameter value, plus the fixed configuration."""

    parameter: str
    rows: tuple[tuple[int, LevelAccuracy], ...]
    config: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = [v for v, _ in self.rows]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep parameter values must be strictly increasing")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["param", "value", "level1", "level2", "level3", "n"])
        for value, acc in self.rows:
            writer.writerow(
                [
                    self.parameter,
                    value,
                    repr(acc.level1),
                    repr(acc.level2),
                    repr(acc.level3),
                    acc.n_predictions,
                ]
            )
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        return {
            "parameter": self.parameter,
            "config": self.config,
            "rows": [{"value": v, **acc.as_dict()} for v, acc in self.rows],
        }

    def save(self, csv_path: str | Path | None = None, json_path: str | Path | None = None) -> None:
        if csv_path is not None:
            Path(csv_path).write_text(self.to_csv_text(), encoding="utf-8")
        if json_path is not None:
            Path(json_path).write_text(
                json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )


@dataclass(frozen=True)
class CategoryCodec:
    """Bijection between alert category strings and observation symbol ids."""

    categories: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        idx: dict[str, int] = {}
        for i, cat in enumerate(self.categories):
            if cat in idx:
                raise ValueError(f"duplicate category {cat!r}")
            idx[cat] = i
        object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return len(self.categories)

    def encode(self, category: str) -> int:
        return self.index[category]

    def decode(self, symbol: int) -> str:
        return self.categories[symbol]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"categories": list(self.categories)}, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "CategoryCodec":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(tuple(obj["categories"]))


def categories_to_sequence(log: AlertLog) -> tuple[CategoryCodec, np.ndarray]:
    """Alert categories as an observation sequence (first-appearance symbol ids)."""
    if len(log) == 0:
        raise ValueError("cannot build a category sequence from an empty log")
    ordered: dict[str, int] = {}
    symbols = np.empty(len(log), dtype=np.int64)
    for i, alert in enumerate(log):
        if alert.category not in ordered:
            ordered[alert.category] = len(ordered)
        symbols[i] = ordered[alert.category]
    return CategoryCodec(tuple(ordered)), symbols


def split_sequence(obs, train_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Prefix/suffix split; temporal order preserved, no shuffling."""
    arr = np.asarray(obs, dtype=np.int64).ravel()
    if not 1 <= train_len < arr.shape[0]:
        raise ValueError(f"train_len {train_len} must be in [1, {arr.shape[0] - 1}]")
    return arr[:train_len].copy(), arr[train_len:].copy()


def evaluate(
    model: Hmm,
    test,
    context,
    horizon: int = 1,
    *,
    aggregate: bool = False,
    window: int | None = None,
) -> LevelAccuracy:
    """Slide over the test segment and score `horizon`-step forecasts.

    At anchor t the model has seen the context plus test[0..t]; the
    horizon-th forecast distribution is scored against test[t+horizon].
    Forecast symbols feed only the working sequence of the multi-step
    predictor; the anchor context always grows with true symbols.

    aggregate=True scores every intermediate step instead of only the
    horizon-th one.  window=W bounds the per-anchor Viterbi context to the
    last W symbols (by default the full context is used).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    test_arr = check_observations(test, model.n_symbols)
    ctx_arr = np.asarray(context, dtype=np.int64).ravel()
    if ctx_arr.shape[0]:
        check_observations(ctx_arr, model.n_symbols)
    if test_arr.shape[0] <= horizon:
        raise ValueError(f"test length {test_arr.shape[0]} must exceed horizon {horizon}")

    log_trans, log_emit, log_init = model.log_params()
    next_probs = model.trans @ model.emit
    ranked = np.empty_like(next_probs, dtype=np.int64)
    for j in range(model.n_states):
        ranked[j] = rank_symbols(next_probs[j])

    full = np.concatenate([ctx_arr, test_arr])
    if window is None:
        deltas = _kernels.viterbi_deltas(log_trans, log_emit, log_init, full)
        hits, n = _kernels.eval_hits(
            log_trans, log_emit, deltas, ranked, ctx_arr.shape[0], test_arr, horizon, LEVELS, aggregate
        )
    else:
        if window < 1:
            raise ValueError("window must be >= 1")
        hits, n = _kernels.eval_hits_windowed(
            log_trans,
            log_emit,
            log_init,
            full,
            ranked,
            ctx_arr.shape[0],
            test_arr.shape[0],
            horizon,
            LEVELS,
            window,
            aggregate,
        )
    return LevelAccuracy(
        level1=hits[0] / n,
        level2=hits[1] / n,
        level3=hits[2] / n,
        n_predictions=int(n),
    )


def _train_on(train: np.ndarray, n_states: int, n_symbols: int, seed: int, max_iter: int, tol: float) -> Hmm:
    start = init_random(n_states, n_symbols, seed)
    trained, _ = baum_welch(start, train, max_iter=max_iter, tol=tol)
    return trained


def sweep_states(
    obs,
    states: list[int],
    *,
    n_symbols: int | None = None,
    train_len: int,
    seed: int,
    horizon: int = 1,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> SweepReport:
    """Accuracy as the number of hidden states varies (one model per value)."""
    arr = np.asarray(obs, dtype=np.int64).ravel()
    if any(s < 1 for s in states):
        raise ValueError("state counts must be >= 1")
    m = int(n_symbols if n_symbols is not None else arr.max() + 1)
    train, test = split_sequence(arr, train_len)
    hmm_seed = derive_seed(seed, "hmm-init")
    rows = []
    for n in states:
        model = _train_on(train, n, m, hmm_seed, max_iter, tol)
        rows.append((int(n), evaluate(model, test, train, horizon)))
    return SweepReport(
        parameter="states",
        rows=tuple(rows),
        config={"n_symbols": m, "train_len": train_len, "seed": seed, "horizon": horizon},
    )


def sweep_training_length(
    obs,
    lengths: list[int],
    n_states: int,
    seed: int,
    *,
    n_symbols: int | None = None,
    horizon: int = 1,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> SweepReport:
    """Accuracy as the training prefix grows; the remainder is evaluated."""
    arr = np.asarray(obs, dtype=np.int64).ravel()
    m = int(n_symbols if n_symbols is not None else arr.max() + 1)
    hmm_seed = derive_seed(seed, "hmm-init")
    rows = []
    for length in lengths:
        train, test = split_sequence(arr, length)
        model = _train_on(train, n_states, m, hmm_seed, max_iter, tol)
        rows.append((int(length), evaluate(model, test, train, horizon)))
    return SweepReport(
        parameter="train-len",
        rows=tuple(rows),
        config={"n_symbols": m, "n_states": n_states, "seed": seed, "horizon": horizon},
    )


def sweep_clusters(
    log: AlertLog,
    vocab: Vocabulary,
    k_values: list[int],
    n_states: int,
    seed: int,
    *,
    train_len: int,
    horizon: int = 1,
    binary: bool = False,
    normalize: bool = False,
    kmeans_max_iter: int = 100,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> SweepReport:
    """Refit clustering, regenerate the sequence, and retrain per k.

    Each row's model has n_symbols = k.  When some k is below the number
    of distinct alert categories, a note records that such clusterings
    cannot separate all categories.
    """
    mat = count_matrix(log, vocab, binary=binary)
    n_categories = len({a.category for a in log})
    cluster_seed = derive_seed(seed, "cluster")
    hmm_seed = derive_seed(seed, "hmm-init")
    notes = []
    if any(k < n_categories for k in k_values):
        low = sorted(k for k in k_values if k < n_categories)
        notes.append(
            f"cluster counts {low} are below the {n_categories} distinct alert categories; "
            "one cluster may then cover several categories"
        )
    rows = []
    for k in k_values:
        cmodel = kmeans_fit(
            mat, int(k), cluster_seed, max_iter=kmeans_max_iter, binary=binary, normalize=normalize
        )
        seq = sequence_from_matrix(mat, cmodel)
        train, test = split_sequence(seq, train_len)
        model = _train_on(train, n_states, int(k), hmm_seed, max_iter, tol)
        rows.append((int(k), evaluate(model, test, train, horizon)))
    return SweepReport(
        parameter="clusters",
        rows=tuple(rows),
        config={
            "n_states": n_states,
            "train_len": train_len,
            "seed": seed,
            "horizon": horizon,
            "n_categories": n_categories,
            "notes": notes,
        },
    )


def sweep_horizon(model: Hmm, test, context, horizons: list[int]) -> SweepReport:
    """Accuracy per forecast horizon on one fixed trained model."""
    if not horizons:
        raise ValueError("horizons must be non-empty")
    rows = [(int(h), evaluate(model, test, context, int(h))) for h in horizons]
    return SweepReport(
        parameter="horizon",
        rows=tuple(rows),
        config={"n_states": model.n_states, "n_symbols": model.n_symbols},
    )


def sample_hmm(model: Hmm, length: int, seed: int) -> np.ndarray:
    """Ancestral sampling from (init, trans, emit); deterministic under seed."""
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random((2, length))
    cum_trans = np.cumsum(model.trans, axis=1)
    cum_emit = np.cumsum(model.emit, axis=1)
    cum_init = np.cumsum(model.init)
    return _kernels.sample_symbols(cum_trans, cum_emit, cum_init, u[0], u[1])


def make_peaked_hmm(n_states: int, n_symbols: int, peak: float = 0.9) -> Hmm:
    """Deterministically built cyclic model with peaked rows.

    State i moves to state (i+1) mod N and emits symbol (i mod M) with
    probability `peak`; the remainder spreads uniformly.  Useful as a
    planted generator whose sequences are learnable but noisy.
    """
    if n_states < 1 or n_symbols < 1:
        raise ValueError("n_states and n_symbols must be >= 1")
    if not 0.0 < peak <= 1.0:
        raise ValueError("peak must be in (0, 1]")
    trans = np.full((n_states, n_states), (1.0 - peak) / max(n_states - 1, 1))
    emit = np.full((n_states, n_symbols), (1.0 - peak) / max(n_symbols - 1, 1))
    for i in range(n_states):
        trans[i, (i + 1) % n_states] = peak if n_states > 1 else 1.0
        emit[i, i % n_symbols] = peak if n_symbols > 1 else 1.0
    trans /= trans.sum(axis=1, keepdims=True)
    emit /= emit.sum(axis=1, keepdims=True)
    init = np.full(n_states, 1.0 / n_states)
    return Hmm(trans=trans, emit=emit, init=init, meta={"kind": "peaked-cycle", "peak": peak})
