"""k-means clustering of alert count vectors.

Alerts are grouped in BoW count space with Lloyd's algorithm (seeded
k-means++ initialization); each alert's cluster ID becomes one symbol of
the observation sequence the HMM is trained on.  All tie-breaks go to the
lowest cluster id so fits and assignments are fully deterministic for a
fixed seed.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bow import CountVector, Vocabulary, count_matrix
from .errors import DimensionMismatchError
from .ingest import AlertLog

_CHUNK = 512  # rows per distance-matrix block, bounds peak memory


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        mat = vectors.astype(np.float64, copy=False)
    else:
        rows = [v.counts if isinstance(v, CountVector) else np.asarray(v) for v in vectors]
        mat = np.asarray(rows, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix of vectors, got ndim={mat.ndim}")
    return mat


def _l2_normalize(mat: np.ndarray) -> np.ndarray:
    norms = np.sqrt((mat * mat).sum(axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    return mat / norms


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, chunked to bound memory."""
    n = points.shape[0]
    out = np.empty((n, centroids.shape[0]), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        block = points[start : start + _CHUNK]
        diff = block[:, None, :] - centroids[None, :, :]
        out[start : start + _CHUNK] = (diff * diff).sum(axis=2)
    return out


@dataclass(frozen=True)
class ClusterModel:
    """Fitted k-means centroids plus the vectorization flags used at fit time."""

    k: int
    centroids: np.ndarray
    vocab_size: int
    binary: bool = False
    normalize: bool = False
    inertia_trace: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.shape != (self.k, self.vocab_size):
            raise ValueError(
                f"centroids shape {c.shape} != (k={self.k}, vocab_size={self.vocab_size})"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        object.__setattr__(self, "centroids", c)

    @property
    def inertia(self) -> float:
        return self.inertia_trace[-1] if self.inertia_trace else float("nan")

    def save(self, path: str | Path) -> None:
        obj = {
            "k": self.k,
            "vocab_size": self.vocab_size,
            "binary": self.binary,
            "normalize": self.normalize,
            "centroids": self.centroids.tolist(),
            "inertia_trace": list(self.inertia_trace),
        }
        Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ClusterModel":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            k=obj["k"],
            centroids=np.asarray(obj["centroids"], dtype=np.float64),
            vocab_size=obj["vocab_size"],
            binary=obj.get("binary", False),
            normalize=obj.get("normalize", False),
            inertia_trace=tuple(obj.get("inertia_trace", ())),
        )


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    if k == 1:
        return centroids
    diff = points - centroids[0]
    d2 = (diff * diff).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        # k <= distinct points guarantees some point is still uncovered
        probs = d2 / total
        pick = int(rng.choice(n, p=probs))
        centroids[j] = points[pick]
        diff = points - centroids[j]
        d2 = np.minimum(d2, (diff * diff).sum(axis=1))
    return centroids


def kmeans_fit(
    vectors,
    k: int,
    seed: int,
    max_iter: int = 100,
    *,
    binary: bool = False,
    normalize: bool = False,
) -> ClusterModel:
    """Fit k-means with Lloyd's algorithm and seeded k-means++ init.

    Stops when assignments stop changing or after max_iter sweeps.  If a
    cluster empties out mid-run its centroid is reseated at the point
    farthest from its currently assigned centroid.  The per-iteration
    inertia trace is stored on the model and is non-increasing.

    `binary`/`normalize` record how the input vectors were produced and
    transformed, so later assignments apply the same treatment.
    """
    points = _as_matrix(vectors)
    n = points.shape[0]
    if n == 0:
        raise ValueError("cannot fit k-means on an empty input")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if normalize:
        points = _l2_normalize(points)
    n_distinct = np.unique(points, axis=0).shape[0]
    if not 1 <= k <= n_distinct:
        raise ValueError(f"k={k} must be between 1 and the distinct-vector count {n_distinct}")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    centroids, trace = _lloyd(points, centroids, max_iter)

    return ClusterModel(
        k=k,
        centroids=centroids,
        vocab_size=points.shape[1],
        binary=binary,
        normalize=normalize,
        inertia_trace=tuple(trace),
    )


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int) -> tuple[np.ndarray, list[float]]:
    """Lloyd iterations from given starting centroids (mutates a copy).

    Empty clusters are reseated at the point farthest from its assigned
    centroid, which strictly lowers the objective, so the recorded inertia
    stays non-increasing even through repairs.
    """
    n = points.shape[0]
    k = centroids.shape[0]
    centroids = centroids.astype(np.float64, copy=True)
    prev_assign: np.ndarray | None = None
    trace: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_distances(points, centroids)
        assign = d2.argmin(axis=1)
        assigned_d = d2[np.arange(n), assign]

        counts = np.bincount(assign, minlength=k)
        empties = deque(int(c) for c in np.flatnonzero(counts == 0))
        while empties:
            cid = empties.popleft()
            far = int(assigned_d.argmax())
            old = int(assign[far])
            centroids[cid] = points[far]
            assign[far] = cid
            assigned_d[far] = 0.0
            counts[old] -= 1
            counts[cid] += 1
            if counts[old] == 0:
                empties.append(old)

        trace.append(float(assigned_d.sum()))
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
        for c in range(k):
            centroids[c] = points[assign == c].mean(axis=0)

    return centroids, trace


def assign(vector, model: ClusterModel) -> int:
    """Best-matching cluster id for one vector (ties -> lowest id)."""
    v = vector.counts if isinstance(vector, CountVector) else np.asarray(vector)
    v = v.astype(np.float64, copy=False).ravel()
    if v.shape[0] != model.vocab_size:
        raise DimensionMismatchError(
            f"vector length {v.shape[0]} != model vocab_size {model.vocab_size}"
        )
    if model.normalize:
        v = _l2_normalize(v.reshape(1, -1))[0]
    diff = model.centroids - v
    return int((diff * diff).sum(axis=1).argmin())


def alerts_to_sequence(log: AlertLog, vocab: Vocabulary, model: ClusterModel) -> np.ndarray:
    """Map each alert to its cluster id, preserving temporal order."""
    if len(vocab) != model.vocab_size:
        raise DimensionMismatchError(
            f"vocabulary size {len(vocab)} != model vocab_size {model.vocab_size}"
        )
    if len(log) == 0:
        return np.empty(0, dtype=np.int64)
    mat = count_matrix(log, vocab, binary=model.binary)
    return sequence_from_matrix(mat, model)


def sequence_from_matrix(mat: np.ndarray, model: ClusterModel) -> np.ndarray:
    """Assign a whole count matrix at once (rows already vectorized)."""
    points = _as_matrix(mat)
    if points.shape[1] != model.vocab_size:
        raise DimensionMismatchError(
            f"vector length {points.shape[1]} != model vocab_size {model.vocab_size}"
        )
    if model.normalize:
        points = _l2_normalize(points)
    return _sq_distances(points, model.centroids).argmin(axis=1).astype(np.int64)


def describe_cluster(
    model: ClusterModel, vocab: Vocabulary, cluster_id: int, top_n: int = 10
) -> list[tuple[str, float]]:
    """Decode a cluster into its highest-weight vocabulary tokens.

    This is the human-readable face of a prediction: the dominant tokens
    name the source/destination octets, alert type and category the
    cluster stands for.
    """
    if not 0 <= cluster_id < model.k:
        raise ValueError(f"cluster id {cluster_id} out of range [0, {model.k})")
    if len(vocab) != model.vocab_size:
        raise DimensionMismatchError(
            f"vocabulary size {len(vocab)} != model vocab_size {model.vocab_size}"
        )
    if top_n <= 0:
        return []
    weights = model.centroids[cluster_id]
    order = np.argsort(-weights, kind="stable")[:top_n]
    return [(vocab.tokens[i], float(weights[i])) for i in order]
