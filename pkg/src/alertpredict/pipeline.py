"""End-to-end pipeline: ingest -> vocabulary -> clustering -> HMM -> reports.

A run is driven by one config, writes every artifact (vocabulary, cluster
model, trained models, sequences, accuracy reports) into an output
directory, and records a manifest with all parameters, derived seeds and
artifact hashes.  Replaying a manifest reproduces every output byte for
byte; files in mid-write carry a .partial suffix so an aborted run is
recognizable.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bow import Vocabulary, build_vocabulary, count_matrix
from .cluster import ClusterModel, alerts_to_sequence, describe_cluster, kmeans_fit, sequence_from_matrix
from .errors import AlertPredictError, DimensionMismatchError, PipelineStageError
from .evaluate import (
    SweepReport,
    categories_to_sequence,
    derive_seed,
    split_sequence,
    sweep_clusters,
    sweep_horizon,
    sweep_states,
    sweep_training_length,
)
from .hmm import DEFAULT_MAX_ITER, DEFAULT_TOL, Hmm, baum_welch, init_random, posterior_predict, predict_multi
from .ingest import deduplicate, parse_alert_file

# Reference sweep ranges for the full experiment table set.
SWEEP_STATES_VALUES = tuple(range(2, 11))
SWEEP_TRAIN_LENGTHS = tuple(range(500, 3501, 500))
SWEEP_CLUSTER_VALUES = tuple(range(5, 51, 5))
SWEEP_CATEGORY_STATES = (2, 4, 6, 8, 10)

OUT_DIR_ENV = "ALERTPREDICT_OUT"


@dataclass(frozen=True)
class PipelineConfig:
    """All knobs of one reproducible run.

    Defaults match the reference operating point: 10 clusters, 8 hidden
    states, 2500 training points, horizons 1-5.
    """

    train_log: str
    out_dir: str
    test_log: str | None = None
    format: str | None = None
    k: int = 10
    n_states: int = 8
    train_len: int = 2500
    horizons: tuple[int, ...] = (1, 2, 3, 4, 5)
    seed: int = 0
    bow_binary: bool = False
    normalize_l2: bool = False
    refit_clusters: bool = False
    sweeps: bool = False
    kmeans_max_iter: int = 100
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    levels: int = 3

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        if self.train_len < 1:
            raise ValueError("train_len must be >= 1")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ValueError("horizons must be a non-empty list of integers >= 1")
        if self.levels != 3:
            raise ValueError("levels is fixed at 3")
        if not self.train_log:
            raise ValueError("train_log is required")
        if not self.out_dir:
            raise ValueError("out_dir is required")

    def to_json_obj(self) -> dict:
        # out_dir is runtime-only: a replay supplies its own destination.
        return {
            "train_log": self.train_log,
            "test_log": self.test_log,
            "format": self.format,
            "k": self.k,
            "n_states": self.n_states,
            "train_len": self.train_len,
            "horizons": list(self.horizons),
            "seed": self.seed,
            "bow_binary": self.bow_binary,
            "normalize_l2": self.normalize_l2,
            "refit_clusters": self.refit_clusters,
            "sweeps": self.sweeps,
            "kmeans_max_iter": self.kmeans_max_iter,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "levels": self.levels,
        }

    @classmethod
    def from_json(cls, path: str | Path, out_dir: str | None = None) -> "PipelineConfig":
        """Load a config file; a manifest (with a "config" key) also works."""
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if "config" in obj and isinstance(obj["config"], dict):
            obj = obj["config"]
        known = {
            "train_log",
            "test_log",
            "format",
            "k",
            "n_states",
            "train_len",
            "horizons",
            "seed",
            "bow_binary",
            "normalize_l2",
            "refit_clusters",
            "sweeps",
            "kmeans_max_iter",
            "max_iter",
            "tol",
            "levels",
        }
        unknown = set(obj) - known - {"out_dir"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {key: obj[key] for key in known if key in obj}
        if "horizons" in kwargs:
            kwargs["horizons"] = tuple(int(h) for h in kwargs["horizons"])
        resolved_out = out_dir or obj.get("out_dir") or os.environ.get(OUT_DIR_ENV)
        if not resolved_out:
            raise ValueError("no output directory: pass one or set " + OUT_DIR_ENV)
        return cls(out_dir=str(resolved_out), **kwargs)


def _atomic_write(path: Path, writer) -> None:
    """Write via a .partial sibling, renaming only once complete."""
    partial = path.with_name(path.name + ".partial")
    writer(partial)
    partial.replace(path)


def _write_json(path: Path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    _atomic_write(path, lambda p: p.write_text(text, encoding="utf-8"))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_sequence(path: str | Path, symbols: np.ndarray, n_symbols: int) -> None:
    obj = {"n_symbols": int(n_symbols), "symbols": [int(s) for s in symbols]}
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_sequence(path: str | Path) -> tuple[np.ndarray, int]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return np.asarray(obj["symbols"], dtype=np.int64), int(obj["n_symbols"])


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def _feasible_horizons(horizons, test_len: int, notes: list[str], label: str) -> list[int]:
    keep = [h for h in horizons if h < test_len]
    dropped = [h for h in horizons if h >= test_len]
    if dropped:
        notes.append(f"{label}: dropped horizons {dropped} (test segment has {test_len} symbols)")
    if not keep:
        raise ValueError(f"no feasible horizon for a test segment of {test_len} symbols")
    return keep


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage and return the manifest (also written to disk)."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise AlertPredictError(
            f"output directory {out} is locked by another run (remove {lock} if stale)"
        ) from None
    try:
        marker = out / "RUNNING.partial"
        marker.write_text("", encoding="utf-8")
        manifest = _run_stages(cfg, out)
        marker.unlink()
        return manifest
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


def _run_stages(cfg: PipelineConfig, out: Path) -> dict:
    artifacts: dict[str, str] = {}
    notes: list[str] = []

    def emit(name: str, writer) -> None:
        path = out / name
        _atomic_write(path, writer)
        artifacts[name] = _sha256(path)

    with _stage("ingest-train"):
        train_alerts = deduplicate(parse_alert_file(cfg.train_log, cfg.format))
        if len(train_alerts) == 0:
            raise ValueError(f"training log {cfg.train_log} has no alerts")
    with _stage("ingest-test"):
        if cfg.test_log:
            eval_alerts = deduplicate(parse_alert_file(cfg.test_log, cfg.format))
            if len(eval_alerts) == 0:
                raise ValueError(f"test log {cfg.test_log} has no alerts")
        else:
            eval_alerts = train_alerts
            notes.append("no test log given; the training log is evaluated")

    with _stage("bow"):
        vocab = build_vocabulary(train_alerts)
        emit("vocabulary.json", vocab.save)

    seed_cluster = derive_seed(cfg.seed, "cluster")
    with _stage("cluster"):
        fit_alerts = eval_alerts if (cfg.refit_clusters and cfg.test_log) else train_alerts
        fit_mat = count_matrix(fit_alerts, vocab, binary=cfg.bow_binary)
        cmodel = kmeans_fit(
            fit_mat,
            cfg.k,
            seed_cluster,
            max_iter=cfg.kmeans_max_iter,
            binary=cfg.bow_binary,
            normalize=cfg.normalize_l2,
        )
        emit("cluster_model.json", cmodel.save)

    with _stage("sequence"):
        eval_mat = count_matrix(eval_alerts, vocab, binary=cfg.bow_binary)
        cluster_seq = sequence_from_matrix(eval_mat, cmodel)
        emit("sequence_cluster.json", lambda p: save_sequence(p, cluster_seq, cfg.k))
        codec, category_seq = categories_to_sequence(eval_alerts)
        emit("category_codec.json", codec.save)
        emit("sequence_category.json", lambda p: save_sequence(p, category_seq, len(codec)))

    with _stage("hmm-cluster"):
        train_c, test_c = split_sequence(cluster_seq, cfg.train_len)
        h0 = init_random(cfg.n_states, cfg.k, derive_seed(cfg.seed, "hmm-cluster"))
        hmm_cluster, _ = baum_welch(h0, train_c, max_iter=cfg.max_iter, tol=cfg.tol)
        emit("hmm_cluster.json", hmm_cluster.save)

    with _stage("hmm-category"):
        train_g, test_g = split_sequence(category_seq, cfg.train_len)
        h0c = init_random(cfg.n_states, len(codec), derive_seed(cfg.seed, "hmm-category"))
        hmm_category, _ = baum_welch(h0c, train_g, max_iter=cfg.max_iter, tol=cfg.tol)
        emit("hmm_category.json", hmm_category.save)

    def emit_report(name: str, report: SweepReport) -> None:
        emit(f"{name}.csv", lambda p: report.save(csv_path=p))
        emit(f"{name}.json", lambda p: report.save(json_path=p))

    with _stage("eval-cluster"):
        horizons = _feasible_horizons(cfg.horizons, len(test_c), notes, "cluster mode")
        emit_report("report_horizon_cluster", sweep_horizon(hmm_cluster, test_c, train_c, horizons))

    with _stage("eval-category"):
        horizons_g = _feasible_horizons(cfg.horizons, len(test_g), notes, "category mode")
        emit_report(
            "report_horizon_category", sweep_horizon(hmm_category, test_g, train_g, horizons_g)
        )

    if cfg.sweeps:
        _run_sweeps(cfg, cluster_seq, category_seq, eval_alerts, vocab, codec, notes, emit_report)

    manifest = {
        "config": cfg.to_json_obj(),
        "seeds": {
            "master": cfg.seed,
            "cluster": seed_cluster,
            "hmm-cluster": derive_seed(cfg.seed, "hmm-cluster"),
            "hmm-category": derive_seed(cfg.seed, "hmm-category"),
        },
        "artifacts": artifacts,
        "notes": notes,
    }
    with _stage("manifest"):
        _write_json(out / "manifest.json", manifest)
    return manifest


def _run_sweeps(cfg, cluster_seq, category_seq, eval_alerts, vocab, codec, notes, emit_report):
    """The four parameter sweeps in cluster mode plus the two category-mode ones."""
    max_len = len(cluster_seq)

    with _stage("sweep-states-cluster"):
        emit_report(
            "report_states_cluster",
            sweep_states(
                cluster_seq,
                list(SWEEP_STATES_VALUES),
                n_symbols=cfg.k,
                train_len=cfg.train_len,
                seed=cfg.seed,
                max_iter=cfg.max_iter,
                tol=cfg.tol,
            ),
        )

    with _stage("sweep-train-len-cluster"):
        lengths = [length for length in SWEEP_TRAIN_LENGTHS if length < max_len - 1]
        if lengths:
            emit_report(
                "report_train_len_cluster",
                sweep_training_length(
                    cluster_seq,
                    lengths,
                    cfg.n_states,
                    cfg.seed,
                    n_symbols=cfg.k,
                    max_iter=cfg.max_iter,
                    tol=cfg.tol,
                ),
            )
        else:
            notes.append(
                f"training-length sweep skipped: sequence of {max_len} symbols is shorter "
                f"than the smallest reference length {SWEEP_TRAIN_LENGTHS[0]}"
            )

    with _stage("sweep-clusters"):
        mat = count_matrix(eval_alerts, vocab, binary=cfg.bow_binary)
        n_distinct = np.unique(mat, axis=0).shape[0]
        k_values = [k for k in SWEEP_CLUSTER_VALUES if k <= n_distinct]
        if k_values:
            emit_report(
                "report_clusters_cluster",
                sweep_clusters(
                    eval_alerts,
                    vocab,
                    k_values,
                    cfg.n_states,
                    cfg.seed,
                    train_len=cfg.train_len,
                    binary=cfg.bow_binary,
                    normalize=cfg.normalize_l2,
                    kmeans_max_iter=cfg.kmeans_max_iter,
                    max_iter=cfg.max_iter,
                    tol=cfg.tol,
                ),
            )
        else:
            notes.append(
                f"cluster-count sweep skipped: only {n_distinct} distinct vectors available"
            )

    with _stage("sweep-states-category"):
        emit_report(
            "report_states_category",
            sweep_states(
                category_seq,
                list(SWEEP_CATEGORY_STATES),
                n_symbols=len(codec),
                train_len=cfg.train_len,
                seed=cfg.seed,
                max_iter=cfg.max_iter,
                tol=cfg.tol,
            ),
        )


def predict_command(
    vocab_path: str | Path,
    cluster_path: str | Path,
    hmm_path: str | Path,
    context_log_path: str | Path,
    horizon: int = 1,
    top_n: int = 3,
    *,
    format: str | None = None,
    posterior: bool = False,
    token_count: int = 8,
) -> dict:
    """Forecast the next alert clusters for an observed alert log.

    Returns, per forecast step, the top_n (cluster id, probability) pairs
    with each cluster decoded into its dominant vocabulary tokens — the
    source/destination, alert type, and category evidence a responder
    would act on.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    vocab = Vocabulary.load(vocab_path)
    cmodel = ClusterModel.load(cluster_path)
    model = Hmm.load(hmm_path)
    if len(vocab) != cmodel.vocab_size:
        raise DimensionMismatchError(
            f"vocabulary size {len(vocab)} != cluster model vocab_size {cmodel.vocab_size}"
        )
    if cmodel.k != model.n_symbols:
        raise DimensionMismatchError(
            f"cluster count {cmodel.k} != HMM symbol count {model.n_symbols}"
        )
    log = deduplicate(parse_alert_file(context_log_path, format))
    seq = alerts_to_sequence(log, vocab, cmodel)
    if seq.shape[0] == 0:
        raise ValueError(f"context log {context_log_path} has no alerts")

    if posterior:
        dists = []
        working = seq
        for _ in range(horizon):
            dist = posterior_predict(model, working)
            dists.append(dist)
            working = np.append(working, dist.ranked[0])
    else:
        dists = predict_multi(model, seq, horizon)

    steps = []
    for step, dist in enumerate(dists, start=1):
        predictions = [
            {
                "cluster": cid,
                "probability": prob,
                "top_tokens": [
                    {"token": tok, "weight": w}
                    for tok, w in describe_cluster(cmodel, vocab, cid, token_count)
                ],
            }
            for cid, prob in dist.top(top_n)
        ]
        steps.append({"step": step, "predictions": predictions})
    return {
        "horizon": horizon,
        "top_n": top_n,
        "posterior": posterior,
        "context_length": int(seq.shape[0]),
        "steps": steps,
    }
