"""Next-alert prediction for IDS alert streams.

Alerts are normalized and deduplicated, flattened into bag-of-words count
vectors, grouped with k-means, and the resulting cluster-ID sequence
trains a discrete hidden Markov model that forecasts the next alert
cluster (or, in category mode, the next alert category).
"""

__version__ = "0.1.0"

from .bow import CountVector, Vocabulary, build_vocabulary, count_matrix, tokenize_alert, vectorize
from .cluster import ClusterModel, alerts_to_sequence, assign, describe_cluster, kmeans_fit
from .errors import (
    AlertPredictError,
    DimensionMismatchError,
    MalformedLineError,
    PipelineStageError,
)
from .evaluate import (
    CategoryCodec,
    LevelAccuracy,
    SweepReport,
    categories_to_sequence,
    derive_seed,
    evaluate,
    make_peaked_hmm,
    sample_hmm,
    split_sequence,
    sweep_clusters,
    sweep_horizon,
    sweep_states,
    sweep_training_length,
)
from .hmm import (
    Hmm,
    PredictionDistribution,
    baum_welch,
    init_random,
    log_likelihood,
    posterior_predict,
    predict_multi,
    predict_next,
    rank_symbols,
    viterbi,
)
from .ingest import Alert, AlertLog, deduplicate, parse_alert_file, parse_snort_fast, write_alert_file
from .pipeline import PipelineConfig, predict_command, run_pipeline

__all__ = [
    "Alert",
    "AlertLog",
    "AlertPredictError",
    "CategoryCodec",
    "ClusterModel",
    "CountVector",
    "DimensionMismatchError",
    "Hmm",
    "LevelAccuracy",
    "MalformedLineError",
    "PipelineConfig",
    "PipelineStageError",
    "PredictionDistribution",
    "SweepReport",
    "Vocabulary",
    "alerts_to_sequence",
    "assign",
    "baum_welch",
    "build_vocabulary",
    "categories_to_sequence",
    "count_matrix",
    "deduplicate",
    "derive_seed",
    "describe_cluster",
    "evaluate",
    "init_random",
    "kmeans_fit",
    "log_likelihood",
    "make_peaked_hmm",
    "parse_alert_file",
    "parse_snort_fast",
    "posterior_predict",
    "predict_command",
    "predict_multi",
    "predict_next",
    "rank_symbols",
    "run_pipeline",
    "sample_hmm",
    "split_sequence",
    "sweep_clusters",
    "sweep_horizon",
    "sweep_states",
    "sweep_training_length",
    "tokenize_alert",
    "vectorize",
    "viterbi",
    "write_alert_file",
]
