"""Command-line interface.

Subcommands mirror the pipeline stages (ingest, bow build, cluster
fit/assign/describe, hmm train/predict, eval run/sweep/synth, pipeline
run) so any stage can run standalone on its file artifacts.  Exit codes:
0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bow import Vocabulary, build_vocabulary, count_matrix
from .cluster import ClusterModel, describe_cluster, kmeans_fit, sequence_from_matrix
from .errors import AlertPredictError
from .evaluate import (
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
from .hmm import DEFAULT_MAX_ITER, DEFAULT_TOL, Hmm, baum_welch, init_random
from .ingest import FORMATS, deduplicate, parse_alert_file, write_alert_file
from .pipeline import (
    OUT_DIR_ENV,
    PipelineConfig,
    load_sequence,
    predict_command,
    run_pipeline,
    save_sequence,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this artifact reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_values(spec: str) -> list[int]:
    """Parse a sweep value spec: "a..b", "a..b:step", or "a,b,c"."""
    if ".." in spec:
        start_text, rest = spec.split("..", 1)
        if ":" in rest:
            stop_text, step_text = rest.split(":", 1)
            step = int(step_text)
        else:
            stop_text, step = rest, 1
        if step < 1:
            raise ValueError(f"step must be >= 1 in {spec!r}")
        return list(range(int(start_text), int(stop_text) + 1, step))
    return [int(x) for x in spec.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alertpredict", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="normalize an alert log into a canonical file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=FORMATS, help="input format (default: by extension)")
    p.add_argument("--out-format", choices=FORMATS, help="output format (default: by extension)")
    p.add_argument("--no-dedup", action="store_true", help="keep duplicate alerts")
    p.set_defaults(func=_cmd_ingest)

    bow = sub.add_parser("bow", help="bag-of-words vocabulary").add_subparsers(
        dest="subcommand", required=True, parser_class=_Parser
    )
    p = bow.add_parser("build", help="build a vocabulary from a training log")
    p.add_argument("log")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=FORMATS)
    p.set_defaults(func=_cmd_bow_build)

    cluster = sub.add_parser("cluster", help="k-means over alert vectors").add_subparsers(
        dest="subcommand", required=True, parser_class=_Parser
    )
    p = cluster.add_parser("fit", help="fit cluster centroids")
    p.add_argument("log")
    p.add_argument("--vocab", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--bow-binary", action="store_true", help="presence instead of counts")
    p.add_argument("--normalize-l2", action="store_true", help="L2-normalize vectors")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_cluster_fit)

    p = cluster.add_parser("assign", help="map alerts to cluster ids")
    p.add_argument("log")
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_cluster_assign)

    p = cluster.add_parser("describe", help="dominant tokens of one cluster")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=_cmd_cluster_describe)

    hmm = sub.add_parser("hmm", help="hidden Markov model").add_subparsers(
        dest="subcommand", required=True, parser_class=_Parser
    )
    p = hmm.add_parser("train", help="train on a symbol sequence file")
    p.add_argument("sequence")
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--train-len", type=int, help="train on only the first N symbols")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_hmm_train)

    p = hmm.add_parser("predict", help="forecast the next alert clusters for a context log")
    p.add_argument("context_log")
    p.add_argument("--hmm", required=True)
    p.add_argument("--model", required=True, help="cluster model path")
    p.add_argument("--vocab", required=True)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--tokens", type=int, default=8, help="tokens shown per cluster")
    p.add_argument("--posterior", action="store_true", help="use the posterior-averaged variant")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("-o", "--output", help="also write the forecast as JSON")
    p.set_defaults(func=_cmd_hmm_predict)

    ev = sub.add_parser("eval", help="accuracy evaluation and sweeps").add_subparsers(
        dest="subcommand", required=True, parser_class=_Parser
    )
    p = ev.add_parser("run", help="evaluate one trained model on a sequence file")
    p.add_argument("sequence")
    p.add_argument("--hmm", required=True)
    p.add_argument("--train-len", type=int, required=True)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--aggregate", action="store_true", help="score every step, not just the last")
    p.add_argument("--window", type=int, help="bound the Viterbi context length")
    p.add_argument("-o", "--output", help="write the result as JSON")
    p.set_defaults(func=_cmd_eval_run)

    p = ev.add_parser("sweep", help="vary one parameter and tabulate accuracy")
    p.add_argument("data", help="sequence file (clusters param: alert log)")
    p.add_argument(
        "--param", required=True, choices=("states", "train-len", "clusters", "horizon")
    )
    p.add_argument("--values", required=True, help='e.g. "2..10", "500..3500:500", "5,10,20"')
    p.add_argument("--train-len", type=int)
    p.add_argument("--states", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--k", type=int, help="symbol count override for sequence inputs")
    p.add_argument("--vocab", help="vocabulary path (clusters param only)")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--bow-binary", action="store_true")
    p.add_argument("--normalize-l2", action="store_true")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--csv", help="write the report as CSV (default: print)")
    p.add_argument("--json", dest="json_out", help="write the report as JSON")
    p.set_defaults(func=_cmd_eval_sweep)

    p = ev.add_parser("synth", help="sample a synthetic sequence from a seeded model")
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--symbols", type=int, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--peak", type=float, help="use a peaked cyclic generator instead of random")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model-out", help="also save the generating model")
    p.set_defaults(func=_cmd_eval_synth)

    pl = sub.add_parser("pipeline", help="full reproducible runs").add_subparsers(
        dest="subcommand", required=True, parser_class=_Parser
    )
    p = pl.add_parser("run", help="run the whole pipeline from a config or manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help=f"output directory (default: config value or ${OUT_DIR_ENV})")
    p.add_argument("--k", type=int)
    p.add_argument("--states", type=int)
    p.add_argument("--train-len", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizons", help='override horizons, e.g. "1..5"')
    p.add_argument("--sweeps", action="store_true", help="emit the full sweep table set")
    p.set_defaults(func=_cmd_pipeline_run)

    return parser


def _cmd_ingest(args) -> int:
    log = parse_alert_file(args.input, args.format)
    if not args.no_dedup:
        log = deduplicate(log)
    write_alert_file(log, args.output, args.out_format)
    print(f"wrote {len(log)} alerts to {args.output}")
    return 0


def _cmd_bow_build(args) -> int:
    log = deduplicate(parse_alert_file(args.log, args.format))
    vocab = build_vocabulary(log)
    vocab.save(args.output)
    print(f"vocabulary of {len(vocab)} tokens from {len(log)} alerts -> {args.output}")
    return 0


def _cmd_cluster_fit(args) -> int:
    log = deduplicate(parse_alert_file(args.log, args.format))
    vocab = Vocabulary.load(args.vocab)
    mat = count_matrix(log, vocab, binary=args.bow_binary)
    model = kmeans_fit(
        mat,
        args.k,
        args.seed,
        max_iter=args.max_iter,
        binary=args.bow_binary,
        normalize=args.normalize_l2,
    )
    model.save(args.output)
    print(f"fitted k={model.k} (inertia {model.inertia:.6g}) -> {args.output}")
    return 0


def _cmd_cluster_assign(args) -> int:
    log = deduplicate(parse_alert_file(args.log, args.format))
    vocab = Vocabulary.load(args.vocab)
    model = ClusterModel.load(args.model)
    mat = count_matrix(log, vocab, binary=model.binary)
    seq = sequence_from_matrix(mat, model)
    save_sequence(args.output, seq, model.k)
    print(f"assigned {len(seq)} alerts -> {args.output}")
    return 0


def _cmd_cluster_describe(args) -> int:
    model = ClusterModel.load(args.model)
    vocab = Vocabulary.load(args.vocab)
    for token, weight in describe_cluster(model, vocab, args.id, args.top):
        print(f"{token}\t{weight:.6g}")
    return 0


def _cmd_hmm_train(args) -> int:
    symbols, n_symbols = load_sequence(args.sequence)
    if args.train_len is not None:
        symbols, _ = split_sequence(symbols, args.train_len)
    start = init_random(args.states, n_symbols, args.seed)
    model, trace = baum_welch(start, symbols, max_iter=args.max_iter, tol=args.tol)
    model.save(args.output)
    print(
        f"trained {args.states} states / {n_symbols} symbols in {len(trace) - 1} iterations "
        f"(log-likelihood {trace[-1]:.6f}) -> {args.output}"
    )
    return 0


def _cmd_hmm_predict(args) -> int:
    result = predict_command(
        args.vocab,
        args.model,
        args.hmm,
        args.context_log,
        horizon=args.horizon,
        top_n=args.top,
        format=args.format,
        posterior=args.posterior,
        token_count=args.tokens,
    )
    for step in result["steps"]:
        print(f"step {step['step']}:")
        for pred in step["predictions"]:
            tokens = " ".join(t["token"] for t in pred["top_tokens"])
            print(f"  cluster {pred['cluster']}  p={pred['probability']:.4f}  [{tokens}]")
    if args.output:
        Path(args.output).write_text(
            json.dumps(result, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_eval_run(args) -> int:
    symbols, _ = load_sequence(args.sequence)
    model = Hmm.load(args.hmm)
    train, test = split_sequence(symbols, args.train_len)
    acc = evaluate(
        model, test, train, args.horizon, aggregate=args.aggregate, window=args.window
    )
    print(
        f"horizon {args.horizon}: level1={acc.level1:.4f} level2={acc.level2:.4f} "
        f"level3={acc.level3:.4f} n={acc.n_predictions}"
    )
    if args.output:
        Path(args.output).write_text(
            json.dumps(acc.as_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_eval_sweep(args) -> int:
    values = parse_values(args.values)
    if args.param == "clusters":
        if not args.vocab:
            raise ValueError("--vocab is required for --param clusters")
        if args.train_len is None:
            raise ValueError("--train-len is required for --param clusters")
        log = deduplicate(parse_alert_file(args.data, args.format))
        vocab = Vocabulary.load(args.vocab)
        report = sweep_clusters(
            log,
            vocab,
            values,
            args.states,
            args.seed,
            train_len=args.train_len,
            horizon=args.horizon,
            binary=args.bow_binary,
            normalize=args.normalize_l2,
            max_iter=args.max_iter,
            tol=args.tol,
        )
    else:
        symbols, n_symbols = load_sequence(args.data)
        m = args.k or n_symbols
        if args.param == "states":
            if args.train_len is None:
                raise ValueError("--train-len is required for --param states")
            report = sweep_states(
                symbols,
                values,
                n_symbols=m,
                train_len=args.train_len,
                seed=args.seed,
                horizon=args.horizon,
                max_iter=args.max_iter,
                tol=args.tol,
            )
        elif args.param == "train-len":
            report = sweep_training_length(
                symbols,
                values,
                args.states,
                args.seed,
                n_symbols=m,
                horizon=args.horizon,
                max_iter=args.max_iter,
                tol=args.tol,
            )
        else:  # horizon
            if args.train_len is None:
                raise ValueError("--train-len is required for --param horizon")
            train, test = split_sequence(symbols, args.train_len)
            start = init_random(args.states, m, derive_seed(args.seed, "hmm-init"))
            model, _ = baum_welch(start, train, max_iter=args.max_iter, tol=args.tol)
            report = sweep_horizon(model, test, train, values)
    if args.csv:
        Path(args.csv).write_text(report.to_csv_text(), encoding="utf-8")
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(report.to_json_obj(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    if not args.csv and not args.json_out:
        sys.stdout.write(report.to_csv_text())
    return 0


def _cmd_eval_synth(args) -> int:
    if args.peak is not None:
        model = make_peaked_hmm(args.states, args.symbols, args.peak)
    else:
        model = init_random(args.states, args.symbols, derive_seed(args.seed, "synth-model"))
    symbols = sample_hmm(model, args.length, derive_seed(args.seed, "synth-sample"))
    save_sequence(args.output, symbols, args.symbols)
    if args.model_out:
        model.save(args.model_out)
    print(f"sampled {args.length} symbols -> {args.output}")
    return 0


def _cmd_pipeline_run(args) -> int:
    cfg = PipelineConfig.from_json(args.config, out_dir=args.out)
    overrides = {}
    if args.k is not None:
        overrides["k"] = args.k
    if args.states is not None:
        overrides["n_states"] = args.states
    if args.train_len is not None:
        overrides["train_len"] = args.train_len
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.horizons:
        overrides["horizons"] = tuple(parse_values(args.horizons))
    if args.sweeps:
        overrides["sweeps"] = True
    if overrides:
        cfg = replace(cfg, **overrides)
    manifest = run_pipeline(cfg)
    print(f"pipeline complete: {len(manifest['artifacts'])} artifacts in {cfg.out_dir}")
    for note in manifest["notes"]:
        print(f"note: {note}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AlertPredictError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
