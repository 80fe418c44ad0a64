"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import lda as lda_mod
from . import model as model_mod
from . import runner
from . import synth
from . import textprep
from . import tfidf as tfidf_mod
from .corpus import load_dataset, load_program_map, save_dataset, split
from .errors import ConfigError, DataError, NumericalError
from .runner import ExperimentConfig


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="dataset file")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    parser.add_argument("--program-map", help="program->discipline CSV used to validate records")


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--model-id", type=int, help="feature-set model id (1..6)")
    parser.add_argument("--seed", type=int, help="base seed for all stages")
    parser.add_argument("--k-topics", type=int, help="number of topics")
    parser.add_argument("--dic", help="LIWC-format dictionary path (default: bundled mini dictionary)")
    parser.add_argument("--stopwords", help="stopword file path (default: bundled Dutch list)")
    parser.add_argument("--threshold", type=float, help="decision threshold on the margin (default 0)")


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        "model_id": getattr(args, "model_id", None),
        "seed": getattr(args, "seed", None),
        "k_topics": getattr(args, "k_topics", None),
        "dic_path": getattr(args, "dic", None),
        "stopwords_path": getattr(args, "stopwords", None),
        "decision_threshold": getattr(args, "threshold", None),
    }
    if getattr(args, "config", None):
        return ExperimentConfig.from_file(args.config, **overrides)
    present = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(ExperimentConfig(), **present).validate()


def _load(args: argparse.Namespace):
    program_map = load_program_map(args.program_map) if args.program_map else None
    return load_dataset(args.data, format=args.format, program_map=program_map)


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = synth.SynthConfig(
        n_records=args.n,
        dropout_rate=args.dropout_rate,
        text_signal=args.text_signal,
        structured_signal=args.structured_signal,
        seed=args.seed,
    )
    dataset = synth.generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_path = out / f"synthetic.{args.format}"
    save_dataset(dataset, data_path, format=args.format)
    synth.write_program_map(out / "program_map.csv")
    labels = dataset.labels()
    n_dropout = sum(1 for y in labels if y == 1)
    print(f"wrote {data_path} ({len(dataset)} records, {n_dropout} dropouts)")
    print(f"wrote {out / 'program_map.csv'}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    dataset = _load(args)
    n_labeled = sum(1 for r in dataset if r.label is not None)
    n_dropout = sum(1 for r in dataset if r.label == 1)
    lengths = [len(r.motivation_text.split()) for r in dataset]
    mean_len = sum(lengths) / len(lengths) if lengths else 0.0
    print(f"records: {len(dataset)}")
    print(f"labeled: {n_labeled} ({n_dropout} dropout, {n_labeled - n_dropout} retention)")
    print(f"mean motivation length: {mean_len:.1f} words")
    if args.out:
        save_dataset(dataset, args.out, format="jsonl")
        print(f"wrote normalized copy to {args.out}")
    return 0


def cmd_topics(args: argparse.Namespace) -> int:
    dataset = _load(args)
    stopwords = (
        textprep.load_stopwords(args.stopwords) if args.stopwords else textprep.bundled_stopwords()
    )
    docs = [
        textprep.prepare(r.id, r.motivation_text, stopwords)[0] for r in dataset
    ]
    vocab = tfidf_mod.build_vocabulary(docs, min_df=args.min_df)
    try:
        k_values = [int(k) for k in str(args.k_topics).split(",")]
    except ValueError as exc:
        raise ConfigError(f"--k-topics must be an integer or comma list: {args.k_topics!r}") from exc
    for k in k_values:
        state = lda_mod.fit(docs, vocab, k=k, sweeps=args.sweeps, seed=args.seed)
        summary = lda_mod.top_terms(state, args.top_n)
        print(f"== K = {k} (final log-likelihood {state.loglik_history[-1]:.1f})")
        for topic_id, topic in enumerate(summary.topics):
            print(f"topic {topic_id:2d}: " + ", ".join(term for term, _ in topic))
        print()
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    dataset = _load(args)
    train_ds, _ = split(dataset, config.train_fraction, config.split_seed)
    artifacts = runner.fit_artifacts(train_ds, config)
    blocks = runner.featurize(artifacts, train_ds, use_training_assignments=True)
    runner.save_artifacts(artifacts, args.out)
    print(f"fitted on {len(train_ds)} training records; artifacts in {args.out}")
    for name in runner.BLOCK_ORDER:
        if name in blocks:
            print(f"block {name}: {blocks[name].matrix.shape[1]} columns")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    dataset = _load(args)
    train_ds, _ = split(dataset, config.train_fraction, config.split_seed)
    artifacts = runner.fit_artifacts(train_ds, config)
    blocks = runner.featurize(artifacts, train_ds, use_training_assignments=True)
    x_train = runner.assemble_features(config, blocks)
    y_train = train_ds.labels()
    trained = model_mod.train(
        x_train,
        y_train,
        model_mod.class_weights(y_train),
        c=config.svm_c,
        epochs=config.svm_epochs,
        tol=config.svm_tol,
        seed=config.svm_seed,
        bias_scale=config.svm_bias_scale,
    )
    out = Path(args.out)
    runner.save_artifacts(artifacts, out)
    model_mod.save_model(trained, out / "model.svm")
    print(
        f"trained model {config.model_id} on {len(train_ds)} records "
        f"({x_train.n_cols} features, {trained.epochs_run} epochs, "
        f"objective {trained.final_objective:.4f})"
    )
    print(f"artifacts and model.svm in {out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    artifacts = runner.load_artifacts(args.artifacts)
    trained = model_mod.load_model(Path(args.model or Path(args.artifacts) / "model.svm"))
    dataset = _load(args)
    blocks = runner.featurize(artifacts, dataset)
    x = runner.assemble_features(artifacts.config, blocks)
    threshold = args.threshold if args.threshold is not None else artifacts.config.decision_threshold
    predictions, _ = model_mod.predict_many(trained, x, threshold)
    report = model_mod.evaluate(predictions, dataset.labels())
    print(runner.metrics_text(report))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    dataset = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_ids = list(range(1, 7)) if args.model_id is None else [args.model_id]
    reports = runner.run_all(dataset, config, model_ids)
    for report in reports:
        stem = f"report_model{report.config.model_id}"
        (out / f"{stem}.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (out / f"{stem}.txt").write_text(report.render_text(), encoding="utf-8")
        (out / f"{stem}_coefficients.tsv").write_text(
            report.coefficients_tsv(), encoding="utf-8"
        )
    table = runner.summary_table(reports)
    (out / "summary.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    print(f"reports written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motivmine",
        description="Dropout prediction from pre-enrollment motivation statements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=7060)
    p.add_argument("--dropout-rate", type=float, default=0.25)
    p.add_argument("--text-signal", type=float, default=0.35)
    p.add_argument("--structured-signal", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load and validate a dataset")
    _add_dataset_args(p)
    p.add_argument("--out", help="write a normalized JSONL copy here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("topics", help="fit topic models and print their top terms")
    _add_dataset_args(p)
    p.add_argument("--k-topics", default="5,10,15,20,50", help="topic count or comma list")
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--stopwords", help="stopword file path")
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("features", help="fit feature extractors on the training split")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True, help="artifact output directory")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train one model on the training split")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True, help="artifact output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    _add_dataset_args(p)
    p.add_argument("--artifacts", required=True, help="artifact directory from train")
    p.add_argument("--model", help="model file (default: <artifacts>/model.svm)")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="run the full experiment protocol")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
