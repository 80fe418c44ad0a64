"""Experiment orchestration: the six-model protocol, reports, error analysis.

One experiment runs split -> fit text/structured features on the training
side only -> k-fold cross-validation of the classifier on the training
side -> final training -> test evaluation.  Every stage draws its seed
from the config, so a fixed (dataset, config) pair reproduces the report
exactly; the canonical JSON form excludes wall-clock timings for that
reason.
"""

from __future__ import annotations

import contextlib
import dataclasses
import hashlib
import json
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import lda as lda_mod
from . import lexicon as lexicon_mod
from . import model as model_mod
from . import textprep
from . import tfidf as tfidf_mod
from .corpus import (
    Dataset,
    FeatureBlock,
    FeatureMatrix,
    FeatureSchema,
    Label,
    encode_structured,
    kfold,
    split,
)
from .errors import ConfigError, DataError, MotivmineError
from .model import MetricsReport

REPORT_VERSION = 1

BLOCK_ORDER = ("structured", "tfidf", "lda", "liwc")

# Feature sets per model id: the six-model ablation design.
MODEL_FEATURE_SETS: dict[int, tuple[str, ...]] = {
    1: ("structured",),
    2: ("tfidf",),
    3: ("tfidf", "lda", "liwc"),
    4: ("structured", "tfidf"),
    5: ("structured", "lda", "liwc"),
    6: ("structured", "tfidf", "lda", "liwc"),
}

CV_SPREAD_WARNING = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of one experiment; flat so it maps 1:1 onto the
    key=value config-file format.

    Stage seeds derive from ``seed``: split uses seed, cross-validation
    seed+1, topic fitting seed+2, classifier seed+3, fold-in seed+4.
    """

    model_id: int = 1
    train_fraction: float = 0.75
    seed: int = 0
    min_df: int = 2
    k_topics: int = 15
    lda_alpha: float | None = None  # None -> 50/K
    lda_beta: float = 0.01
    lda_sweeps: int = 1000
    fold_in_sweeps: int = 50
    svm_c: float = 1.0
    svm_epochs: int = 1000
    svm_tol: float = 1e-4
    svm_bias_scale: float = 1.0
    decision_threshold: float = 0.0
    cv_folds: int = 5
    dic_path: str | None = None  # None -> bundled mini dictionary
    stopwords_path: str | None = None  # None -> bundled Dutch list
    top_coefficients_n: int = 25
    topic_terms_n: int = 10
    error_terms_n: int = 100

    def validate(self) -> "ExperimentConfig":
        if self.model_id not in MODEL_FEATURE_SETS:
            raise ConfigError(f"model_id must be 1..6, got {self.model_id}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")
        if self.k_topics < 1:
            raise ConfigError("k_topics must be >= 1")
        if self.lda_sweeps < 1 or self.fold_in_sweeps < 1:
            raise ConfigError("sweep counts must be >= 1")
        if self.svm_c <= 0:
            raise ConfigError("svm_c must be positive")
        if self.svm_epochs < 1:
            raise ConfigError("svm_epochs must be >= 1")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.error_terms_n < 1 or self.topic_terms_n < 1:
            raise ConfigError("report term counts must be >= 1")
        return self

    @property
    def feature_blocks(self) -> tuple[str, ...]:
        return MODEL_FEATURE_SETS[self.model_id]

    @property
    def split_seed(self) -> int:
        return self.seed

    @property
    def cv_seed(self) -> int:
        return self.seed + 1

    @property
    def lda_seed(self) -> int:
        return self.seed + 2

    @property
    def svm_seed(self) -> int:
        return self.seed + 3

    @property
    def fold_in_seed(self) -> int:
        return self.seed + 4

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """Parse a flat ``key = value`` config file; '#' starts a comment."""
        values: dict = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = (part.strip() for part in line.partition("="))
            if not eq or not key:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, value.strip("'\""), types[key], f"{path}:{lineno}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values).validate()


def _coerce(key: str, value: str, annotation: str, where: str):
    if value.lower() in ("none", "null", ""):
        return None
    try:
        if "int" in annotation:
            return int(value)
        if "float" in annotation:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {value!r}") from exc
    return value


@dataclass
class FittedArtifacts:
    """Everything fitted on the training side, reusable on new data."""

    config: ExperimentConfig
    stopwords: textprep.StopwordList
    schema: FeatureSchema | None = None
    vocab: tfidf_mod.Vocabulary | None = None
    lda_state: lda_mod.TopicModelState | None = None
    lexicon: lexicon_mod.Lexicon | None = None

    def hashes(self) -> dict[str, str | None]:
        return {
            "schema_sha256": _sha(self.schema.to_json()) if self.schema else None,
            "vocab_sha256": lda_mod.vocab_sha256(self.vocab) if self.vocab else None,
            "lda_sha256": _sha(lda_mod.model_text(self.lda_state)) if self.lda_state else None,
        }


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TermOverlap:
    """Most frequent terms among correctly vs incorrectly predicted
    dropouts, and the fraction of shared terms."""

    n: int
    correct_dropout_terms: tuple[tuple[str, int], ...]
    false_dropout_terms: tuple[tuple[str, int], ...]
    overlap: float | None
    notes: tuple[str, ...] = ()


def compare_top_terms(
    test_docs: Sequence[textprep.TokenizedDoc],
    predictions: Sequence[Label],
    truth: Sequence[Label],
    n: int,
) -> TermOverlap:
    """Contrast term usage of true-positive vs false-positive dropouts.

    Per group the n most frequent tokens are listed (ties lexicographic).
    The overlap ratio divides the intersection by min(n, shorter list);
    it is None when either group is empty.
    """
    if not len(test_docs) == len(predictions) == len(truth):
        raise ValueError("docs, predictions and truth must align")
    if n < 1:
        raise ValueError("n must be >= 1")
    correct: Counter[str] = Counter()
    wrong: Counter[str] = Counter()
    for doc, pred, true in zip(test_docs, predictions, truth):
        if Label(pred) is not Label.DROPOUT:
            continue
        (correct if Label(true) is Label.DROPOUT else wrong).update(doc.tokens)
    top_a = _top_n(correct, n)
    top_b = _top_n(wrong, n)
    notes = []
    if not top_a:
        notes.append("no correctly predicted dropouts")
    if not top_b:
        notes.append("no incorrectly predicted dropouts")
    overlap = None
    if top_a and top_b:
        set_a = {t for t, _ in top_a}
        set_b = {t for t, _ in top_b}
        overlap = len(set_a & set_b) / min(n, len(top_a), len(top_b))
    return TermOverlap(
        n=n,
        correct_dropout_terms=tuple(top_a),
        false_dropout_terms=tuple(top_b),
        overlap=overlap,
        notes=tuple(notes),
    )


def _top_n(counts: Counter, n: int) -> list[tuple[str, int]]:
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


def assemble_features(
    config: ExperimentConfig, blocks: Mapping[str, FeatureBlock]
) -> FeatureMatrix:
    """Concatenate the blocks this model id selects, in fixed order,
    with block-prefixed column names."""
    wanted = [name for name in BLOCK_ORDER if name in config.feature_blocks]
    missing = [name for name in wanted if name not in blocks]
    if missing:
        raise DataError(f"model {config.model_id} needs absent blocks: {', '.join(missing)}")
    chosen = [blocks[name] for name in wanted]
    row_counts = {b.block_name: b.n_rows for b in chosen}
    if len(set(row_counts.values())) > 1:
        raise DataError(f"blocks disagree on row count: {row_counts}")
    names = tuple(f"{b.block_name}:{c}" for b in chosen for c in b.column_names)
    matrix = sp.hstack([sp.csr_matrix(b.matrix) for b in chosen], format="csr")
    return FeatureMatrix(column_names=names, matrix=matrix, block_names=tuple(wanted))


@contextlib.contextmanager
def _stage(name: str, timings: dict[str, float]):
    start = time.perf_counter()
    try:
        yield
    except MotivmineError as exc:
        exc.args = (f"[{name}] {exc}",)
        raise
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def _load_resources(config: ExperimentConfig) -> tuple[textprep.StopwordList, lexicon_mod.Lexicon | None]:
    stopwords = (
        textprep.load_stopwords(config.stopwords_path)
        if config.stopwords_path
        else textprep.bundled_stopwords()
    )
    lex = None
    if "liwc" in config.feature_blocks:
        lex = lexicon_mod.load_dic(config.dic_path) if config.dic_path else lexicon_mod.bundled_lexicon()
    return stopwords, lex


def _prepare(dataset: Dataset, stopwords: textprep.StopwordList):
    docs, streams, sentence_counts = [], [], []
    for record in dataset:
        doc, stream = textprep.prepare(record.id, record.motivation_text, stopwords)
        docs.append(doc)
        streams.append(stream)
        sentence_counts.append(doc.raw_sentence_count)
    return docs, streams, sentence_counts


def fit_artifacts(train_ds: Dataset, config: ExperimentConfig) -> FittedArtifacts:
    """Fit schema, vocabulary and topic model on training data only."""
    stopwords, lex = _load_resources(config)
    artifacts = FittedArtifacts(config=config, stopwords=stopwords, lexicon=lex)
    blocks = config.feature_blocks
    if "structured" in blocks:
        _, artifacts.schema = encode_structured(train_ds)
    if "tfidf" in blocks or "lda" in blocks:
        docs, _, _ = _prepare(train_ds, stopwords)
        artifacts.vocab = tfidf_mod.build_vocabulary(docs, min_df=config.min_df)
        if "lda" in blocks:
            artifacts.lda_state = lda_mod.fit(
                docs,
                artifacts.vocab,
                k=config.k_topics,
                alpha=config.lda_alpha,
                beta=config.lda_beta,
                sweeps=config.lda_sweeps,
                seed=config.lda_seed,
            )
    return artifacts


def featurize(
    artifacts: FittedArtifacts,
    dataset: Dataset,
    use_training_assignments: bool = False,
) -> dict[str, FeatureBlock]:
    """Build every block the config's model needs for this dataset.

    ``use_training_assignments`` reads topic proportions straight from
    the fitted sampler state (valid only for the dataset it was fitted
    on); otherwise unseen documents are folded in.
    """
    config = artifacts.config
    blocks: dict[str, FeatureBlock] = {}
    needed = config.feature_blocks
    docs, streams, sentence_counts = _prepare(dataset, artifacts.stopwords)
    if "structured" in needed:
        block, _ = encode_structured(dataset, artifacts.schema)
        blocks["structured"] = block
    if "tfidf" in needed:
        vectors = tfidf_mod.transform_many(docs, artifacts.vocab)
        blocks["tfidf"] = FeatureBlock(
            block_name="tfidf",
            column_names=artifacts.vocab.terms,
            matrix=tfidf_mod.vectors_to_csr(vectors, len(artifacts.vocab)),
        )
    if "lda" in needed:
        state = artifacts.lda_state
        if use_training_assignments:
            if state.doc_ids != tuple(r.id for r in dataset):
                raise DataError("topic state was fitted on different documents")
            theta = lda_mod.doc_topic_matrix(state)
        else:
            theta = lda_mod.fold_in(
                state, docs, sweeps=config.fold_in_sweeps, seed=config.fold_in_seed
            )
        blocks["lda"] = FeatureBlock(
            block_name="lda",
            column_names=tuple(f"topic_{k:02d}" for k in range(state.k)),
            matrix=theta,
        )
    if "liwc" in needed:
        blocks["liwc"] = FeatureBlock(
            block_name="liwc",
            column_names=lexicon_mod.feature_names(artifacts.lexicon),
            matrix=lexicon_mod.extract_many(streams, sentence_counts, artifacts.lexicon),
        )
    return blocks


@dataclass(frozen=True)
class ExperimentReport:
    """Everything one experiment produced; reproducible from
    (dataset, config) except the timings."""

    config: ExperimentConfig
    dataset_info: dict
    fitted_hashes: dict
    class_weights: dict
    cv_metrics: tuple[MetricsReport, ...]
    cv_spread: float
    cv_warning: bool
    test_metrics: MetricsReport
    top_coefficients: tuple[tuple[str, float], ...]
    topic_terms: lda_mod.TopicSummary | None
    term_overlap: TermOverlap | None
    timings: dict = field(default_factory=dict)

    def to_payload(self, include_timings: bool = True) -> dict:
        payload = {
            "report_version": REPORT_VERSION,
            "config": self.config.as_dict(),
            "dataset": self.dataset_info,
            "fitted": self.fitted_hashes,
            "class_weights": self.class_weights,
            "cross_validation": {
                "folds": [m.as_dict() for m in self.cv_metrics],
                "weighted_f1_spread": self.cv_spread,
                "spread_warning": self.cv_warning,
            },
            "test_metrics": self.test_metrics.as_dict(),
            "top_coefficients": [
                {"feature": name, "coefficient": value} for name, value in self.top_coefficients
            ],
            "topic_top_terms": None
            if self.topic_terms is None
            else [[[term, prob] for term, prob in topic] for topic in self.topic_terms.topics],
            "top_term_overlap": None
            if self.term_overlap is None
            else {
                "n": self.term_overlap.n,
                "correct_dropout_terms": [list(t) for t in self.term_overlap.correct_dropout_terms],
                "false_dropout_terms": [list(t) for t in self.term_overlap.false_dropout_terms],
                "overlap": self.term_overlap.overlap,
                "notes": list(self.term_overlap.notes),
            },
        }
        if include_timings:
            payload["timings"] = dict(self.timings)
        return payload

    def canonical_json(self) -> str:
        """Deterministic form: sorted keys, timings excluded."""
        return json.dumps(self.to_payload(include_timings=False), sort_keys=True)

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), indent=2, sort_keys=True)

    def sha256(self) -> str:
        return _sha(self.canonical_json())

    def coefficients_tsv(self) -> str:
        """Plot-ready signed coefficients, strongest first."""
        lines = ["rank\tfeature\tcoefficient"]
        lines += [
            f"{rank}\t{name}\t{value!r}"
            for rank, (name, value) in enumerate(self.top_coefficients, start=1)
        ]
        return "\n".join(lines) + "\n"

    def render_text(self) -> str:
        cfg = self.config
        lines = [
            f"experiment report (model {cfg.model_id}: {'+'.join(cfg.feature_blocks)})",
            f"records: {self.dataset_info['n_records']}  "
            f"train: {self.dataset_info['n_train']}  test: {self.dataset_info['n_test']}",
            f"class weights: retention={self.class_weights['retention']:.4f} "
            f"dropout={self.class_weights['dropout']:.4f}",
            "",
            f"cross-validation ({cfg.cv_folds} folds), weighted F1 per fold: "
            + " ".join(f"{m.total.f1:.3f}" for m in self.cv_metrics),
            f"fold spread: {self.cv_spread:.3f}"
            + ("  WARNING: spread exceeds 0.1, inspect the training data" if self.cv_warning else ""),
            "",
            "test metrics (T = weighted total, R = retention, D = dropout):",
            metrics_text(self.test_metrics),
            "",
            f"top {len(self.top_coefficients)} coefficients (positive -> dropout):",
        ]
        lines += [f"  {name:40s} {value:+.4f}" for name, value in self.top_coefficients]
        if self.topic_terms is not None:
            lines.append("")
            lines.append(f"top {cfg.topic_terms_n} terms per topic:")
            for k, topic in enumerate(self.topic_terms.topics):
                lines.append(f"  topic {k:2d}: " + ", ".join(term for term, _ in topic))
        if self.term_overlap is not None:
            lines.append("")
            ov = self.term_overlap
            shown = ov.overlap if ov.overlap is not None else float("nan")
            lines.append(
                f"top-{ov.n} term overlap between correctly and incorrectly "
                f"predicted dropouts: {shown:.3f}"
            )
            for note in ov.notes:
                lines.append(f"  note: {note}")
        lines.append("")
        lines.append("timings (s): " + "  ".join(f"{k}={v:.2f}" for k, v in self.timings.items()))
        return "\n".join(lines) + "\n"


def metrics_text(report: MetricsReport) -> str:
    rows = [("Total", report.total), ("Retention", report.retention), ("Dropout", report.dropout)]
    lines = [f"  {'':10s} {'precision':>9s} {'recall':>7s} {'f1':>6s} {'support':>8s}"]
    for name, m in rows:
        lines.append(f"  {name:10s} {m.precision:9.3f} {m.recall:7.3f} {m.f1:6.3f} {m.support:8d}")
    return "\n".join(lines)


def _label_counts(labels: Sequence[Label]) -> dict:
    counts = Counter(labels)
    return {
        "retention": counts.get(Label.RETENTION, 0),
        "dropout": counts.get(Label.DROPOUT, 0),
    }


def run_experiment(dataset: Dataset, config: ExperimentConfig) -> ExperimentReport:
    """Run the full protocol for one model id on a labeled dataset."""
    config.validate()
    timings: dict[str, float] = {}
    with _stage("split", timings):
        train_ds, test_ds = split(dataset, config.train_fraction, config.split_seed)
    with _stage("fit_features", timings):
        artifacts = fit_artifacts(train_ds, config)
        train_blocks = featurize(artifacts, train_ds, use_training_assignments=True)
        x_train = assemble_features(config, train_blocks)
    with _stage("featurize_test", timings):
        test_blocks = featurize(artifacts, test_ds)
        x_test = assemble_features(config, test_blocks)

    y_train = train_ds.labels()
    y_test = test_ds.labels()

    with _stage("cross_validation", timings):
        cv_reports = []
        for fold_train, fold_val in kfold(train_ds, config.cv_folds, config.cv_seed):
            fold_x = x_train.matrix[fold_train]
            fold_y = [y_train[i] for i in fold_train]
            fold_model = model_mod.train(
                fold_x,
                fold_y,
                model_mod.class_weights(fold_y),
                c=config.svm_c,
                epochs=config.svm_epochs,
                tol=config.svm_tol,
                seed=config.svm_seed,
                bias_scale=config.svm_bias_scale,
                column_names=x_train.column_names,
            )
            val_pred, _ = model_mod.predict_many(
                fold_model, x_train.matrix[fold_val], config.decision_threshold
            )
            cv_reports.append(model_mod.evaluate(val_pred, [y_train[i] for i in fold_val]))
        fold_f1 = [m.total.f1 for m in cv_reports]
        cv_spread = max(fold_f1) - min(fold_f1)

    with _stage("final_train", timings):
        weights = model_mod.class_weights(y_train)
        final_model = model_mod.train(
            x_train,
            y_train,
            weights,
            c=config.svm_c,
            epochs=config.svm_epochs,
            tol=config.svm_tol,
            seed=config.svm_seed,
            bias_scale=config.svm_bias_scale,
        )
    with _stage("evaluate", timings):
        predictions, _ = model_mod.predict_many(final_model, x_test, config.decision_threshold)
        test_metrics = model_mod.evaluate(predictions, y_test)
    with _stage("analysis", timings):
        test_docs, _, _ = _prepare(test_ds, artifacts.stopwords)
        overlap = compare_top_terms(test_docs, predictions, y_test, config.error_terms_n)
        topic_terms = (
            lda_mod.top_terms(artifacts.lda_state, config.topic_terms_n)
            if artifacts.lda_state is not None
            else None
        )

    return ExperimentReport(
        config=config,
        dataset_info={
            "n_records": len(dataset),
            "n_train": len(train_ds),
            "n_test": len(test_ds),
            "train_labels": _label_counts(y_train),
            "test_labels": _label_counts(y_test),
            "feature_columns": x_train.n_cols,
            "blocks": list(x_train.block_names),
        },
        fitted_hashes=artifacts.hashes(),
        class_weights={
            "retention": float(weights[Label.RETENTION]),
            "dropout": float(weights[Label.DROPOUT]),
        },
        cv_metrics=tuple(cv_reports),
        cv_spread=cv_spread,
        cv_warning=cv_spread > CV_SPREAD_WARNING,
        test_metrics=test_metrics,
        top_coefficients=tuple(
            model_mod.top_coefficients(final_model, config.top_coefficients_n)
        ),
        topic_terms=topic_terms,
        term_overlap=overlap,
        timings=timings,
    )


def run_all(dataset: Dataset, config: ExperimentConfig, model_ids: Sequence[int] = range(1, 7)) -> list[ExperimentReport]:
    """Run several model ids under otherwise identical configuration."""
    return [
        run_experiment(dataset, dataclasses.replace(config, model_id=mid).validate())
        for mid in model_ids
    ]


def summary_table(reports: Sequence[ExperimentReport]) -> str:
    """One row per model: precision, recall and F1, each split T/R/D."""
    lines = [
        f"{'Model':5s} {'P(T)':>6s} {'P(R)':>6s} {'P(D)':>6s} "
        f"{'R(T)':>6s} {'R(R)':>6s} {'R(D)':>6s} "
        f"{'F1(T)':>6s} {'F1(R)':>6s} {'F1(D)':>6s}"
    ]
    for report in reports:
        m = report.test_metrics
        lines.append(
            f"{report.config.model_id:<5d} "
            f"{m.total.precision:6.2f} {m.retention.precision:6.2f} {m.dropout.precision:6.2f} "
            f"{m.total.recall:6.2f} {m.retention.recall:6.2f} {m.dropout.recall:6.2f} "
            f"{m.total.f1:6.2f} {m.retention.f1:6.2f} {m.dropout.f1:6.2f}"
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Artifact persistence for the train/eval CLI round trip


def save_artifacts(artifacts: FittedArtifacts, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{k} = {v}" for k, v in artifacts.config.as_dict().items() if v is not None]
    (out / "config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "stopwords.txt").write_text(
        "\n".join(sorted(artifacts.stopwords.words)) + "\n", encoding="utf-8"
    )
    if artifacts.schema is not None:
        artifacts.schema.save(out / "schema.json")
    if artifacts.vocab is not None:
        tfidf_mod.save_vocabulary(artifacts.vocab, out / "vocabulary.tsv")
    if artifacts.lda_state is not None:
        lda_mod.save_model(artifacts.lda_state, out / "lda.model")
    if artifacts.lexicon is not None:
        (out / "lexicon.dic").write_text(
            lexicon_mod.serialize_dic(artifacts.lexicon), encoding="utf-8"
        )


def load_artifacts(out_dir: str | Path) -> FittedArtifacts:
    out = Path(out_dir)
    config = ExperimentConfig.from_file(out / "config.txt")
    artifacts = FittedArtifacts(
        config=config, stopwords=textprep.load_stopwords(out / "stopwords.txt")
    )
    if (out / "schema.json").exists():
        artifacts.schema = FeatureSchema.load(out / "schema.json")
    if (out / "vocabulary.tsv").exists():
        artifacts.vocab = tfidf_mod.load_vocabulary(out / "vocabulary.tsv")
    if (out / "lda.model").exists():
        artifacts.lda_state = lda_mod.load_model(out / "lda.model", artifacts.vocab)
    if (out / "lexicon.dic").exists():
        artifacts.lexicon = lexicon_mod.load_dic(out / "lexicon.dic")
    return artifacts
