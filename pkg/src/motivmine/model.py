"""Class-weighted linear SVM with hinge loss, metrics, coefficient ranking.

Training minimizes

    J(w, b) = 0.5*||w||^2 + 0.5*(b/B)^2
              + C * sum_i cw(y_i) * max(0, 1 - y~_i * (w.x_i + b))

with y~ = +1 for Dropout and -1 for Retention, by liblinear-style dual
coordinate descent over the examples in seeded shuffled order; the bias
is carried as an augmented feature of scale B (default 1), which is what
adds the small (b/B)^2 ridge.  Because the primal value of raw dual
iterates is not monotone, the solver tracks the best-objective iterate
seen at each epoch end (a pocket) and returns it; the recorded objective
history is that of the pocket sequence, hence non-increasing.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit

from .corpus import FeatureMatrix, Label
from .errors import DataError, NumericalError

_FORMAT_VERSION = "motivmine-svm v1"

DEFAULT_C = 1.0
DEFAULT_EPOCHS = 1000
DEFAULT_TOL = 1e-4
DEFAULT_BIAS_SCALE = 1.0


@dataclass(frozen=True)
class LinearModel:
    """Trained weights over named columns plus training metadata."""

    column_names: tuple[str, ...]
    weights: np.ndarray
    bias: float
    c: float
    class_weights: dict[Label, float]
    seed: int
    bias_scale: float
    epochs_run: int
    final_objective: float
    objective_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.column_names):
            raise DataError("weight vector length does not match column names")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with Dropout as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    """Per-class and support-weighted total precision/recall/F1."""

    retention: ClassMetrics
    dropout: ClassMetrics
    total: ClassMetrics

    def as_dict(self) -> dict:
        """Table layout: one row per metric, columns T/R/D."""
        out = {}
        for metric in ("precision", "recall", "f1"):
            out[metric] = {
                "T": getattr(self.total, metric),
                "R": getattr(self.retention, metric),
                "D": getattr(self.dropout, metric),
            }
        out["support"] = {
            "T": self.total.support,
            "R": self.retention.support,
            "D": self.dropout.support,
        }
        return out


def class_weights(labels: Sequence[Label]) -> dict[Label, Fraction]:
    """Balanced per-label loss multipliers n_total / (2 * n_c).

    Returned as exact rationals so that sum_c n_c * w_c == n_total holds
    identically; they coerce to float wherever arithmetic needs them.
    """
    counts = Counter(Label(y) for y in labels)
    if len(counts) < 2:
        raise DataError("cannot balance one class")
    n_total = sum(counts.values())
    return {label: Fraction(n_total, 2 * n) for label, n in counts.items()}


def _signed_targets(labels: Sequence[Label]) -> np.ndarray:
    return np.array([1.0 if Label(y) is Label.DROPOUT else -1.0 for y in labels])


def _as_csr(x) -> tuple[sp.csr_matrix, tuple[str, ...] | None]:
    if isinstance(x, FeatureMatrix):
        return x.matrix.tocsr(), x.column_names
    if sp.issparse(x):
        return x.tocsr(), None
    return sp.csr_matrix(np.atleast_2d(np.asarray(x, dtype=np.float64))), None


@njit(cache=True)
def _cd_epoch(indptr, indices, data, y, alpha, w, v_box, box_ub, qii, order, bias_scale):
    """One dual coordinate-descent pass; returns the largest projected-
    gradient violation seen."""
    max_pg = 0.0
    v = v_box[0]
    for t in range(order.shape[0]):
        i = order[t]
        score = v * bias_scale
        for p in range(indptr[i], indptr[i + 1]):
            score += w[indices[p]] * data[p]
        g = y[i] * score - 1.0
        pg = g
        if alpha[i] <= 0.0:
            if g > 0.0:
                pg = 0.0
        elif alpha[i] >= box_ub[i]:
            if g < 0.0:
                pg = 0.0
        if abs(pg) > max_pg:
            max_pg = abs(pg)
        a_new = alpha[i] - g / qii[i]
        if a_new < 0.0:
            a_new = 0.0
        elif a_new > box_ub[i]:
            a_new = box_ub[i]
        delta = a_new - alpha[i]
        if delta != 0.0:
            alpha[i] = a_new
            step = y[i] * delta
            for p in range(indptr[i], indptr[i + 1]):
                w[indices[p]] += step * data[p]
            v += step * bias_scale
    v_box[0] = v
    return max_pg


def svm_objective(
    weights: np.ndarray,
    bias: float,
    x,
    y_signed: np.ndarray,
    sample_weights: np.ndarray,
    c: float,
    bias_scale: float = DEFAULT_BIAS_SCALE,
) -> float:
    matrix, _ = _as_csr(x)
    margins = y_signed * (matrix @ weights + bias)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(
        0.5 * weights @ weights + 0.5 * (bias / bias_scale) ** 2 + c * sample_weights @ hinge
    )


def svm_objective_gradient(
    weights: np.ndarray,
    bias: float,
    x,
    y_signed: np.ndarray,
    sample_weights: np.ndarray,
    c: float,
    bias_scale: float = DEFAULT_BIAS_SCALE,
) -> tuple[np.ndarray, float]:
    """Analytic gradient; valid wherever no margin equals exactly 1."""
    matrix, _ = _as_csr(x)
    margins = y_signed * (matrix @ weights + bias)
    active = margins < 1.0
    coeff = np.where(active, sample_weights * y_signed, 0.0)
    grad_w = weights - c * (matrix.T @ coeff)
    grad_b = bias / bias_scale**2 - c * float(coeff.sum())
    return np.asarray(grad_w).ravel(), grad_b


def train(
    x,
    y: Sequence[Label],
    weights_by_class: Mapping[Label, Fraction | float],
    c: float = DEFAULT_C,
    epochs: int = DEFAULT_EPOCHS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    bias_scale: float = DEFAULT_BIAS_SCALE,
    column_names: Sequence[str] | None = None,
) -> LinearModel:
    """Fit the class-weighted linear SVM.

    Stops at the epoch cap or once the largest projected-gradient (KKT)
    violation in a pass drops below ``tol``.  Deterministic per seed.
    """
    if c <= 0.0:
        raise ValueError("C must be positive")
    if bias_scale <= 0.0:
        raise ValueError("bias_scale must be positive")
    matrix, inferred_names = _as_csr(x)
    names = tuple(column_names) if column_names is not None else inferred_names
    if names is None:
        names = tuple(f"x{j}" for j in range(matrix.shape[1]))
    if len(names) != matrix.shape[1]:
        raise DataError("column_names length does not match the feature matrix")
    labels = [Label(v) for v in y]
    if matrix.shape[0] != len(labels):
        raise DataError(f"{matrix.shape[0]} rows vs {len(labels)} labels")
    if len(set(labels)) < 2:
        raise DataError("training requires both classes present")
    bad = ~np.isfinite(matrix.data)
    if bad.any():
        cols = sorted({names[j] for j in np.unique(matrix.indices[bad])})
        raise NumericalError(f"non-finite feature values in columns: {', '.join(cols)}")

    y_signed = _signed_targets(labels)
    sample_weights = np.array([float(weights_by_class[lab]) for lab in labels])
    box_ub = c * sample_weights
    row_sq = np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel()
    qii = row_sq + bias_scale**2

    n = matrix.shape[0]
    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    w = np.zeros(matrix.shape[1])
    v_box = np.zeros(1)
    best_obj = np.inf
    best_w = w.copy()
    best_b = 0.0
    history: list[float] = []
    epochs_run = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        max_pg = _cd_epoch(
            matrix.indptr, matrix.indices, matrix.data, y_signed,
            alpha, w, v_box, box_ub, qii, order, bias_scale,
        )
        epochs_run += 1
        obj = svm_objective(w, v_box[0] * bias_scale, matrix, y_signed, sample_weights, c, bias_scale)
        if obj < best_obj:
            best_obj = obj
            best_w = w.copy()
            best_b = float(v_box[0] * bias_scale)
        history.append(best_obj)
        if max_pg < tol:
            break
    return LinearModel(
        column_names=names,
        weights=best_w,
        bias=best_b,
        c=c,
        class_weights={lab: float(weights_by_class[lab]) for lab in sorted(set(labels))},
        seed=seed,
        bias_scale=bias_scale,
        epochs_run=epochs_run,
        final_objective=best_obj,
        objective_history=tuple(history),
    )


def decision_scores(model: LinearModel, x) -> np.ndarray:
    matrix, _ = _as_csr(x)
    if matrix.shape[1] != len(model.weights):
        raise ValueError(
            f"feature dimension {matrix.shape[1]} does not match model ({len(model.weights)})"
        )
    return np.asarray(matrix @ model.weights).ravel() + model.bias


def predict(model: LinearModel, x) -> tuple[Label, float]:
    """Score one feature vector; a score of exactly zero is Dropout."""
    vec = x.to_dense() if hasattr(x, "to_dense") else np.asarray(x, dtype=np.float64).ravel()
    if len(vec) != len(model.weights):
        raise ValueError(f"feature dimension {len(vec)} does not match model ({len(model.weights)})")
    score = float(model.weights @ vec + model.bias)
    return (Label.DROPOUT if score >= 0.0 else Label.RETENTION), score


def predict_many(model: LinearModel, x, threshold: float = 0.0) -> tuple[list[Label], np.ndarray]:
    scores = decision_scores(model, x)
    labels = [Label.DROPOUT if s >= threshold else Label.RETENTION for s in scores]
    return labels, scores


def confusion_matrix(predictions: Sequence[Label], truth: Sequence[Label]) -> ConfusionMatrix:
    if len(predictions) != len(truth):
        raise ValueError("predictions and truth differ in length")
    pairs = [(Label(p), Label(t)) for p, t in zip(predictions, truth)]
    return ConfusionMatrix(
        tp=sum(p is Label.DROPOUT and t is Label.DROPOUT for p, t in pairs),
        fp=sum(p is Label.DROPOUT and t is Label.RETENTION for p, t in pairs),
        fn=sum(p is Label.RETENTION and t is Label.DROPOUT for p, t in pairs),
        tn=sum(p is Label.RETENTION and t is Label.RETENTION for p, t in pairs),
    )


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def evaluate(predictions: Sequence[Label], truth: Sequence[Label]) -> MetricsReport:
    """Per-class precision/recall/F1 plus their support-weighted average."""
    if len(predictions) != len(truth):
        raise ValueError("predictions and truth differ in length")
    if not truth:
        raise ValueError("cannot evaluate zero records")
    preds = [Label(p) for p in predictions]
    truths = [Label(t) for t in truth]
    per_class = {}
    for cls in (Label.RETENTION, Label.DROPOUT):
        tp = sum(p is cls and t is cls for p, t in zip(preds, truths))
        fp = sum(p is cls and t is not cls for p, t in zip(preds, truths))
        fn = sum(p is not cls and t is cls for p, t in zip(preds, truths))
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[cls] = ClassMetrics(precision, recall, f1, support=tp + fn)
    n = len(truths)
    total = ClassMetrics(
        precision=sum(m.precision * m.support for m in per_class.values()) / n,
        recall=sum(m.recall * m.support for m in per_class.values()) / n,
        f1=sum(m.f1 * m.support for m in per_class.values()) / n,
        support=n,
    )
    return MetricsReport(
        retention=per_class[Label.RETENTION], dropout=per_class[Label.DROPOUT], total=total
    )


def top_coefficients(model: LinearModel, n: int) -> list[tuple[str, float]]:
    """The n largest coefficients by magnitude, ties broken by name;
    positive values push toward Dropout, negative toward Retention."""
    if n <= 0:
        return []
    ranked = sorted(
        zip(model.column_names, model.weights.tolist()), key=lambda kv: (-abs(kv[1]), kv[0])
    )
    return ranked[:n]


def save_model(model: LinearModel, path: str | Path) -> None:
    """Versioned flat-file persistence; floats round-trip exactly."""
    for name in model.column_names:
        if "\t" in name or "\n" in name:
            raise DataError(f"column name not serializable: {name!r}")
    lines = [
        _FORMAT_VERSION,
        f"C={model.c!r}",
        f"seed={model.seed}",
        f"bias_scale={model.bias_scale!r}",
        f"epochs={model.epochs_run}",
        f"final_objective={model.final_objective!r}",
        "labels=retention:0,dropout:1",
        f"class_weight_retention={model.class_weights[Label.RETENTION]!r}",
        f"class_weight_dropout={model.class_weights[Label.DROPOUT]!r}",
        f"n_columns={len(model.column_names)}",
    ]
    lines += [f"{name}\t{w!r}" for name, w in zip(model.column_names, model.weights.tolist())]
    lines.append(f"bias\t{model.bias!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LinearModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _FORMAT_VERSION:
        raise DataError(f"{path}: not a {_FORMAT_VERSION} file")
    header = {}
    for line in lines[1:10]:
        key, _, value = line.partition("=")
        header[key] = value
    try:
        n_columns = int(header["n_columns"])
        body = lines[10:10 + n_columns + 1]
        names, weights = [], []
        for line in body[:-1]:
            name, _, value = line.partition("\t")
            names.append(name)
            weights.append(float(value))
        bias_key, _, bias_value = body[-1].partition("\t")
        if bias_key != "bias":
            raise ValueError("missing final bias line")
        return LinearModel(
            column_names=tuple(names),
            weights=np.array(weights),
            bias=float(bias_value),
            c=float(header["C"]),
            class_weights={
                Label.RETENTION: float(header["class_weight_retention"]),
                Label.DROPOUT: float(header["class_weight_dropout"]),
            },
            seed=int(header["seed"]),
            bias_scale=float(header["bias_scale"]),
            epochs_run=int(header["epochs"]),
            final_objective=float(header["final_objective"]),
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed model file: {exc}") from exc
