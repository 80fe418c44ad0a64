"""Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

The sampler keeps per-token topic assignments plus three count tables:
document-topic (n_dk), topic-term (n_kw) and topic totals (n_k).  Each
sweep resamples every token in document order from the full conditional

    p(k) proportional to (n_dk[d,k] + alpha) * (n_kw[k,w] + beta) / (n_k[k] + V*beta)

with the token's own assignment removed from the counts.  All randomness
flows from one seeded generator, so a fixed seed reproduces assignments
bit for bit.  Unseen documents get topic proportions by folding in:
resampling their tokens against frozen topic-term counts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

from .errors import DataError, NumericalError
from .textprep import TokenizedDoc
from .tfidf import Vocabulary, vocabulary_text

_FORMAT_VERSION = "motivmine-lda v1"

DEFAULT_BETA = 0.01
DEFAULT_SWEEPS = 1000
DEFAULT_FOLD_IN_SWEEPS = 50


def default_alpha(k: int) -> float:
    """Conventional symmetric document-topic prior, 50/K."""
    return 50.0 / k


@dataclass
class TopicModelState:
    """Assignments, count tables and hyperparameters of a fitted model.

    Token data is stored flat in document order: document d owns
    ``tokens[doc_offsets[d]:doc_offsets[d+1]]``.  Treat instances as
    immutable once :func:`fit` returns.
    """

    k: int
    alpha: float
    beta: float
    vocab: Vocabulary
    doc_ids: tuple[str, ...]
    doc_offsets: np.ndarray  # int64, length D+1
    tokens: np.ndarray  # int32 vocabulary indices, flat
    z: np.ndarray  # int32 topic ids, aligned with tokens
    n_dk: np.ndarray  # (D, K) int64
    n_kw: np.ndarray  # (K, V) int64
    n_k: np.ndarray  # (K,) int64
    rng_seed: int
    sweeps_done: int = 0
    loglik_history: list[float] = field(default_factory=list)

    @property
    def n_docs(self) -> int:
        return len(self.doc_offsets) - 1

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    def doc_length(self, d: int) -> int:
        return int(self.doc_offsets[d + 1] - self.doc_offsets[d])

    def assignments(self, d: int) -> np.ndarray:
        """Topic ids for document d's tokens, in token order."""
        return self.z[self.doc_offsets[d]:self.doc_offsets[d + 1]]

    def validate_counts(self) -> None:
        """Check the three count-conservation identities."""
        lengths = np.diff(self.doc_offsets)
        if self.n_dk.shape[0] and not np.array_equal(self.n_dk.sum(axis=1), lengths):
            raise NumericalError("n_dk rows do not sum to document lengths")
        if not np.array_equal(self.n_kw.sum(axis=1), self.n_k):
            raise NumericalError("n_kw rows do not sum to topic totals")
        if self.n_k.sum() != self.n_tokens:
            raise NumericalError("topic totals do not sum to the token count")
        if (self.n_dk < 0).any() or (self.n_kw < 0).any() or (self.n_k < 0).any():
            raise NumericalError("negative count encountered")


@dataclass(frozen=True)
class TopicSummary:
    """Per topic: (term, probability) pairs ranked by probability
    descending, ties broken lexicographically."""

    topics: tuple[tuple[tuple[str, float], ...], ...]
    labels: tuple[str | None, ...] = ()


@njit(cache=True)
def _gibbs_sweep(tokens, doc_of_token, z, n_dk, n_kw, n_k, alpha, beta, uniforms, cum):
    n_topics = n_kw.shape[0]
    vbeta = n_kw.shape[1] * beta
    for t in range(tokens.shape[0]):
        w = tokens[t]
        d = doc_of_token[t]
        k_old = z[t]
        n_dk[d, k_old] -= 1
        n_kw[k_old, w] -= 1
        n_k[k_old] -= 1
        total = 0.0
        for k in range(n_topics):
            total += (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + vbeta)
            cum[k] = total
        r = uniforms[t] * total
        k_new = 0
        while k_new < n_topics - 1 and cum[k_new] < r:
            k_new += 1
        z[t] = k_new
        n_dk[d, k_new] += 1
        n_kw[k_new, w] += 1
        n_k[k_new] += 1


@njit(cache=True)
def _fold_in_doc(tokens, z, nd, n_kw, n_k, alpha, beta, uniforms, cum):
    n_topics = n_kw.shape[0]
    vbeta = n_kw.shape[1] * beta
    n_tok = tokens.shape[0]
    sweeps = uniforms.shape[0] // n_tok if n_tok else 0
    for s in range(sweeps):
        for i in range(n_tok):
            w = tokens[i]
            k_old = z[i]
            nd[k_old] -= 1
            total = 0.0
            for k in range(n_topics):
                total += (nd[k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + vbeta)
                cum[k] = total
            r = uniforms[s * n_tok + i] * total
            k_new = 0
            while k_new < n_topics - 1 and cum[k_new] < r:
                k_new += 1
            z[i] = k_new
            nd[k_new] += 1


def encode_docs(docs: Sequence[TokenizedDoc], vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Map documents to flat vocabulary-index arrays, dropping OOV tokens."""
    index = vocab.term_to_index
    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    chunks = []
    for d, doc in enumerate(docs):
        ids = [index[t] for t in doc.tokens if t in index]
        chunks.append(np.array(ids, dtype=np.int32))
        offsets[d + 1] = offsets[d] + len(ids)
    tokens = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int32)
    return tokens, offsets, tuple(doc.record_id for doc in docs)


def fit(
    docs: Sequence[TokenizedDoc],
    vocab: Vocabulary,
    k: int,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    sweeps: int = DEFAULT_SWEEPS,
    seed: int = 0,
) -> TopicModelState:
    """Run collapsed Gibbs sampling and return the final state.

    Assignments are initialized uniformly at random from the seed; count
    invariants are verified after every sweep and the collapsed joint
    log-likelihood is recorded per sweep.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    if alpha is None:
        alpha = default_alpha(k)
    tokens, offsets, doc_ids = encode_docs(docs, vocab)
    if len(tokens) == 0:
        raise DataError("every document is empty after vocabulary filtering")
    n_docs = len(docs)
    doc_of_token = np.repeat(
        np.arange(n_docs, dtype=np.int32), np.diff(offsets).astype(np.int64)
    )
    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, size=len(tokens), dtype=np.int32)

    n_dk = np.zeros((n_docs, k), dtype=np.int64)
    n_kw = np.zeros((k, len(vocab)), dtype=np.int64)
    n_k = np.zeros(k, dtype=np.int64)
    np.add.at(n_dk, (doc_of_token, z), 1)
    np.add.at(n_kw, (z, tokens), 1)
    np.add.at(n_k, z, 1)

    state = TopicModelState(
        k=k, alpha=float(alpha), beta=float(beta), vocab=vocab,
        doc_ids=doc_ids, doc_offsets=offsets, tokens=tokens, z=z,
        n_dk=n_dk, n_kw=n_kw, n_k=n_k, rng_seed=seed,
    )
    cum = np.zeros(k, dtype=np.float64)
    for _ in range(sweeps):
        uniforms = rng.random(len(tokens))
        _gibbs_sweep(tokens, doc_of_token, z, n_dk, n_kw, n_k, state.alpha, state.beta, uniforms, cum)
        state.sweeps_done += 1
        state.validate_counts()
        state.loglik_history.append(log_likelihood(state))
    return state


def conditional_distribution(state: TopicModelState, d: int, i: int) -> np.ndarray:
    """Full conditional over topics for token i of document d.

    The caller must already have the token removed from the count tables
    (as the sampler does mid-update); the formula reads the tables as-is.
    """
    w = state.tokens[state.doc_offsets[d] + i]
    p = (
        (state.n_dk[d] + state.alpha)
        * (state.n_kw[:, w] + state.beta)
        / (state.n_k + len(state.vocab) * state.beta)
    )
    return p / p.sum()


def doc_topic_features(state: TopicModelState, d: int) -> np.ndarray:
    """Smoothed topic proportions theta_d; uniform for an empty document."""
    length = state.doc_length(d)
    return (state.n_dk[d] + state.alpha) / (length + state.k * state.alpha)


def doc_topic_matrix(state: TopicModelState) -> np.ndarray:
    lengths = np.diff(state.doc_offsets)
    return (state.n_dk + state.alpha) / (lengths[:, None] + state.k * state.alpha)


def top_terms(state: TopicModelState, n: int) -> TopicSummary:
    """The n highest-probability terms per topic under the smoothed
    topic-term distribution phi."""
    terms = state.vocab.terms
    n = min(n, len(terms))
    topics = []
    for k in range(state.k):
        phi = (state.n_kw[k] + state.beta) / (state.n_k[k] + len(terms) * state.beta)
        order = sorted(range(len(terms)), key=lambda w: (-phi[w], terms[w]))
        topics.append(tuple((terms[w], float(phi[w])) for w in order[:n]))
    return TopicSummary(topics=tuple(topics), labels=(None,) * state.k)


def fold_in(
    state: TopicModelState,
    docs: Sequence[TokenizedDoc],
    sweeps: int = DEFAULT_FOLD_IN_SWEEPS,
    seed: int = 0,
) -> np.ndarray:
    """Topic proportions for unseen documents with frozen topic-term counts.

    Returns a (len(docs), K) matrix; empty documents get the uniform prior.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    rng = np.random.default_rng(seed)
    theta = np.zeros((len(docs), state.k))
    index = state.vocab.term_to_index
    cum = np.zeros(state.k, dtype=np.float64)
    for row, doc in enumerate(docs):
        ids = np.array([index[t] for t in doc.tokens if t in index], dtype=np.int32)
        if len(ids) == 0:
            theta[row] = 1.0 / state.k
            continue
        z = rng.integers(0, state.k, size=len(ids), dtype=np.int32)
        nd = np.bincount(z, minlength=state.k).astype(np.int64)
        uniforms = rng.random(sweeps * len(ids))
        _fold_in_doc(ids, z, nd, state.n_kw, state.n_k, state.alpha, state.beta, uniforms, cum)
        theta[row] = (nd + state.alpha) / (len(ids) + state.k * state.alpha)
    return theta


def log_likelihood(state: TopicModelState) -> float:
    """Collapsed joint log p(w, z) under the symmetric Dirichlet priors."""
    k, v = state.n_kw.shape
    a, b = state.alpha, state.beta
    lengths = np.diff(state.doc_offsets)
    word_side = (
        k * gammaln(v * b)
        - gammaln(state.n_k + v * b).sum()
        + gammaln(state.n_kw + b).sum()
        - k * v * gammaln(b)
    )
    doc_side = (
        state.n_docs * gammaln(k * a)
        - gammaln(lengths + k * a).sum()
        + gammaln(state.n_dk + a).sum()
        - state.n_docs * k * gammaln(a)
    )
    return float(word_side + doc_side)


def vocab_sha256(vocab: Vocabulary) -> str:
    return hashlib.sha256(vocabulary_text(vocab).encode("utf-8")).hexdigest()


def model_text(state: TopicModelState) -> str:
    """Canonical persisted form: header plus the topic-term count table."""
    lines = [
        _FORMAT_VERSION,
        f"K={state.k}",
        f"alpha={state.alpha!r}",
        f"beta={state.beta!r}",
        f"seed={state.rng_seed}",
        f"sweeps={state.sweeps_done}",
        f"vocab_sha256={vocab_sha256(state.vocab)}",
    ]
    lines += ["\t".join(str(c) for c in row) for row in state.n_kw]
    return "\n".join(lines) + "\n"


def save_model(state: TopicModelState, path: str | Path) -> None:
    """Persist hyperparameters and the topic-term table.

    The saved model supports :func:`top_terms` and :func:`fold_in`;
    training-document assignments are not stored.
    """
    Path(path).write_text(model_text(state), encoding="utf-8")


def load_model(path: str | Path, vocab: Vocabulary) -> TopicModelState:
    """Load a persisted model against the vocabulary it was fitted with."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _FORMAT_VERSION:
        raise DataError(f"{path}: not a {_FORMAT_VERSION} file")
    header = {}
    for line in lines[1:7]:
        key, _, value = line.partition("=")
        header[key] = value
    try:
        k = int(header["K"])
        alpha = float(header["alpha"])
        beta = float(header["beta"])
        seed = int(header["seed"])
        sweeps = int(header["sweeps"])
        vhash = header["vocab_sha256"]
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed model header") from exc
    if vhash != vocab_sha256(vocab):
        raise DataError(f"{path}: vocabulary hash mismatch; wrong vocabulary supplied")
    rows = lines[7:7 + k]
    if len(rows) != k:
        raise DataError(f"{path}: expected {k} topic rows")
    n_kw = np.array([[int(c) for c in row.split("\t")] for row in rows], dtype=np.int64)
    if n_kw.shape != (k, len(vocab)):
        raise DataError(f"{path}: topic table shape {n_kw.shape} does not match vocabulary")
    return TopicModelState(
        k=k, alpha=alpha, beta=beta, vocab=vocab,
        doc_ids=(), doc_offsets=np.zeros(1, dtype=np.int64),
        tokens=np.zeros(0, dtype=np.int32), z=np.zeros(0, dtype=np.int32),
        n_dk=np.zeros((0, k), dtype=np.int64), n_kw=n_kw,
        n_k=n_kw.sum(axis=1), rng_seed=seed, sweeps_done=sweeps,
    )
