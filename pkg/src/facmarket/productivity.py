"""Field-normalized productivity scores.

Pipeline: concatenate each person's paper-title tokens into one document,
fit a K=10 topic model by collapsed Gibbs sampling, compute per-subfield
weighted paper-count statistics, then score each person with a composite
z that averages per-subfield z-scores under their own topic mixture.

Publication counting: rows in publications.csv with year <= hire_year + 1
are counted; people absent from the file get count 0.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from .errors import DataError
from .rng import substream

_TOKEN_RE = re.compile(r"[^0-9a-z]+")

DEFAULT_K = 10
DEFAULT_ALPHA = 5.0      # 50 / K
DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000
SIGMA_FLOOR = 1e-6


def _stopwords():
    text = resources.files("facmarket").joinpath("stopwords.txt").read_text()
    return frozenset(w for w in text.split("\n") if w and not w.startswith("#"))


STOPWORDS = _stopwords()


def tokenize_titles(titles) -> list:
    """Lowercase, split on non-alphanumerics, drop short tokens and
    stopwords."""
    out = []
    for title in titles:
        for tok in _TOKEN_RE.split(title.lower()):
            if len(tok) >= 2 and tok not in STOPWORDS:
                out.append(tok)
    return out


@dataclass(frozen=True)
class Corpus:
    doc_ids: tuple              # faculty ids, fixed order
    documents: tuple            # tuple of token-index tuples
    vocabulary: dict            # token -> index

    @property
    def n_docs(self):
        return len(self.documents)

    @property
    def n_words(self):
        return len(self.vocabulary)


def build_corpus(titles_by_faculty) -> Corpus:
    """titles_by_faculty: mapping faculty id -> list of titles."""
    vocab = {}
    doc_ids = tuple(titles_by_faculty)
    docs = []
    for fid in doc_ids:
        toks = tokenize_titles(titles_by_faculty[fid])
        idxs = []
        for t in toks:
            if t not in vocab:
                vocab[t] = len(vocab)
            idxs.append(vocab[t])
        docs.append(tuple(idxs))
    return Corpus(doc_ids=doc_ids, documents=tuple(docs), vocabulary=vocab)


@dataclass(frozen=True)
class TopicModel:
    K: int
    alpha: float
    beta: float
    phi: np.ndarray      # K x V, rows sum to 1
    theta: np.ndarray    # D x K, rows sum to 1
    vocabulary: dict
    doc_ids: tuple

    def top_words(self, k, n=20):
        inv = {i: w for w, i in self.vocabulary.items()}
        order = np.argsort(self.phi[k])[::-1][:n]
        return [(inv[i], float(self.phi[k, i])) for i in order]


@njit(cache=True)
def _gibbs(doc_of, word_of, z, ndk, nkw, nk, nd, K, V, alpha, beta, iterations, seed):
    np.random.seed(seed)
    n_tokens = doc_of.shape[0]
    p = np.empty(K)
    for _ in range(iterations):
        for t in range(n_tokens):
            d = doc_of[t]
            w = word_of[t]
            k = z[t]
            ndk[d, k] -= 1
            nkw[k, w] -= 1
            nk[k] -= 1
            total = 0.0
            for j in range(K):
                p[j] = (ndk[d, j] + alpha) * (nkw[j, w] + beta) / (nk[j] + V * beta)
                total += p[j]
            r = np.random.random() * total
            acc = 0.0
            k = K - 1
            for j in range(K):
                acc += p[j]
                if acc > r:
                    k = j
                    break
            z[t] = k
            ndk[d, k] += 1
            nkw[k, w] += 1
            nk[k] += 1


def fit_lda(corpus, K=DEFAULT_K, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA,
            iterations=DEFAULT_ITERATIONS, seed=0) -> TopicModel:
    """Collapsed Gibbs sampling; point estimate from the final state with
    Dirichlet smoothing. Bit-identical across runs with the same seed."""
    if corpus.n_words == 0:
        raise DataError("empty corpus: no vocabulary")
    V = corpus.n_words
    D = corpus.n_docs
    doc_of = np.concatenate([np.full(len(doc), d, dtype=np.int64)
                             for d, doc in enumerate(corpus.documents)]) \
        if any(corpus.documents) else np.zeros(0, dtype=np.int64)
    word_of = np.concatenate([np.array(doc, dtype=np.int64)
                              for doc in corpus.documents if doc]) \
        if any(corpus.documents) else np.zeros(0, dtype=np.int64)
    rng = substream(seed, "lda")
    z = rng.integers(0, K, size=doc_of.shape[0]).astype(np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    nk = np.zeros(K, dtype=np.int64)
    nd = np.zeros(D, dtype=np.int64)
    for t in range(z.shape[0]):
        ndk[doc_of[t], z[t]] += 1
        nkw[z[t], word_of[t]] += 1
        nk[z[t]] += 1
        nd[doc_of[t]] += 1
    if z.shape[0]:
        _gibbs(doc_of, word_of, z, ndk, nkw, nk, nd, K, V,
               float(alpha), float(beta), int(iterations),
               int(rng.integers(0, 2**31 - 1)))
    phi = (nkw + beta) / (nk[:, None] + V * beta)
    theta = (ndk + alpha) / (nd[:, None] + K * alpha)
    return TopicModel(K=K, alpha=alpha, beta=beta, phi=phi, theta=theta,
                      vocabulary=dict(corpus.vocabulary), doc_ids=corpus.doc_ids)


@dataclass(frozen=True)
class SubfieldStats:
    mu: np.ndarray      # weighted mean paper count per subfield
    sigma: np.ndarray   # weighted population std, floored


def subfield_count_stats(theta_all, counts) -> SubfieldStats:
    """Per-subfield paper-count moments, weighted by topic emphasis.

    mu_k = sum_i theta_ik n_i / sum_i theta_ik, sigma_k the matching
    weighted population std. Degenerate subfields are floored so z-scores
    stay finite.
    """
    theta_all = np.asarray(theta_all, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if theta_all.shape[0] != counts.shape[0]:
        raise DataError("theta rows do not align with counts")
    wsum = theta_all.sum(axis=0)
    if np.any(wsum <= 0):
        raise DataError("a subfield has all-zero weights")
    mu = theta_all.T @ counts / wsum
    var = (theta_all * (counts[:, None] - mu[None, :]) ** 2).sum(axis=0) / wsum
    sigma = np.maximum(np.sqrt(var), SIGMA_FLOOR)
    return SubfieldStats(mu=mu, sigma=sigma)


def composite_z(theta_i, n_i, stats) -> float:
    """z = sum_k theta_ik (n_i - mu_k) / sigma_k."""
    theta_i = np.asarray(theta_i, dtype=float)
    return float((theta_i * (n_i - stats.mu) / stats.sigma).sum())


def load_publications(path) -> dict:
    """publications.csv -> faculty id -> list of (title, year)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    out = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["faculty_id", "title", "year"]:
            raise DataError(f"{path}: bad header {header!r}")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{i}: expected 3 fields")
            fid, title, year = row[0].strip(), row[1], row[2].strip()
            try:
                year_i = int(year)
            except ValueError:
                raise DataError(f"{path}:{i}: non-integer year {year!r}")
            out.setdefault(fid, []).append((title, year_i))
    return out


def pub_count(publications, record) -> int:
    """Papers published by one year after the start of the position."""
    rows = publications.get(record.id, [])
    return sum(1 for _, year in rows if year <= record.hire_year + 1)


def score_faculty(records, publications, K=DEFAULT_K, alpha=DEFAULT_ALPHA,
                  beta=DEFAULT_BETA, iterations=DEFAULT_ITERATIONS, seed=0):
    """Full productivity pipeline over a cohort.

    Returns (scored_records, topic_model, subfield_stats) where scored
    records carry pub_count, topic_mix and productivity_z. Counting uses
    only papers out by hire_year + 1; the topic model sees each person's
    full title history.
    """
    titles = {r.id: [t for t, _ in publications.get(r.id, [])] for r in records}
    corpus = build_corpus(titles)
    model = fit_lda(corpus, K=K, alpha=alpha, beta=beta,
                    iterations=iterations, seed=seed)
    counts = np.array([pub_count(publications, r) for r in records], dtype=float)
    stats = subfield_count_stats(model.theta, counts)
    scored = [r.with_productivity(counts[i], model.theta[i],
                                  composite_z(model.theta[i], counts[i], stats))
              for i, r in enumerate(records)]
    return scored, model, stats
