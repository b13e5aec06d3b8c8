"""Synthetic corpora and volume series with known ground truth.

Documents are drawn from the LDA generative process (per-document topic
mixture from a Dirichlet prior, words from per-topic multinomials) and
daily volume from the linear news-volume model plus gaussian noise, so
the full pipeline's recovery behavior can be scored against the truth.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Corpus, Document, Vocabulary
from .topic_series import TopicSeries
from .topic_graph import jsd

log = logging.getLogger(__name__)


@dataclass
class GroundTruth:
    true_phi: np.ndarray  # K* x V, rows sum to 1
    alpha: float  # document-topic Dirichlet prior
    true_weights: np.ndarray  # K*, nonnegative, sparse
    true_intercept: float
    noise_sigma: float
    seed: int
    vocabulary: list[str]

    @property
    def num_topics(self) -> int:
        return self.true_phi.shape[0]

    @property
    def support(self) -> list[int]:
        return [int(k) for k in np.nonzero(self.true_weights)[0]]

    def validate(self) -> None:
        if self.true_phi.ndim != 2 or self.true_phi.shape[1] != len(self.vocabulary):
            raise ValueError("phi shape does not match the vocabulary")
        if not np.allclose(self.true_phi.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("phi rows must sum to 1")
        if np.any(self.true_phi < 0):
            raise ValueError("phi entries must be nonnegative")
        if self.true_weights.shape != (self.num_topics,) or np.any(self.true_weights < 0):
            raise ValueError("weights must be a nonnegative K-vector")
        if self.alpha <= 0 or self.noise_sigma < 0:
            raise ValueError("alpha must be positive and noise_sigma nonnegative")


def make_ground_truth(
    num_topics: int,
    words_per_topic: int = 30,
    num_causal: int = 5,
    weight_low: float = 1.0,
    weight_high: float = 3.0,
    intercept: float = 1.0,
    noise_sigma: float = 0.05,
    alpha: float = 0.08,
    seed: int = 0,
) -> GroundTruth:
    """Disjoint-block topics: topic k owns its own ``words_per_topic``
    words, uniform within the block. The first ``num_causal`` topics get
    positive volume weights drawn uniformly from [weight_low, weight_high]."""
    if num_causal > num_topics:
        raise ValueError("more causal topics than topics")
    vocab_size = num_topics * words_per_topic
    phi = np.zeros((num_topics, vocab_size))
    for k in range(num_topics):
        phi[k, k * words_per_topic : (k + 1) * words_per_topic] = 1.0 / words_per_topic
    rng = np.random.default_rng(seed)
    weights = np.zeros(num_topics)
    weights[:num_causal] = rng.uniform(weight_low, weight_high, size=num_causal)
    vocabulary = [f"w{v:05d}" for v in range(vocab_size)]
    gt = GroundTruth(phi, alpha, weights, intercept, noise_sigma, seed, vocabulary)
    gt.validate()
    return gt


@dataclass
class SynthCorpus:
    corpus: Corpus
    true_assignments: list[np.ndarray]  # per document, aligned to tokens
    true_series: TopicSeries  # I*_k(t) from the true assignments


def _draw_count(rng: np.random.Generator, spec) -> int:
    if isinstance(spec, tuple):
        lo, hi = spec
        return int(rng.integers(lo, hi + 1))
    return int(spec)


def generate_corpus(
    gt: GroundTruth,
    docs_per_day,
    days: int,
    tokens_per_doc=12,
    start: date = date(2020, 1, 1),
    query_term: str = "acme",
    seed: int | None = None,
) -> SynthCorpus:
    """Draw ``days`` days of documents from the generative model.

    ``docs_per_day`` and ``tokens_per_doc`` are either fixed integers or
    (low, high) tuples sampled uniformly per day/document. True per-token
    topic labels are kept alongside the corpus. Deterministic in the seed
    (defaults to the ground truth's).
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    gt.validate()
    rng = np.random.default_rng(gt.seed if seed is None else seed)
    num_topics = gt.num_topics
    phi_cum = np.cumsum(gt.true_phi, axis=1)
    phi_cum[:, -1] = 1.0

    vocab = Vocabulary()
    for token in gt.vocabulary:
        vocab.add(token)

    documents: list[Document] = []
    assignments: list[np.ndarray] = []
    matrix = np.zeros((num_topics, days), dtype=np.int64)
    dates = [start + timedelta(days=t) for t in range(days)]
    doc_no = 0
    for t in range(days):
        for _ in range(_draw_count(rng, docs_per_day)):
            length = _draw_count(rng, tokens_per_doc)
            if length < 1:
                continue
            theta = rng.dirichlet(np.full(num_topics, gt.alpha))
            theta_cum = np.cumsum(theta)
            theta_cum[-1] = 1.0
            z = np.searchsorted(theta_cum, rng.random(length)).astype(np.int32)
            u = rng.random(length)
            words = np.empty(length, dtype=np.int32)
            for i in range(length):
                words[i] = np.searchsorted(phi_cum[z[i]], u[i])
            documents.append(Document(f"d{doc_no:06d}", dates[t], words))
            assignments.append(z)
            matrix[:, t] += np.bincount(z, minlength=num_topics)
            doc_no += 1
    corpus = Corpus(documents, vocab, query_term=query_term)
    log.info("synthetic corpus: %d docs, %d tokens over %d days", len(documents), corpus.num_tokens, days)
    return SynthCorpus(corpus, assignments, TopicSeries(matrix, dates))


def generate_volume(gt: GroundTruth, true_series: TopicSeries, seed: int | None = None) -> np.ndarray:
    """Forward model: y(t) = b* + sum_k w*_k I*_k(t) + gaussian noise,
    floored at 0 and rounded to integer shares."""
    rng = np.random.default_rng((gt.seed, 1) if seed is None else seed)
    signal = gt.true_intercept + gt.true_weights @ true_series.matrix
    noise = rng.normal(0.0, gt.noise_sigma, size=signal.shape) if gt.noise_sigma > 0 else 0.0
    return np.rint(np.maximum(0.0, signal + noise)).astype(np.int64)


def match_topics(phi: np.ndarray, true_phi: np.ndarray) -> list[tuple[int, int, float]]:
    """Pair fitted topics with true topics by maximum-weight bipartite
    assignment on 1 - JSD (both matrices over the same vocabulary order).
    Returns (fitted_topic, true_topic, jsd) triples."""
    if phi.shape[1] != true_phi.shape[1]:
        raise ValueError("vocabulary sizes differ")
    cost = np.empty((phi.shape[0], true_phi.shape[0]))
    for i in range(phi.shape[0]):
        for j in range(true_phi.shape[0]):
            cost[i, j] = jsd(phi[i], true_phi[j])
    rows, cols = linear_sum_assignment(cost)
    return [(int(i), int(j), float(cost[i, j])) for i, j in zip(rows, cols)]


def write_bundle(
    out_dir: str | Path,
    gt: GroundTruth,
    synth: SynthCorpus,
    volume_raw: np.ndarray,
    query_term: str = "acme",
) -> dict[str, Path]:
    """Emit the file bundle the pipeline consumes: news JSONL, market CSV,
    word lists and a ground-truth JSON sidecar.

    Each document becomes a record whose headline is the query term and
    whose body is the space-joined tokens; the query term itself is listed
    as a stopword so tokenization reproduces the generated token streams."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dates = synth.true_series.dates
    if volume_raw.shape != (len(dates),):
        raise ValueError("volume length does not match the synthetic days")

    news_path = out / "news.jsonl"
    with open(news_path, "w", encoding="utf-8") as fh:
        for doc in synth.corpus.documents:
            body = " ".join(gt.vocabulary[w] for w in doc.tokens)
            rec = {
                "id": doc.doc_id,
                "timestamp": f"{doc.date.isoformat()}T12:00:00Z",
                "headline": query_term,
                "body": body,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    market_path = out / "market.csv"
    with open(market_path, "w", encoding="utf-8") as fh:
        fh.write("date,volume\n")
        for d, v in zip(dates, volume_raw):
            fh.write(f"{d.isoformat()},{int(v)}\n")

    stopwords_path = out / "stopwords.txt"
    stopwords_path.write_text(f"# synthetic stopwords\n{query_term}\n", encoding="utf-8")
    boilerplate_path = out / "boilerplate_words.txt"
    boilerplate_path.write_text("# none for synthetic data\n", encoding="utf-8")
    market_words_path = out / "market_words.txt"
    market_words_path.write_text("# none for synthetic data\n", encoding="utf-8")

    gt_path = out / "ground_truth.json"
    payload = {
        "alpha": gt.alpha,
        "intercept": gt.true_intercept,
        "noise_sigma": gt.noise_sigma,
        "seed": gt.seed,
        "support": gt.support,
        "vocabulary": gt.vocabulary,
        "weights": [float(w) for w in gt.true_weights],
        "phi": [[float(p) for p in row] for row in gt.true_phi],
    }
    with open(gt_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return {
        "news": news_path,
        "market": market_path,
        "stopwords": stopwords_path,
        "boilerplate_words": boilerplate_path,
        "market_words": market_words_path,
        "ground_truth": gt_path,
    }


def load_ground_truth(path: str | Path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    gt = GroundTruth(
        true_phi=np.asarray(payload["phi"], dtype=np.float64),
        alpha=float(payload["alpha"]),
        true_weights=np.asarray(payload["weights"], dtype=np.float64),
        true_intercept=float(payload["intercept"]),
        noise_sigma=float(payload["noise_sigma"]),
        seed=int(payload["seed"]),
        vocabulary=list(payload["vocabulary"]),
    )
    gt.validate()
    return gt
