"""Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.

Every token ends up tagged with exactly one topic (the final sweep's
assignment), which is what the daily news-volume series are counted from.
Randomness comes from a single numpy PCG64 generator: initial assignments
are one ``integers`` draw, then each sweep consumes one uniform per token
in document order, so runs are reproducible given the seed.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import gammaln

from .corpus import Corpus

log = logging.getLogger(__name__)

PHI_MAGIC = b"NEWSVOL-PHI-v1\n"
ASSIGN_MAGIC = "#NEWSVOL-ASSIGN-v1"


@dataclass
class LdaConfig:
    """Sampler configuration. ``alpha=None`` resolves to 50/K."""

    num_topics: int = 100
    alpha: float | None = None
    beta: float = 0.01
    burn_in_iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_topics < 1:
            raise ValueError("num_topics must be >= 1")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.burn_in_iterations < 1:
            raise ValueError("burn_in_iterations must be >= 1")

    @property
    def resolved_alpha(self) -> float:
        return 50.0 / self.num_topics if self.alpha is None else self.alpha


@dataclass
class TopicModel:
    phi: np.ndarray  # K x V topic-word probabilities
    assignments: list[np.ndarray]  # per document, per token position, topic id
    n_dk: np.ndarray  # D x K
    n_kw: np.ndarray  # K x V
    n_k: np.ndarray  # K
    doc_ids: list[str]
    alpha: float
    beta: float
    loglik: list[float] = field(default_factory=list)

    @property
    def num_topics(self) -> int:
        return self.phi.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.phi.shape[1]

    def top_words(self, k: int, n: int) -> np.ndarray:
        """Token ids of the n most probable words of topic k.

        Equal probabilities are broken by ascending token id so reports
        are reproducible.
        """
        order = np.lexsort((np.arange(self.vocab_size), -self.phi[k]))
        return order[:n]

    def validate(self, corpus: Corpus | None = None) -> None:
        """Counts must be exactly recomputable from the assignments and
        phi rows must be probability distributions. Passing the corpus the
        model was fitted on enables the full topic-word recount."""
        K, V = self.phi.shape
        n_dk = np.zeros((len(self.assignments), K), dtype=np.int64)
        for d, z in enumerate(self.assignments):
            n_dk[d] = np.bincount(z, minlength=K)
        if not np.array_equal(n_dk, self.n_dk):
            raise ValueError("doc-topic counts inconsistent with assignments")
        if not np.array_equal(self.n_kw.sum(axis=1), self.n_k):
            raise ValueError("topic totals inconsistent with topic-word counts")
        if not np.allclose(self.phi.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError("phi rows do not sum to 1")
        if corpus is not None:
            n_kw = np.zeros((K, V), dtype=np.int64)
            for doc, z in zip(corpus.documents, self.assignments):
                np.add.at(n_kw, (z, doc.tokens), 1)
            if not np.array_equal(n_kw, self.n_kw):
                raise ValueError("topic-word counts inconsistent with assignments")


def conditional_weight(
    n_dk: float, n_kw: float, n_k: float, alpha: float, beta: float, vocab_size: int
) -> float:
    """Unnormalized collapsed Gibbs conditional for one (doc, word, topic).

    Counts must exclude the token being resampled. Strictly positive for
    valid priors.
    """
    return (n_dk + alpha) * (n_kw + beta) / (n_k + vocab_size * beta)


@njit(cache=True)
def _gibbs_sweep(token_word, token_doc, z, n_dk, n_kw, n_k, alpha, beta, vbeta, uniforms, cdf):
    n_tokens = token_word.shape[0]
    num_topics = n_k.shape[0]
    for i in range(n_tokens):
        w = token_word[i]
        d = token_doc[i]
        k_old = z[i]
        n_dk[d, k_old] -= 1
        n_kw[k_old, w] -= 1
        n_k[k_old] -= 1
        total = 0.0
        for k in range(num_topics):
            total += (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + vbeta)
            cdf[k] = total
        u = uniforms[i] * total
        k_new = 0
        while cdf[k_new] <= u:
            k_new += 1
        z[i] = k_new
        n_dk[d, k_new] += 1
        n_kw[k_new, w] += 1
        n_k[k_new] += 1


class GibbsSampler:
    """One collapsed Gibbs chain over a corpus.

    Exposes single sweeps so callers can watch count invariants and the
    corpus log-likelihood between sweeps.
    """

    def __init__(self, corpus: Corpus, cfg: LdaConfig):
        if len(corpus) == 0:
            raise ValueError("cannot fit LDA on an empty corpus")
        self.cfg = cfg
        self.alpha = cfg.resolved_alpha
        self.beta = cfg.beta
        self.K = cfg.num_topics
        self.V = len(corpus.vocabulary)
        self.doc_ids = [d.doc_id for d in corpus.documents]
        self._doc_lengths = np.array([len(d.tokens) for d in corpus.documents])
        self.token_word = np.concatenate([d.tokens for d in corpus.documents]).astype(np.int32)
        self.token_doc = np.repeat(
            np.arange(len(corpus.documents), dtype=np.int32), self._doc_lengths
        )
        n = self.token_word.shape[0]
        self.rng = np.random.default_rng(cfg.seed)
        self.z = self.rng.integers(0, self.K, size=n).astype(np.int32)
        self.n_dk = np.zeros((len(corpus.documents), self.K), dtype=np.int32)
        self.n_kw = np.zeros((self.K, self.V), dtype=np.int32)
        self.n_k = np.zeros(self.K, dtype=np.int32)
        np.add.at(self.n_dk, (self.token_doc, self.z), 1)
        np.add.at(self.n_kw, (self.z, self.token_word), 1)
        self.n_k += np.bincount(self.z, minlength=self.K).astype(np.int32)
        self._cdf = np.empty(self.K, dtype=np.float64)
        self.sweeps_done = 0
        self.loglik: list[float] = []

    def sweep(self) -> float:
        """Resample every token once; returns the post-sweep log p(w|z)."""
        uniforms = self.rng.random(self.token_word.shape[0])
        _gibbs_sweep(
            self.token_word, self.token_doc, self.z,
            self.n_dk, self.n_kw, self.n_k,
            self.alpha, self.beta, self.V * self.beta,
            uniforms, self._cdf,
        )
        self.sweeps_done += 1
        ll = self.log_likelihood()
        self.loglik.append(ll)
        return ll

    def log_likelihood(self) -> float:
        """Collapsed log p(words | assignments) given the priors."""
        K, V, beta = self.K, self.V, self.beta
        ll = K * gammaln(V * beta) - K * V * gammaln(beta)
        ll += gammaln(self.n_kw + beta).sum() - gammaln(self.n_k + V * beta).sum()
        return float(ll)

    def phi(self) -> np.ndarray:
        return (self.n_kw + self.beta) / (self.n_k + self.V * self.beta)[:, None]

    def assignments(self) -> list[np.ndarray]:
        out = []
        start = 0
        for length in self._doc_lengths:
            out.append(self.z[start : start + length].copy())
            start += length
        return out

    def model(self) -> TopicModel:
        return TopicModel(
            phi=self.phi(),
            assignments=self.assignments(),
            n_dk=self.n_dk.astype(np.int64),
            n_kw=self.n_kw.astype(np.int64),
            n_k=self.n_k.astype(np.int64),
            doc_ids=list(self.doc_ids),
            alpha=self.alpha,
            beta=self.beta,
            loglik=list(self.loglik),
        )


def fit(corpus: Corpus, cfg: LdaConfig) -> TopicModel:
    """Run ``cfg.burn_in_iterations`` full sweeps from a seeded random
    initialization; the final sweep's assignments are the token tags."""
    sampler = GibbsSampler(corpus, cfg)
    report_every = max(1, cfg.burn_in_iterations // 10)
    for i in range(cfg.burn_in_iterations):
        ll = sampler.sweep()
        log.debug("sweep %d/%d log-likelihood %.2f", i + 1, cfg.burn_in_iterations, ll)
        if (i + 1) % report_every == 0:
            log.info("sweep %d/%d log-likelihood %.2f", i + 1, cfg.burn_in_iterations, ll)
    return sampler.model()


def save_model(model: TopicModel, phi_path, assign_path) -> None:
    """Phi as a small binary (magic, K, V, float64 row-major); assignments
    as TSV with a magic first line."""
    K, V = model.phi.shape
    with open(phi_path, "wb") as fh:
        fh.write(PHI_MAGIC)
        fh.write(struct.pack("<QQ", K, V))
        fh.write(np.ascontiguousarray(model.phi, dtype=np.float64).tobytes())
    with open(assign_path, "w", encoding="utf-8") as fh:
        fh.write(ASSIGN_MAGIC + "\n")
        for doc_id, z in zip(model.doc_ids, model.assignments):
            fh.write(f"{doc_id}\t{' '.join(str(int(k)) for k in z)}\n")


def load_phi(phi_path) -> np.ndarray:
    with open(phi_path, "rb") as fh:
        magic = fh.read(len(PHI_MAGIC))
        if magic != PHI_MAGIC:
            raise ValueError(f"{phi_path}: not a phi matrix file")
        K, V = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype=np.float64)
    if data.size != K * V:
        raise ValueError(f"{phi_path}: truncated phi matrix")
    return data.reshape(K, V)


def load_assignments(assign_path) -> tuple[list[str], list[np.ndarray]]:
    doc_ids: list[str] = []
    assignments: list[np.ndarray] = []
    with open(assign_path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != ASSIGN_MAGIC:
            raise ValueError(f"{assign_path}: not an assignments file")
        for line in fh:
            if not line.strip():
                continue
            doc_id, ks = line.rstrip("\n").split("\t")
            doc_ids.append(doc_id)
            assignments.append(np.array([int(k) for k in ks.split()], dtype=np.int32))
    return doc_ids, assignments
