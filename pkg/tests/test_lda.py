from datetime import date, timedelta

import numpy as np
import pytest

from newsvol import lda, synth
from newsvol.lda import GibbsSampler, LdaConfig, conditional_weight
from newsvol.corpus import Corpus, Vocabulary

# frozen by direct evaluation of (n_dk+a)(n_kw+b)/(n_k+V*b) = 2.5*3.01/20.1
COND_EXPECTED = 0.37437810945273625


def test_conditional_weight_frozen_value():
    got = conditional_weight(2, 3, 20, alpha=0.5, beta=0.01, vocab_size=10)
    assert got == pytest.approx(COND_EXPECTED, abs=1e-12)


def test_conditional_weight_empty_counts():
    assert conditional_weight(0, 0, 0, alpha=1.0, beta=1.0, vocab_size=2) == 0.5


def test_conditional_weight_beta_scaling_matches_formula():
    # with n_kw = n_k = 0 the hand formula gives a*b/(V*b); the ratio under
    # beta doubling is therefore (2b/(V*2b)) / (b/(V*b)) exactly
    alpha, beta, V = 0.7, 0.01, 10
    w1 = conditional_weight(0, 0, 0, alpha, beta, V)
    w2 = conditional_weight(0, 0, 0, alpha, 2 * beta, V)
    factor = (2 * beta / (V * 2 * beta)) / (beta / (V * beta))
    assert w2 == pytest.approx(w1 * factor, rel=1e-12)
    assert w1 == pytest.approx(alpha / V, rel=1e-12)


def test_conditional_weight_strictly_positive():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n_dk, n_kw = rng.integers(0, 50, size=2)
        n_k = n_kw + rng.integers(0, 50)
        alpha, beta = rng.uniform(1e-3, 5, size=2)
        V = int(rng.integers(1, 100))
        assert conditional_weight(n_dk, n_kw, n_k, alpha, beta, V) > 0


def test_config_validation():
    with pytest.raises(ValueError):
        LdaConfig(num_topics=0)
    with pytest.raises(ValueError):
        LdaConfig(num_topics=2, alpha=0.0)
    with pytest.raises(ValueError):
        LdaConfig(num_topics=2, beta=-1.0)
    with pytest.raises(ValueError):
        LdaConfig(num_topics=2, burn_in_iterations=0)
    assert LdaConfig(num_topics=4).resolved_alpha == 12.5
    assert LdaConfig(num_topics=4, alpha=0.3).resolved_alpha == 0.3


def test_fit_k1_single_document(make_corpus):
    corpus = make_corpus([("d1", date(2020, 1, 1), ["a", "b", "a", "c", "a"])])
    model = lda.fit(corpus, LdaConfig(num_topics=1, burn_in_iterations=5, seed=0))
    assert np.all(model.assignments[0] == 0)
    beta = model.beta
    counts = np.bincount(corpus.documents[0].tokens, minlength=3)
    expected = (counts + beta) / (counts.sum() + 3 * beta)
    assert np.allclose(model.phi[0], expected, atol=1e-12)


def test_fit_empty_corpus_fatal():
    with pytest.raises(ValueError):
        lda.fit(Corpus([], Vocabulary()), LdaConfig(num_topics=2, burn_in_iterations=5))


def _separable_corpus(seed):
    gt = synth.make_ground_truth(num_topics=2, words_per_topic=25, num_causal=1,
                                 alpha=0.25, seed=seed)
    sc = synth.generate_corpus(gt, docs_per_day=10, days=20, tokens_per_doc=40, seed=seed)
    return gt, sc.corpus


def _tv_to_truth(phi, true_phi):
    # minimum over the two relabelings of the max per-topic total variation
    direct = max(0.5 * np.abs(phi[i] - true_phi[i]).sum() for i in range(2))
    swapped = max(0.5 * np.abs(phi[i] - true_phi[1 - i]).sum() for i in range(2))
    return min(direct, swapped)


def test_fit_recovers_separated_topics(make_corpus):
    gt, corpus = _separable_corpus(3)
    cfg = LdaConfig(num_topics=2, alpha=0.5, burn_in_iterations=300, seed=103)
    model = lda.fit(corpus, cfg)
    assert _tv_to_truth(model.phi, gt.true_phi) <= 0.05


def test_fit_deterministic(make_corpus):
    _, corpus = _separable_corpus(4)
    cfg = LdaConfig(num_topics=2, alpha=0.5, burn_in_iterations=30, seed=11)
    m1 = lda.fit(corpus, cfg)
    m2 = lda.fit(corpus, cfg)
    assert np.array_equal(m1.phi, m2.phi)
    for a, b in zip(m1.assignments, m2.assignments):
        assert np.array_equal(a, b)


def test_exchangeability_smoke():
    # a sequential sampler cannot be bitwise invariant to document order,
    # but reordering must not change which topics it finds
    gt, corpus = _separable_corpus(5)
    reordered = Corpus(list(reversed(corpus.documents)), corpus.vocabulary)
    cfg = LdaConfig(num_topics=2, alpha=0.5, burn_in_iterations=300, seed=105)
    m1 = lda.fit(corpus, cfg)
    m2 = lda.fit(reordered, cfg)
    assert _tv_to_truth(m1.phi, gt.true_phi) <= 0.05
    assert _tv_to_truth(m2.phi, gt.true_phi) <= 0.05


def test_sweep_invariants_small(make_corpus):
    rng = np.random.default_rng(2)
    entries = []
    for d in range(8):
        tokens = [f"w{v}" for v in rng.integers(0, 30, size=rng.integers(3, 15))]
        entries.append((f"d{d}", date(2020, 1, 1) + timedelta(days=d), tokens))
    corpus = make_corpus(entries)
    sampler = GibbsSampler(corpus, LdaConfig(num_topics=3, burn_in_iterations=10, seed=9))
    total = corpus.num_tokens
    for _ in range(10):
        sampler.sweep()
        assert sampler.n_dk.sum() == total
        assert sampler.n_kw.sum() == total
        assert sampler.n_k.sum() == total
        assert np.array_equal(sampler.n_kw.sum(axis=1), sampler.n_k)
        assert np.allclose(sampler.phi().sum(axis=1), 1.0, atol=1e-9)


def test_loglik_logged_per_sweep(make_corpus):
    corpus = make_corpus([("d1", date(2020, 1, 1), ["a", "b", "c", "a"])])
    model = lda.fit(corpus, LdaConfig(num_topics=2, burn_in_iterations=12, seed=1))
    assert len(model.loglik) == 12
    assert all(np.isfinite(v) for v in model.loglik)


def test_model_validate_against_corpus(make_corpus):
    _, corpus = _separable_corpus(6)
    model = lda.fit(corpus, LdaConfig(num_topics=2, alpha=0.5, burn_in_iterations=20, seed=0))
    model.validate(corpus)


def test_top_words_tie_break():
    phi = np.array([[0.25, 0.25, 0.25, 0.25]])
    model = lda.TopicModel(
        phi=phi, assignments=[], n_dk=np.zeros((0, 1), dtype=np.int64),
        n_kw=np.zeros((1, 4), dtype=np.int64), n_k=np.zeros(1, dtype=np.int64),
        doc_ids=[], alpha=0.5, beta=0.01,
    )
    assert model.top_words(0, 3).tolist() == [0, 1, 2]


def test_model_roundtrip(tmp_path, make_corpus):
    _, corpus = _separable_corpus(7)
    model = lda.fit(corpus, LdaConfig(num_topics=2, alpha=0.5, burn_in_iterations=10, seed=3))
    lda.save_model(model, tmp_path / "phi.bin", tmp_path / "assign.tsv")
    phi = lda.load_phi(tmp_path / "phi.bin")
    doc_ids, zs = lda.load_assignments(tmp_path / "assign.tsv")
    assert np.array_equal(phi, model.phi)
    assert doc_ids == model.doc_ids
    for a, b in zip(zs, model.assignments):
        assert np.array_equal(a, b)
