from datetime import date, timedelta

import numpy as np
import pytest

from newsvol.lda import TopicModel
from newsvol.topic_series import (
    load_prune_report,
    load_series,
    news_volume,
    prune,
    save_prune_report,
    save_series,
)
from conftest import build_corpus


def _model(corpus, assignments, num_topics):
    """Consistent TopicModel around hand-picked assignments."""
    V = len(corpus.vocabulary)
    n_dk = np.zeros((len(corpus.documents), num_topics), dtype=np.int64)
    n_kw = np.zeros((num_topics, V), dtype=np.int64)
    for d, (doc, z) in enumerate(zip(corpus.documents, assignments)):
        n_dk[d] = np.bincount(z, minlength=num_topics)
        np.add.at(n_kw, (z, doc.tokens), 1)
    n_k = n_kw.sum(axis=1)
    beta = 0.01
    phi = (n_kw + beta) / (n_k + V * beta)[:, None]
    return TopicModel(
        phi=phi, assignments=[np.asarray(z, dtype=np.int32) for z in assignments],
        n_dk=n_dk, n_kw=n_kw, n_k=n_k,
        doc_ids=[doc.doc_id for doc in corpus.documents], alpha=0.5, beta=beta,
    )


def test_single_document_counts():
    day = date(2020, 2, 3)
    corpus = build_corpus([("d1", day, ["a", "b", "c"])])
    model = _model(corpus, [np.array([1, 1, 2])], num_topics=3)
    series = news_volume(model, corpus, (day, day))
    assert series.matrix[1, 0] == 2
    assert series.matrix[2, 0] == 1
    assert series.matrix[0, 0] == 0


def test_additivity_across_documents():
    day = date(2020, 2, 3)
    corpus = build_corpus([("d1", day, ["a"]), ("d2", day, ["b"])])
    model = _model(corpus, [np.array([1]), np.array([1])], num_topics=2)
    series = news_volume(model, corpus, (day, day))
    assert series.matrix[1, 0] == 2


def test_days_without_documents_are_zero():
    start, end = date(2020, 1, 1), date(2020, 1, 5)
    corpus = build_corpus([("d1", date(2020, 1, 3), ["a", "b"])])
    model = _model(corpus, [np.array([0, 0])], num_topics=2)
    series = news_volume(model, corpus, (start, end))
    assert series.dates == [start + timedelta(days=i) for i in range(5)]
    assert series.matrix[:, [0, 1, 3, 4]].sum() == 0
    assert series.matrix[0, 2] == 2


def test_document_outside_period_fatal():
    corpus = build_corpus([("d1", date(2020, 1, 10), ["a"])])
    model = _model(corpus, [np.array([0])], num_topics=1)
    with pytest.raises(ValueError):
        news_volume(model, corpus, (date(2020, 1, 1), date(2020, 1, 5)))


def _random_corpus_and_assignments(rng, num_topics=4):
    start = date(2021, 3, 1)
    entries, assignments = [], []
    for d in range(rng.integers(3, 12)):
        day = start + timedelta(days=int(rng.integers(0, 10)))
        tokens = [f"w{v}" for v in rng.integers(0, 25, size=rng.integers(1, 20))]
        entries.append((f"d{d}", day, tokens))
        assignments.append(rng.integers(0, num_topics, size=len(tokens)))
    return build_corpus(entries), assignments, (start, start + timedelta(days=14))


def test_matches_brute_force_recount():
    rng = np.random.default_rng(7)
    for _ in range(20):
        corpus, assignments, period = _random_corpus_and_assignments(rng)
        model = _model(corpus, assignments, num_topics=4)
        series = news_volume(model, corpus, period)
        # independent recount straight off the raw assignments
        expected = {}
        for doc, z in zip(corpus.documents, assignments):
            for k in z:
                expected[(int(k), doc.date)] = expected.get((int(k), doc.date), 0) + 1
        for k in range(4):
            for t, day in enumerate(series.dates):
                assert series.matrix[k, t] == expected.get((k, day), 0)


def test_column_sum_identity():
    rng = np.random.default_rng(8)
    corpus, assignments, period = _random_corpus_and_assignments(rng)
    model = _model(corpus, assignments, num_topics=4)
    series = news_volume(model, corpus, period)
    per_day = {}
    for doc in corpus.documents:
        per_day[doc.date] = per_day.get(doc.date, 0) + len(doc.tokens)
    for t, day in enumerate(series.dates):
        assert series.matrix[:, t].sum() == per_day.get(day, 0)
    assert series.matrix.sum() == corpus.num_tokens


def _phi_corpus(rows):
    """Corpus whose vocabulary carries the given per-topic top words, plus a
    model with one concentrated phi row per topic."""
    words = sorted({w for row in rows for w in row})
    day = date(2020, 1, 1)
    corpus = build_corpus([("d1", day, words)])
    V = len(corpus.vocabulary)
    phi = np.full((len(rows), V), 1e-9)
    for k, row in enumerate(rows):
        ids = [corpus.vocabulary.index[w] for w in row]
        phi[k, ids] = np.linspace(0.5, 0.3, len(ids))
    phi /= phi.sum(axis=1, keepdims=True)
    model = _model(corpus, [np.zeros(V, dtype=np.int64)], num_topics=len(rows))
    model.phi = phi
    return corpus, model


def _series_with_active_days(active_per_topic, total_days=120):
    matrix = np.zeros((len(active_per_topic), total_days), dtype=np.int64)
    for k, active in enumerate(active_per_topic):
        matrix[k, :active] = 1
    dates = [date(2020, 1, 1) + timedelta(days=t) for t in range(total_days)]
    from newsvol.topic_series import TopicSeries

    return TopicSeries(matrix, dates)


BOILER = {"reuters", "click", "messaging", "net", "double", "information"}


def test_prune_boilerplate_all_top_words():
    corpus, model = _phi_corpus([sorted(BOILER), ["profit", "q1", "q2", "q3", "q4", "q5"]])
    series = _series_with_active_days([100, 100])
    report = prune(model, corpus.vocabulary, series, BOILER, set(), min_days=80)
    assert report.statuses == ["boilerplate", "kept"]


def test_prune_one_shared_boilerplate_word_is_not_enough():
    row = ["reuters", "profit", "q1", "q2", "q3", "q4"]
    corpus, model = _phi_corpus([row])
    series = _series_with_active_days([100])
    report = prune(model, corpus.vocabulary, series, BOILER, set(), min_days=80)
    assert report.statuses == ["kept"]


def test_prune_rare_boundary():
    corpus, model = _phi_corpus([["a1", "a2", "a3", "a4", "a5", "a6"],
                                 ["b1", "b2", "b3", "b4", "b5", "b6"]])
    series = _series_with_active_days([79, 80])
    report = prune(model, corpus.vocabulary, series, set(), set(), min_days=80)
    assert report.statuses == ["rare", "kept"]


def test_prune_market_any_top_word():
    corpus, model = _phi_corpus([["stocks", "q1", "q2", "q3", "q4", "q5"]])
    series = _series_with_active_days([100])
    report = prune(model, corpus.vocabulary, series, set(), {"stocks", "hot"}, min_days=80)
    assert report.statuses == ["market"]


def test_prune_rule_order_first_match_wins():
    rows = [sorted(BOILER), ["stocks", "q1", "q2", "q3", "q4", "q5"]]
    corpus, model = _phi_corpus(rows)
    # topic 0 is all-boilerplate AND contains no market word; make it also
    # rare so boilerplate (checked first) must win; topic 1 is rare AND
    # market, rare must win
    series = _series_with_active_days([10, 10])
    market = BOILER | {"stocks"}
    report = prune(model, corpus.vocabulary, series, BOILER, market, min_days=80)
    assert report.statuses == ["boilerplate", "rare"]


def test_prune_partitions_topics():
    rng = np.random.default_rng(5)
    rows = [[f"t{k}_{i}" for i in range(6)] for k in range(6)]
    rows[1] = sorted(BOILER)
    rows[3][2] = "stocks"
    corpus, model = _phi_corpus(rows)
    series = _series_with_active_days(list(rng.integers(10, 120, size=6)))
    report = prune(model, corpus.vocabulary, series, BOILER, {"stocks"}, min_days=80)
    assert len(report.statuses) == 6
    assert set(report.statuses) <= {"kept", "boilerplate", "rare", "market"}
    counts = report.counts()
    assert sum(counts.values()) == 6
    for k in report.kept_ids:
        words = report.top_words[k]
        assert not all(w in BOILER for w in words)
        assert not any(w == "stocks" for w in words)
        assert series.active_days[k] >= 80


def test_prune_min_days_validation():
    corpus, model = _phi_corpus([["a", "b", "c", "d", "e", "f"]])
    series = _series_with_active_days([10])
    with pytest.raises(ValueError):
        prune(model, corpus.vocabulary, series, set(), set(), min_days=0)


def test_series_roundtrip(tmp_path):
    series = _series_with_active_days([5, 17, 0], total_days=30)
    series.matrix[1, 4] = 9
    save_series(series, tmp_path / "series.csv")
    back = load_series(tmp_path / "series.csv")
    assert back.dates == series.dates
    assert np.array_equal(back.matrix, series.matrix)


def test_prune_report_roundtrip(tmp_path):
    corpus, model = _phi_corpus([["a", "b", "c", "d", "e", "f"],
                                 ["stocks", "g", "h", "i", "j", "k"]])
    series = _series_with_active_days([100, 100])
    report = prune(model, corpus.vocabulary, series, set(), {"stocks"}, min_days=80)
    save_prune_report(report, tmp_path / "prune.csv")
    back = load_prune_report(tmp_path / "prune.csv")
    assert back.statuses == report.statuses
    assert back.top_words == report.top_words
