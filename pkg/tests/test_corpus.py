import json
from datetime import date

import numpy as np
import pytest

from newsvol import corpus as corpus_mod
from newsvol.corpus import (
    InputSchema,
    NewsRecord,
    ingest,
    load_corpus,
    load_stopwords,
    save_corpus,
    select_by_term,
    tokenize,
    tokenize_text,
)


def _lines(objs):
    return [json.dumps(o) + "\n" for o in objs]


def _rec(body, rec_id="r1", day=date(2020, 1, 2), headline=""):
    return NewsRecord(rec_id, day, headline, body)


def test_ingest_valid_lines():
    lines = _lines(
        [
            {"id": "a", "timestamp": "2020-01-02", "headline": "h", "body": "b"},
            {"id": "b", "timestamp": "2020-01-03T09:30:00Z", "headline": "h2", "body": "b2"},
            {"id": "c", "timestamp": "2020-01-04", "headline": "", "body": "x"},
        ]
    )
    records, skipped = ingest(lines)
    assert len(records) == 3
    assert skipped == 0
    assert records[0].id == "a" and records[0].date == date(2020, 1, 2)
    assert records[1].date == date(2020, 1, 3)


def test_ingest_missing_timestamp_skipped():
    lines = _lines(
        [
            {"id": "a", "timestamp": "2020-01-02", "body": "x"},
            {"id": "b", "body": "no timestamp"},
            {"id": "c", "timestamp": "2020-01-04", "body": "y"},
        ]
    )
    records, skipped = ingest(lines)
    assert [r.id for r in records] == ["a", "c"]
    assert skipped == 1


def test_ingest_strict_mode_raises():
    lines = _lines([{"id": "a", "body": "no timestamp"}])
    with pytest.raises(ValueError):
        ingest(lines, InputSchema(strict=True))


def test_ingest_empty_file():
    records, skipped = ingest([])
    assert records == []
    assert skipped == 0


def test_ingest_unreadable_source(tmp_path):
    with pytest.raises(OSError):
        ingest(tmp_path / "missing.jsonl")


def test_ingest_duplicate_id_skipped():
    lines = _lines(
        [
            {"id": "a", "timestamp": "2020-01-02", "body": "x"},
            {"id": "a", "timestamp": "2020-01-03", "body": "y"},
        ]
    )
    records, skipped = ingest(lines)
    assert len(records) == 1 and skipped == 1


def test_ingest_custom_schema():
    lines = [json.dumps({"uid": "a", "when": "2020-05-01", "title": "t", "text": "b"}) + "\n"]
    schema = InputSchema(id_field="uid", timestamp_field="when",
                         headline_field="title", body_field="text")
    records, skipped = ingest(lines, schema)
    assert skipped == 0
    assert records[0].headline == "t" and records[0].body == "b"


def test_select_by_term_case_insensitive():
    records = [_rec("Toyota recalls cars", "r1"), _rec("Apple earnings", "r2")]
    out = select_by_term(records, "toyota")
    assert out == [records[0]]


def test_select_by_term_token_boundary():
    records = [_rec("BPX expands", "r1"), _rec("BP expands", "r2")]
    out = select_by_term(records, "BP")
    assert out == [records[1]]


def test_select_by_term_searches_headline_too():
    records = [_rec("nothing here", headline="Toyota profit")]
    assert select_by_term(records, "toyota") == records


def test_select_by_term_no_match():
    records = [_rec("Apple earnings")]
    assert select_by_term(records, "toyota") == []


def test_select_by_term_subset_idempotent():
    records = [_rec(b, f"r{i}") for i, b in enumerate(["Toyota up", "toyota down", "Ford flat"])]
    out = select_by_term(records, "Toyota")
    assert all(r in records for r in out)
    assert select_by_term(out, "Toyota") == out


def test_select_by_term_empty_term():
    with pytest.raises(ValueError):
        select_by_term([_rec("x")], "")


def test_tokenize_stopwords():
    assert tokenize_text("The Profit of Toyota", {"the", "of"}) == ["profit", "toyota"]


def test_tokenize_numeric_internal_punctuation():
    assert tokenize_text("up 1.5 pct", set()) == ["up", "1.5", "pct"]
    assert tokenize_text("1,000 shares, more.", set()) == ["1,000", "shares", "more"]


def test_tokenize_drops_empty_document():
    records = [_rec("the of", "r1"), _rec("profit", "r2")]
    corpus = tokenize(records, {"the", "of"})
    assert [d.doc_id for d in corpus.documents] == ["r2"]


def test_tokenize_concatenates_headline_and_body():
    records = [_rec("margin rises", headline="Toyota profit")]
    corpus = tokenize(records, set())
    words = [corpus.vocabulary[int(t)] for t in corpus.documents[0].tokens]
    assert words == ["toyota", "profit", "margin", "rises"]


def test_tokenize_invariants():
    stop = {"the", "a"}
    records = [
        _rec("the cat sat", "r1", date(2020, 1, 2)),
        _rec("a cat ran far", "r2", date(2020, 1, 2)),
        _rec("dog sat", "r3", date(2020, 1, 5)),
    ]
    corpus = tokenize(records, stop)
    corpus.validate()
    for doc in corpus.documents:
        assert all(corpus.vocabulary[int(t)] not in stop for t in doc.tokens)
    # dense first-occurrence vocabulary ids
    assert corpus.vocabulary.tokens == ["cat", "sat", "ran", "far", "dog"]
    assert sorted(corpus.vocabulary.index.values()) == list(range(len(corpus.vocabulary)))
    # day index sizes sum to the number of retained documents
    assert sum(len(ids) for ids in corpus.day_index.values()) == len(corpus)
    assert set(corpus.day_index) == {date(2020, 1, 2), date(2020, 1, 5)}


def test_corpus_roundtrip(tmp_path, make_corpus):
    corpus = make_corpus(
        [
            ("d1", date(2020, 3, 1), ["profit", "rises", "profit"]),
            ("d2", date(2020, 3, 2), ["recall", "safety"]),
        ],
        query_term="acme",
    )
    save_corpus(corpus, tmp_path / "vocab.tsv", tmp_path / "docs.tsv")
    back = load_corpus(tmp_path / "vocab.tsv", tmp_path / "docs.tsv", "acme")
    assert back.vocabulary.tokens == corpus.vocabulary.tokens
    assert [d.doc_id for d in back.documents] == ["d1", "d2"]
    for a, b in zip(corpus.documents, back.documents):
        assert a.date == b.date
        assert np.array_equal(a.tokens, b.tokens)


def test_load_stopwords(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("# comment\nThe\nof  # trailing\n\nand\n", encoding="utf-8")
    assert load_stopwords(path) == {"the", "of", "and"}


def test_validate_catches_bad_token_id(make_corpus):
    corpus = make_corpus([("d1", date(2020, 1, 1), ["a", "b"])])
    corpus.documents[0].tokens = np.array([0, 99], dtype=np.int32)
    with pytest.raises(ValueError):
        corpus.validate()
