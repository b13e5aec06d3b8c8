"""News ingestion, term selection and tokenization.

Raw news arrives as line-delimited JSON records (field names configurable).
Records matching a query term are tokenized into a date-indexed corpus with
a dense integer vocabulary, which is what the topic model consumes.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Iterator
from zoneinfo import ZoneInfo

import numpy as np

log = logging.getLogger(__name__)

# Maximal runs of alphanumerics; '.' or ',' kept only between two digits
# so "1.5" and "1,000" survive as single tokens.
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:(?<=[0-9])[.,](?=[0-9])[a-z0-9]+)*")


@dataclass(frozen=True)
class NewsRecord:
    id: str
    date: date
    headline: str
    body: str


@dataclass
class InputSchema:
    """Field mapping for line-delimited JSON news input."""

    id_field: str = "id"
    timestamp_field: str = "timestamp"
    headline_field: str = "headline"
    body_field: str = "body"
    timezone: str = "UTC"
    strict: bool = False


class Vocabulary:
    """Bijection between token strings and dense ids 0..V-1."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = []
        self.index: dict[str, int] = {}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        tid = self.index.get(token)
        if tid is None:
            tid = len(self.tokens)
            self.index[token] = tid
            self.tokens.append(token)
        return tid

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, token_id: int) -> str:
        return self.tokens[token_id]


@dataclass
class Document:
    doc_id: str
    date: date
    tokens: np.ndarray  # int32 token ids, non-empty


@dataclass
class Corpus:
    documents: list[Document]
    vocabulary: Vocabulary
    day_index: dict[date, list[str]] = field(default_factory=dict)
    query_term: str = ""

    def __post_init__(self):
        if not self.day_index:
            self.day_index = {}
            for doc in self.documents:
                self.day_index.setdefault(doc.date, []).append(doc.doc_id)

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def num_tokens(self) -> int:
        return sum(len(d.tokens) for d in self.documents)

    def dates(self) -> list[date]:
        return sorted(self.day_index)

    def validate(self) -> None:
        """Check structural invariants; raises ValueError on violation."""
        V = len(self.vocabulary)
        seen_dates = set()
        for doc in self.documents:
            if len(doc.tokens) == 0:
                raise ValueError(f"document {doc.doc_id!r} has no tokens")
            if doc.tokens.max(initial=0) >= V or doc.tokens.min(initial=0) < 0:
                raise ValueError(f"document {doc.doc_id!r} has token id outside vocabulary")
            if doc.doc_id not in self.day_index.get(doc.date, []):
                raise ValueError(f"document {doc.doc_id!r} missing from day index")
            seen_dates.add(doc.date)
        if seen_dates != set(self.day_index):
            raise ValueError("day index dates do not match document dates")
        if sum(len(v) for v in self.day_index.values()) != len(self.documents):
            raise ValueError("day index size does not match document count")


def _parse_date(value: str, tz: ZoneInfo) -> date:
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        if "T" in text or " " in text or "+" in text[10:]:
            dt = datetime.fromisoformat(text)
            if dt.tzinfo is not None:
                dt = dt.astimezone(tz)
            return dt.date()
        return date.fromisoformat(text)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {value!r}") from exc


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def ingest(source, schema: InputSchema | None = None) -> tuple[list[NewsRecord], int]:
    """Read line-delimited JSON news records.

    Returns (records, skipped) where ``skipped`` counts malformed lines.
    A line is malformed if it is not JSON, lacks id or timestamp, has an
    unparseable timestamp, or repeats an id. In strict mode any malformed
    line raises instead of being skipped. An unreadable source raises.
    """
    schema = schema or InputSchema()
    tz = ZoneInfo(schema.timezone)
    records: list[NewsRecord] = []
    seen_ids: set[str] = set()
    skipped = 0
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("record is not an object")
            rec_id = obj.get(schema.id_field)
            ts = obj.get(schema.timestamp_field)
            if rec_id is None or ts is None:
                raise ValueError("missing id or timestamp")
            rec_id = str(rec_id)
            if "\t" in rec_id or "\n" in rec_id:
                raise ValueError("id contains tab or newline")
            if rec_id in seen_ids:
                raise ValueError(f"duplicate id {rec_id!r}")
            rec_date = _parse_date(str(ts), tz)
            headline = str(obj.get(schema.headline_field) or "")
            body = str(obj.get(schema.body_field) or "")
        except ValueError as exc:
            if schema.strict:
                raise ValueError(f"line {lineno}: {exc}") from exc
            log.warning("skipping malformed line %d: %s", lineno, exc)
            skipped += 1
            continue
        seen_ids.add(rec_id)
        records.append(NewsRecord(rec_id, rec_date, headline, body))
    return records, skipped


def select_by_term(records: list[NewsRecord], term: str) -> list[NewsRecord]:
    """Keep records whose headline or body contains ``term``.

    Case-insensitive, on token boundaries: "BP" does not match "BPX".
    """
    if not term:
        raise ValueError("query term must be non-empty")
    pattern = re.compile(
        r"(?<![A-Za-z0-9])" + re.escape(term) + r"(?![A-Za-z0-9])", re.IGNORECASE
    )
    return [r for r in records if pattern.search(r.headline) or pattern.search(r.body)]


def tokenize_text(text: str, stopwords: set[str]) -> list[str]:
    """Lowercase, split on non-alphanumerics (digit-internal './,' kept),
    drop stopwords."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in stopwords]


def tokenize(
    records: list[NewsRecord], stopwords: set[str], query_term: str = ""
) -> Corpus:
    """Build a Corpus from records; headline and body form one token stream.

    Vocabulary ids are assigned in first-occurrence order over the input
    sequence. Records whose token stream becomes empty are dropped.
    """
    vocab = Vocabulary()
    documents: list[Document] = []
    for rec in records:
        toks = tokenize_text(rec.headline + " " + rec.body, stopwords)
        if not toks:
            log.debug("dropping empty document %s", rec.id)
            continue
        ids = np.array([vocab.add(t) for t in toks], dtype=np.int32)
        documents.append(Document(rec.id, rec.date, ids))
    return Corpus(documents, vocab, query_term=query_term)


def load_stopwords(path) -> set[str]:
    """One token per line; '#' starts a comment; tokens lowercased."""
    words: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tok = line.split("#", 1)[0].strip().lower()
            if tok:
                words.add(tok)
    return words


def save_corpus(corpus: Corpus, vocab_path, docs_path) -> None:
    """Persist as vocabulary TSV (id TAB token) and document TSV
    (doc_id TAB date TAB space-separated token ids)."""
    with open(vocab_path, "w", encoding="utf-8") as fh:
        for tid, tok in enumerate(corpus.vocabulary.tokens):
            fh.write(f"{tid}\t{tok}\n")
    with open(docs_path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            ids = " ".join(str(int(t)) for t in doc.tokens)
            fh.write(f"{doc.doc_id}\t{doc.date.isoformat()}\t{ids}\n")


def load_corpus(vocab_path, docs_path, query_term: str = "") -> Corpus:
    vocab = Vocabulary()
    with open(vocab_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            tid_str, tok = line.rstrip("\n").split("\t")
            tid = vocab.add(tok)
            if tid != int(tid_str):
                raise ValueError(f"non-dense vocabulary id {tid_str} for {tok!r}")
    documents: list[Document] = []
    with open(docs_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc_id, date_str, ids_str = line.rstrip("\n").split("\t")
            ids = np.array([int(x) for x in ids_str.split()], dtype=np.int32)
            documents.append(Document(doc_id, date.fromisoformat(date_str), ids))
    corpus = Corpus(documents, vocab, query_term=query_term)
    corpus.validate()
    return corpus
