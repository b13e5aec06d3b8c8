"""Daily per-topic news volume and topic pruning.

The news volume of topic k on day t is the count of token positions in
documents dated t whose final Gibbs assignment is k. Pruning removes
boilerplate wire-service topics, topics active on too few days, and
topics describing market activity itself.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .corpus import Corpus, Vocabulary
from .lda import TopicModel

log = logging.getLogger(__name__)

KEPT = "kept"
BOILERPLATE = "boilerplate"
RARE = "rare"
MARKET = "market"


@dataclass
class TopicSeries:
    matrix: np.ndarray  # K topics x T days, words-per-day counts
    dates: list[date]  # calendar date axis, consecutive days

    @property
    def num_topics(self) -> int:
        return self.matrix.shape[0]

    @property
    def active_days(self) -> np.ndarray:
        return (self.matrix > 0).sum(axis=1)

    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)


@dataclass
class PruneReport:
    statuses: list[str]  # one of kept/boilerplate/rare/market per topic
    top_words: list[list[str]]  # phi-ranked tokens per topic

    @property
    def kept_ids(self) -> list[int]:
        return [k for k, s in enumerate(self.statuses) if s == KEPT]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.statuses:
            out[s] = out.get(s, 0) + 1
        return out


def news_volume(model: TopicModel, corpus: Corpus, period: tuple[date, date]) -> TopicSeries:
    """Count token positions per (topic, day) over the inclusive period.

    Days without documents get zero columns. A document dated outside the
    period is a consistency error.
    """
    start, end = period
    if end < start:
        raise ValueError("period end precedes start")
    num_days = (end - start).days + 1
    matrix = np.zeros((model.num_topics, num_days), dtype=np.int64)
    for doc, z in zip(corpus.documents, model.assignments):
        t = (doc.date - start).days
        if t < 0 or t >= num_days:
            raise ValueError(f"document {doc.doc_id!r} dated {doc.date} outside period")
        matrix[:, t] += np.bincount(z, minlength=model.num_topics)
    dates = [start + timedelta(days=i) for i in range(num_days)]
    return TopicSeries(matrix, dates)


def prune(
    model: TopicModel,
    vocabulary: Vocabulary,
    series: TopicSeries,
    boilerplate_words: set[str],
    market_words: set[str],
    min_days: int = 80,
    top_n: int = 6,
) -> PruneReport:
    """Classify each topic as kept or eliminated.

    Rules in order, first match wins: boilerplate if ALL top words are in
    the boilerplate set; rare if active on fewer than ``min_days`` days;
    market if ANY top word is in the market set.
    """
    if min_days < 1:
        raise ValueError("min_days must be >= 1")
    active = series.active_days
    statuses: list[str] = []
    top_words: list[list[str]] = []
    for k in range(model.num_topics):
        words = [vocabulary[int(i)] for i in model.top_words(k, top_n)]
        top_words.append(words)
        if words and all(w in boilerplate_words for w in words):
            statuses.append(BOILERPLATE)
        elif active[k] < min_days:
            statuses.append(RARE)
        elif any(w in market_words for w in words):
            statuses.append(MARKET)
        else:
            statuses.append(KEPT)
    report = PruneReport(statuses, top_words)
    log.info("pruning: %s", report.counts())
    return report


def save_series(series: TopicSeries, path) -> None:
    """CSV with a date column and one column per topic id."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + [str(k) for k in range(series.num_topics)])
        for t, day in enumerate(series.dates):
            writer.writerow([day.isoformat()] + [str(int(x)) for x in series.matrix[:, t]])


def load_series(path) -> TopicSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        num_topics = len(header) - 1
        dates: list[date] = []
        rows: list[list[int]] = []
        for row in reader:
            dates.append(date.fromisoformat(row[0]))
            rows.append([int(x) for x in row[1:]])
    matrix = np.array(rows, dtype=np.int64).reshape(len(dates), num_topics).T
    return TopicSeries(matrix, dates)


def save_prune_report(report: PruneReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["topic_id", "status", "top_words"])
        for k, (status, words) in enumerate(zip(report.statuses, report.top_words)):
            writer.writerow([str(k), status, "|".join(words)])


def load_prune_report(path) -> PruneReport:
    statuses: list[str] = []
    top_words: list[list[str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            statuses.append(row[1])
            top_words.append(row[2].split("|") if row[2] else [])
    return PruneReport(statuses, top_words)
