"""Declarative pipeline configuration.

A single YAML file (plus a few CLI flag overrides) drives every stage.
Each modeling constant is a named key with the default values used
throughout: 100 topics, 80-day minimum topic activity, top-6 pruning
words, 504-day median window, 95th-percentile peaks in 6-month windows,
0.5% FVE cut, 10% FPE ratio, 0.5 JSD edge threshold and the 5,000-record
batch inclusion floor.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path

import numpy as np
import yaml

from .corpus import load_stopwords
from .lda import LdaConfig


class ConfigError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


@dataclass
class PipelineConfig:
    output_dir: Path
    term: str
    period_start: date
    period_end: date
    news_path: Path | None = None
    market_path: Path | None = None
    stopwords_path: Path | None = None
    boilerplate_path: Path | None = None
    market_words_path: Path | None = None

    num_topics: int = 100
    alpha: float | None = None  # None -> 50/K
    beta: float = 0.01
    burn_in_iterations: int = 1000

    min_active_days: int = 80
    top_words: int = 6

    median_window_days: int = 504
    median_centered: bool = True
    peak_window_months: int = 6
    peak_percentile: float = 95.0

    cv_folds: int = 10
    cv_repeats: int = 100
    lambda_points: int = 100
    lambda_decades: float = 4.0
    fve_threshold: float = 0.005
    fpe_ratio: float = 0.10

    jsd_threshold: float = 0.5

    batch_terms: tuple[str, ...] = ()
    min_records: int = 5000

    seed: int = 0

    stopwords: frozenset = frozenset()
    boilerplate_words: frozenset = frozenset()
    market_words: frozenset = frozenset()

    def validate(self, require_files: bool = True) -> None:
        if self.period_start > self.period_end:
            raise ConfigError("period start is after period end")
        if not self.term and not self.batch_terms:
            raise ConfigError("a query term (or batch term list) is required")
        for name in ("num_topics", "burn_in_iterations", "min_active_days", "top_words",
                     "median_window_days", "peak_window_months", "cv_folds",
                     "cv_repeats", "lambda_points", "min_records"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if not 0 < self.peak_percentile < 100:
            raise ConfigError("peak percentile must lie in (0, 100)")
        if not 0 < self.fve_threshold < 1:
            raise ConfigError("fve_threshold must lie in (0, 1)")
        if not 0 < self.fpe_ratio < 1:
            raise ConfigError("fpe_ratio must lie in (0, 1)")
        if not 0 < self.jsd_threshold <= 1:
            raise ConfigError("jsd_threshold must lie in (0, 1]")
        if self.lambda_decades <= 0:
            raise ConfigError("lambda_decades must be positive")
        if require_files:
            for label, path in (("news", self.news_path), ("market", self.market_path)):
                if path is None:
                    raise ConfigError(f"missing {label} path")
                if not Path(path).is_file():
                    raise ConfigError(f"{label} file not found: {path}")
            for label, path in (("stopwords", self.stopwords_path),
                                ("boilerplate words", self.boilerplate_path),
                                ("market words", self.market_words_path)):
                if path is not None and not Path(path).is_file():
                    raise ConfigError(f"{label} file not found: {path}")

    def load_word_lists(self) -> "PipelineConfig":
        """Return a copy with the word-list files read into sets."""
        def read(path):
            return frozenset(load_stopwords(path)) if path else frozenset()
        return replace(
            self,
            stopwords=read(self.stopwords_path),
            boilerplate_words=read(self.boilerplate_path),
            market_words=read(self.market_words_path),
        )

    def stage_seed(self, ordinal: int) -> int:
        """Independent per-stage stream derived from the run seed."""
        return int(np.random.SeedSequence((self.seed, ordinal)).generate_state(1)[0])

    def lda_config(self) -> LdaConfig:
        return LdaConfig(
            num_topics=self.num_topics,
            alpha=self.alpha,
            beta=self.beta,
            burn_in_iterations=self.burn_in_iterations,
            seed=self.stage_seed(1),
        )

    def regression_seed(self) -> int:
        return self.stage_seed(2)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in ("stopwords", "boilerplate_words", "market_words"):
                continue
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, date):
                value = value.isoformat()
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


_SECTIONS = {
    "paths": {
        "news": "news_path",
        "market": "market_path",
        "stopwords": "stopwords_path",
        "boilerplate_words": "boilerplate_path",
        "market_words": "market_words_path",
        "output_dir": "output_dir",
    },
    "lda": {
        "num_topics": "num_topics",
        "alpha": "alpha",
        "beta": "beta",
        "burn_in_iterations": "burn_in_iterations",
    },
    "pruning": {
        "min_active_days": "min_active_days",
        "top_words": "top_words",
    },
    "market": {
        "median_window_days": "median_window_days",
        "median_centered": "median_centered",
        "peak_window_months": "peak_window_months",
        "peak_percentile": "peak_percentile",
    },
    "regression": {
        "cv_folds": "cv_folds",
        "cv_repeats": "cv_repeats",
        "lambda_points": "lambda_points",
        "lambda_decades": "lambda_decades",
        "fve_threshold": "fve_threshold",
        "fpe_ratio": "fpe_ratio",
    },
    "graph": {
        "jsd_threshold": "jsd_threshold",
    },
    "batch": {
        "terms": "batch_terms",
        "min_records": "min_records",
    },
}

_PATH_FIELDS = {"news_path", "market_path", "stopwords_path",
                "boilerplate_path", "market_words_path", "output_dir"}


def _coerce_date(value) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError as exc:
        raise ConfigError(f"bad date {value!r}: {exc}") from None


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    """Parse a YAML config file; relative paths resolve against the file.

    Unknown keys are fatal so typos cannot silently fall back to defaults.
    ``overrides`` maps PipelineConfig field names to replacement values.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")

    kwargs: dict = {}
    for key, value in raw.items():
        if key == "term":
            kwargs["term"] = str(value)
        elif key == "seed":
            kwargs["seed"] = int(value)
        elif key == "period":
            if not isinstance(value, dict) or set(value) - {"start", "end"}:
                raise ConfigError("period must contain exactly start and end")
            kwargs["period_start"] = _coerce_date(value.get("start"))
            kwargs["period_end"] = _coerce_date(value.get("end"))
        elif key in _SECTIONS:
            mapping = _SECTIONS[key]
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            for sub, sub_value in value.items():
                if sub not in mapping:
                    raise ConfigError(f"unknown key {key}.{sub}")
                kwargs[mapping[sub]] = sub_value
        else:
            raise ConfigError(f"unknown config key {key!r}")

    for name in ("term",):
        kwargs.setdefault(name, "")
    if "period_start" not in kwargs:
        raise ConfigError("period is required")
    if "output_dir" not in kwargs:
        raise ConfigError("paths.output_dir is required")
    if "batch_terms" in kwargs:
        terms = kwargs["batch_terms"]
        if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
            raise ConfigError("batch.terms must be a list of strings")
        kwargs["batch_terms"] = tuple(terms)

    if overrides:
        kwargs.update(overrides)

    base = path.parent
    for name in _PATH_FIELDS:
        if kwargs.get(name) is not None:
            p = Path(kwargs[name])
            kwargs[name] = p if p.is_absolute() else base / p

    try:
        cfg = PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
