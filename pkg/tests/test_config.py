from datetime import date
from pathlib import Path

import pytest

from newsvol.config import ConfigError, PipelineConfig, load_config


def _write_inputs(tmp_path):
    (tmp_path / "news.jsonl").write_text("", encoding="utf-8")
    (tmp_path / "market.csv").write_text("date,volume\n", encoding="utf-8")
    (tmp_path / "stop.txt").write_text("the\nof\n", encoding="utf-8")


MINIMAL = """\
term: acme
period:
  start: 2020-01-01
  end: 2020-12-31
paths:
  news: news.jsonl
  market: market.csv
  output_dir: out
"""


def _load(tmp_path, text=MINIMAL, overrides=None):
    _write_inputs(tmp_path)
    cfg_path = tmp_path / "config.yaml"
    cfg_path.write_text(text, encoding="utf-8")
    return load_config(cfg_path, overrides)


def test_defaults_match_documented_constants(tmp_path):
    cfg = _load(tmp_path)
    assert cfg.num_topics == 100
    assert cfg.beta == 0.01
    assert cfg.alpha is None  # resolves to 50/K
    assert cfg.burn_in_iterations == 1000
    assert cfg.min_active_days == 80
    assert cfg.top_words == 6
    assert cfg.median_window_days == 504
    assert cfg.median_centered is True
    assert cfg.peak_window_months == 6
    assert cfg.peak_percentile == 95.0
    assert cfg.cv_folds == 10
    assert cfg.cv_repeats == 100
    assert cfg.lambda_points == 100
    assert cfg.fve_threshold == 0.005
    assert cfg.fpe_ratio == 0.10
    assert cfg.jsd_threshold == 0.5
    assert cfg.min_records == 5000
    assert cfg.seed == 0


def test_relative_paths_resolve_against_config_file(tmp_path):
    cfg = _load(tmp_path)
    assert cfg.news_path == tmp_path / "news.jsonl"
    assert cfg.market_path == tmp_path / "market.csv"
    assert cfg.output_dir == tmp_path / "out"


def test_unknown_keys_are_fatal(tmp_path):
    with pytest.raises(ConfigError):
        _load(tmp_path, MINIMAL + "typo_key: 1\n")
    with pytest.raises(ConfigError):
        _load(tmp_path, MINIMAL + "lda:\n  zz: 1\n")


def test_period_required(tmp_path):
    text = "term: a\npaths:\n  news: news.jsonl\n  market: market.csv\n  output_dir: out\n"
    with pytest.raises(ConfigError):
        _load(tmp_path, text)


def test_output_dir_required(tmp_path):
    text = "term: a\nperiod:\n  start: 2020-01-01\n  end: 2020-02-01\n"
    with pytest.raises(ConfigError):
        _load(tmp_path, text)


def test_overrides_take_precedence(tmp_path):
    cfg = _load(tmp_path, overrides={"term": "other", "seed": 9, "cv_folds": 3})
    assert cfg.term == "other"
    assert cfg.seed == 9
    assert cfg.cv_folds == 3


def test_sectioned_values_land_on_fields(tmp_path):
    text = MINIMAL + (
        "lda:\n  num_topics: 12\n  alpha: 0.4\n"
        "market:\n  peak_percentile: 90\n"
        "regression:\n  cv_repeats: 7\n"
        "graph:\n  jsd_threshold: 0.4\n"
    )
    cfg = _load(tmp_path, text)
    assert cfg.num_topics == 12
    assert cfg.alpha == 0.4
    assert cfg.peak_percentile == 90
    assert cfg.cv_repeats == 7
    assert cfg.jsd_threshold == 0.4
    lda_cfg = cfg.lda_config()
    assert lda_cfg.num_topics == 12
    assert lda_cfg.alpha == 0.4


def _valid_cfg(tmp_path):
    _write_inputs(tmp_path)
    return PipelineConfig(
        output_dir=tmp_path / "out",
        term="acme",
        period_start=date(2020, 1, 1),
        period_end=date(2020, 6, 30),
        news_path=tmp_path / "news.jsonl",
        market_path=tmp_path / "market.csv",
        stopwords_path=tmp_path / "stop.txt",
    )


def test_validate_passes_on_good_config(tmp_path):
    _valid_cfg(tmp_path).validate()


def test_validate_missing_market_file(tmp_path):
    cfg = _valid_cfg(tmp_path)
    (tmp_path / "market.csv").unlink()
    with pytest.raises(ConfigError):
        cfg.validate()


def test_validate_period_order(tmp_path):
    from dataclasses import replace

    cfg = replace(_valid_cfg(tmp_path), period_start=date(2021, 1, 1))
    with pytest.raises(ConfigError):
        cfg.validate()


@pytest.mark.parametrize(
    "field,value",
    [
        ("peak_percentile", 100.0),
        ("peak_percentile", 0.0),
        ("fve_threshold", 0.0),
        ("fpe_ratio", 1.0),
        ("jsd_threshold", 0.0),
        ("num_topics", 0),
        ("cv_folds", 0),
        ("beta", 0.0),
    ],
)
def test_validate_rejects_bad_values(tmp_path, field, value):
    from dataclasses import replace

    cfg = replace(_valid_cfg(tmp_path), **{field: value})
    with pytest.raises(ConfigError):
        cfg.validate()


def test_config_hash_stable_and_seed_sensitive(tmp_path):
    cfg = _valid_cfg(tmp_path)
    from dataclasses import replace

    assert cfg.config_hash() == cfg.config_hash()
    assert cfg.config_hash() != replace(cfg, seed=1).config_hash()
    assert cfg.config_hash() != replace(cfg, num_topics=7).config_hash()


def test_stage_seeds_are_deterministic_and_distinct(tmp_path):
    cfg = _valid_cfg(tmp_path)
    assert cfg.stage_seed(1) == cfg.stage_seed(1)
    assert cfg.stage_seed(1) != cfg.stage_seed(2)
    assert cfg.lda_config().seed == cfg.stage_seed(1)
    assert cfg.regression_seed() == cfg.stage_seed(2)
    from dataclasses import replace

    assert replace(cfg, seed=5).stage_seed(1) != cfg.stage_seed(1)


def test_load_word_lists_returns_copy(tmp_path):
    cfg = _valid_cfg(tmp_path)
    loaded = cfg.load_word_lists()
    assert loaded.stopwords == {"the", "of"}
    assert cfg.stopwords == frozenset()
    assert loaded.boilerplate_words == frozenset()


def test_batch_terms_must_be_string_list(tmp_path):
    with pytest.raises(ConfigError):
        _load(tmp_path, MINIMAL + "batch:\n  terms: notalist\n")
    cfg = _load(tmp_path, MINIMAL + "batch:\n  terms: [a, b]\n  min_records: 10\n")
    assert cfg.batch_terms == ("a", "b")
    assert cfg.min_records == 10
