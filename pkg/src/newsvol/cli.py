"""Command-line interface.

Subcommands compose the pipeline stage by stage (each one brings the run
up to that stage, resuming whatever the checkpoint already covers), plus
generators and cross-run tools. Exit codes: 0 success, 1 configuration
or validation error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .pipeline import StageError, load_stock_topics, run_batch, run_null_swap, run_pipeline
from .topic_graph import build_graph, export_graph
from . import synth as synth_mod

log = logging.getLogger(__name__)

_STAGE_COMMANDS = ("ingest", "topics", "prune", "normalize", "peaks", "fit", "evaluate")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", required=True, help="pipeline config YAML")
    p.add_argument("--term", help="override the query term")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--output-dir", help="override the output directory")
    p.add_argument("--fve-threshold", type=float, help="override the FVE selection cut")
    p.add_argument("--fpe-ratio", type=float, help="override the peak-explained ratio")
    p.add_argument("--folds", type=int, help="override the CV fold count")
    p.add_argument("--repeats", type=int, help="override the CV repeat count")


def _config_from(args) -> "PipelineConfig":
    overrides = {}
    for attr, key in (
        ("term", "term"),
        ("seed", "seed"),
        ("fve_threshold", "fve_threshold"),
        ("fpe_ratio", "fpe_ratio"),
        ("folds", "cv_folds"),
        ("repeats", "cv_repeats"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if args.output_dir is not None:
        overrides["output_dir"] = Path(args.output_dir)
    return load_config(args.config, overrides)


def _parse_count(text: str):
    if ":" in text:
        lo, hi = text.split(":", 1)
        return (int(lo), int(hi))
    return int(text)


def build_parser() -> _Parser:
    parser = _Parser(prog="newsvol", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_text in (
        ("ingest", "read news, select by term, tokenize, persist the corpus"),
        ("topics", "fit the topic model and the daily topic series"),
        ("prune", "drop boilerplate, rare and market topics"),
        ("normalize", "moving-median normalization of trading volume"),
        ("peaks", "windowed percentile peak detection"),
        ("fit", "cross-validated nonnegative LASSO fit"),
        ("evaluate", "fraction of volume/peaks explained"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        p.add_argument("--fresh", action="store_true", help="ignore the checkpoint")

    p = sub.add_parser("run", help="full pipeline (plus figures and graph exports)")
    _add_config_args(p)
    p.add_argument("--fresh", action="store_true", help="ignore the checkpoint")

    p = sub.add_parser("graph", help="topic-similarity network from one or more runs")
    p.add_argument("-c", "--config", help="run the graph stage of this config")
    p.add_argument("--term", help="override the query term")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--output-dir", help="override the output directory")
    p.add_argument("--fresh", action="store_true", help="ignore the checkpoint")
    p.add_argument("--runs", nargs="+", help="finished run directories to merge")
    p.add_argument("--out", help="output path prefix for the merged graph")
    p.add_argument("--threshold", type=float, default=0.5, help="JSD edge threshold")

    p = sub.add_parser("null-swap", help="cross news and volume between two configs")
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True)
    p.add_argument("--out", help="write the paired report JSON here")

    p = sub.add_parser("synth", help="generate a synthetic bundle with ground truth")
    p.add_argument("--out", required=True, help="bundle directory")
    p.add_argument("--topics", type=int, default=6)
    p.add_argument("--causal", type=int, default=3)
    p.add_argument("--words-per-topic", type=int, default=30)
    p.add_argument("--days", type=int, default=150)
    p.add_argument("--docs-per-day", default="15", help="integer or lo:hi range")
    p.add_argument("--tokens-per-doc", default="10", help="integer or lo:hi range")
    p.add_argument("--alpha", type=float, default=0.08)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--intercept", type=float, default=1.0)
    p.add_argument("--start", default="2020-01-01")
    p.add_argument("--term", default="acme")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=150, help="written into the bundle config")
    p.add_argument("--cv-repeats", type=int, default=5, help="written into the bundle config")

    return parser


def _cmd_stage(args, until: str) -> int:
    cfg = _config_from(args)
    out = run_pipeline(cfg, fresh=args.fresh, until=until)
    print(f"completed through {until}: {out}")
    return 0


def _cmd_run(args) -> int:
    cfg = _config_from(args)
    if cfg.batch_terms:
        summary = run_batch(cfg, fresh=args.fresh)
        included = [t for t, e in summary.items() if e["included"]]
        print(f"batch finished: {len(included)}/{len(summary)} terms included -> {cfg.output_dir}")
        return 0
    out = run_pipeline(cfg, fresh=args.fresh)
    print(f"run finished: {out}")
    return 0


def _cmd_graph(args) -> int:
    if args.runs:
        if not args.out:
            raise ConfigError("--out is required with --runs")
        stocks = [load_stock_topics(d) for d in args.runs]
        graph = build_graph(stocks, threshold=args.threshold)
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        base = prefix.with_suffix("") if prefix.suffix else prefix
        for fmt, suffix in (("gexf", ".gexf"), ("graphml", ".graphml"), ("edge-list", ".tsv")):
            export_graph(graph, base.with_suffix(suffix), fmt)
        print(f"merged graph over {len(stocks)} runs -> {base}.gexf/.graphml/.tsv")
        return 0
    if not args.config:
        raise ConfigError("provide --config for a single run or --runs to merge")
    return _cmd_stage(args, "graph")


def _cmd_null_swap(args) -> int:
    cfg_a = load_config(args.config_a)
    cfg_b = load_config(args.config_b)
    out = Path(args.out) if args.out else None
    report_ab, report_ba = run_null_swap(cfg_a, cfg_b, out)
    print(f"{cfg_a.term} news vs {cfg_b.term} volume: FPE {report_ab.fpe:.4f}")
    print(f"{cfg_b.term} news vs {cfg_a.term} volume: FPE {report_ba.fpe:.4f}")
    return 0


def _cmd_synth(args) -> int:
    gt = synth_mod.make_ground_truth(
        num_topics=args.topics,
        words_per_topic=args.words_per_topic,
        num_causal=args.causal,
        intercept=args.intercept,
        noise_sigma=args.noise_sigma,
        alpha=args.alpha,
        seed=args.seed,
    )
    synth = synth_mod.generate_corpus(
        gt,
        _parse_count(args.docs_per_day),
        args.days,
        tokens_per_doc=_parse_count(args.tokens_per_doc),
        start=date.fromisoformat(args.start),
        query_term=args.term,
    )
    volume = synth_mod.generate_volume(gt, synth.true_series)
    paths = synth_mod.write_bundle(args.out, gt, synth, volume, query_term=args.term)

    out = Path(args.out)
    end = synth.true_series.dates[-1]
    config_text = f"""# synthetic pipeline bundle
term: {args.term}
seed: {args.seed}
period:
  start: {synth.true_series.dates[0].isoformat()}
  end: {end.isoformat()}
paths:
  news: news.jsonl
  market: market.csv
  stopwords: stopwords.txt
  boilerplate_words: boilerplate_words.txt
  market_words: market_words.txt
  output_dir: run
lda:
  num_topics: {args.topics}
  alpha: 0.5
  burn_in_iterations: {args.burn_in}
pruning:
  min_active_days: {max(2, min(80, args.days // 5))}
market:
  median_window_days: {min(504, args.days)}
regression:
  cv_repeats: {args.cv_repeats}
  lambda_points: 40
"""
    (out / "config.yaml").write_text(config_text, encoding="utf-8")
    print(f"bundle written: {paths['news'].parent} (config.yaml ready for `newsvol run`)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        if args.command in _STAGE_COMMANDS:
            return _cmd_stage(args, args.command)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "graph":
            return _cmd_graph(args)
        if args.command == "null-swap":
            return _cmd_null_swap(args)
        if args.command == "synth":
            return _cmd_synth(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        log.error("%s", exc)
        return 1
    except StageError as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # config problems surface above; anything else is a stage failure
        log.exception("unexpected failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
