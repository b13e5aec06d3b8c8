"""End-to-end pipeline: staged, artifact-driven and resumable.

Each stage writes its outputs into the run directory and records itself
in a checkpoint, so an interrupted run continues from the last finished
stage. Every metric artifact is a pure function of (inputs, config,
seed): no timestamps, stable float formatting, sorted keys.
"""

from __future__ import annotations

import json
import logging
import re
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import lda as lda_mod
from .attribution import (
    RegressionFit,
    choose_lambda,
    compute_fpe,
    compute_fve,
    design_matrix,
    fit_nnlasso,
    lambda_grid,
    null_swap,
)
from .config import ConfigError, PipelineConfig
from .corpus import Corpus, ingest, load_corpus, save_corpus, select_by_term, tokenize
from .market import (
    detect_peaks,
    load_peaks,
    load_volume_csv,
    load_volume_series,
    moving_median_normalize,
    save_peaks,
    save_volume_series,
)
from .topic_graph import StockTopics, build_graph, export_graph
from .topic_series import load_prune_report, load_series, news_volume, prune, save_prune_report, save_series
from . import figures

log = logging.getLogger(__name__)

STAGES = ("ingest", "topics", "prune", "normalize", "peaks", "fit", "evaluate", "graph", "figures")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _json_dump(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _versions() -> dict[str, str]:
    import matplotlib
    import networkx
    import numba
    import scipy
    import yaml as _yaml

    return {
        "python": sys.version.split()[0],
        "newsvol": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "networkx": networkx.__version__,
        "matplotlib": matplotlib.__version__,
        "pyyaml": _yaml.__version__,
    }


@dataclass
class RunPaths:
    root: Path

    def __getattr__(self, name):  # pragma: no cover - trivial mapping
        mapping = {
            "corpus_vocab": "corpus_vocab.tsv",
            "corpus_docs": "corpus_docs.tsv",
            "ingest_summary": "ingest_summary.json",
            "phi": "phi.bin",
            "assignments": "assignments.tsv",
            "loglik": "loglik.csv",
            "topic_series": "topic_series.csv",
            "prune_report": "prune_report.csv",
            "volume": "volume_normalized.csv",
            "peaks": "peaks.json",
            "fit": "fit.csv",
            "fit_summary": "fit_summary.json",
            "evaluation": "evaluation.json",
            "graph_gexf": "graph.gexf",
            "graph_graphml": "graph.graphml",
            "graph_edges": "graph_edges.tsv",
            "manifest": "manifest.json",
            "checkpoint": "checkpoint.json",
        }
        if name not in mapping:
            raise AttributeError(name)
        return self.root / mapping[name]

    @property
    def figures_dir(self) -> Path:
        return self.root / "figures"


@dataclass
class PipelineState:
    """In-memory carry between stages, reloadable from artifacts."""

    cfg: PipelineConfig
    paths: RunPaths
    corpus: Corpus | None = None
    model: "lda_mod.TopicModel | None" = None
    series: object = None
    prune_report: object = None
    volume: object = None
    peaks: object = None
    kept_ids: list[int] | None = None
    fit: RegressionFit | None = None
    selection_fve: dict[int, float] | None = None
    selected_topic_ids: list[int] | None = None
    report: object = None

    def need_corpus(self) -> Corpus:
        if self.corpus is None:
            self.corpus = load_corpus(self.paths.corpus_vocab, self.paths.corpus_docs, self.cfg.term)
        return self.corpus

    def need_model(self):
        if self.model is None:
            corpus = self.need_corpus()
            phi = lda_mod.load_phi(self.paths.phi)
            doc_ids, zs = lda_mod.load_assignments(self.paths.assignments)
            if doc_ids != [d.doc_id for d in corpus.documents]:
                raise ValueError("assignments do not match the stored corpus")
            self.model = _rebuild_model(corpus, phi, zs, self.cfg)
        return self.model

    def need_series(self):
        if self.series is None:
            self.series = load_series(self.paths.topic_series)
        return self.series

    def need_prune(self):
        if self.prune_report is None:
            self.prune_report = load_prune_report(self.paths.prune_report)
        if self.kept_ids is None:
            self.kept_ids = self.prune_report.kept_ids
        return self.prune_report

    def need_volume(self):
        if self.volume is None:
            self.volume = load_volume_series(self.paths.volume)
        return self.volume

    def need_peaks(self):
        if self.peaks is None:
            self.peaks = load_peaks(self.paths.peaks)
        return self.peaks

    def need_fit(self) -> RegressionFit:
        if self.fit is None:
            self.need_prune()
            with open(self.paths.fit_summary, encoding="utf-8") as fh:
                summary = json.load(fh)
            weights = {}
            with open(self.paths.fit, encoding="utf-8") as fh:
                header = next(fh).rstrip("\n").split(",")
                tid_col, w_col = header.index("topic_id"), header.index("weight")
                for line in fh:
                    parts = line.rstrip("\n").split(",")
                    weights[int(parts[tid_col])] = float(parts[w_col])
            w = np.array([weights[k] for k in self.kept_ids])
            X = design_matrix(self.need_series(), self.kept_ids, self.need_volume().dates)
            y = self.need_volume().normalized
            b = float(summary["intercept"])
            self.fit = RegressionFit(
                weights=w, intercept=b, lam=float(summary["lambda"]),
                residuals=y - b - X @ w,
                cv_trace=[float(v) for v in summary["cv_lambda_winners"]],
                sweeps=int(summary["sweeps"]),
            )
        return self.fit

    def need_selection(self):
        if self.selection_fve is None or self.selected_topic_ids is None:
            with open(self.paths.evaluation, encoding="utf-8") as fh:
                payload = json.load(fh)
            self.selected_topic_ids = [int(e["topic_id"]) for e in payload["selected"]]
            self.selection_fve = {int(e["topic_id"]): float(e["fve"]) for e in payload["selected"]}
        return self.selected_topic_ids, self.selection_fve


def _rebuild_model(corpus: Corpus, phi: np.ndarray, zs: list[np.ndarray], cfg: PipelineConfig):
    num_topics = phi.shape[0]
    vocab_size = phi.shape[1]
    n_dk = np.zeros((len(corpus.documents), num_topics), dtype=np.int32)
    n_kw = np.zeros((num_topics, vocab_size), dtype=np.int32)
    for d, (doc, z) in enumerate(zip(corpus.documents, zs)):
        if len(z) != len(doc.tokens):
            raise ValueError(f"assignment length mismatch for {doc.doc_id}")
        np.add.at(n_dk[d], z, 1)
        np.add.at(n_kw, (z, doc.tokens), 1)
    lda_cfg = cfg.lda_config()
    return lda_mod.TopicModel(
        phi=phi,
        assignments=zs,
        n_dk=n_dk,
        n_kw=n_kw,
        n_k=n_kw.sum(axis=1).astype(np.int64),
        doc_ids=[d.doc_id for d in corpus.documents],
        alpha=lda_cfg.resolved_alpha,
        beta=lda_cfg.beta,
        loglik=[],
    )


def _load_checkpoint(paths: RunPaths, cfg_hash: str) -> set[str]:
    path = paths.checkpoint
    if not path.is_file():
        return set()
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return set()
    if payload.get("config_hash") != cfg_hash:
        log.info("checkpoint was made with a different config; starting fresh")
        return set()
    return set(payload.get("completed", []))


def _save_checkpoint(paths: RunPaths, cfg_hash: str, completed: set[str]) -> None:
    ordered = [s for s in STAGES if s in completed]
    _json_dump({"config_hash": cfg_hash, "completed": ordered}, paths.checkpoint)


def _stage_ingest(state: PipelineState) -> None:
    cfg = state.cfg
    records, skipped = ingest(cfg.news_path)
    matching = select_by_term(records, cfg.term)
    if not matching:
        raise ValueError(f"no news records mention {cfg.term!r}")
    in_period = [r for r in matching if cfg.period_start <= r.date <= cfg.period_end]
    if not in_period:
        raise ValueError("no matching records inside the study period")
    corpus = tokenize(in_period, set(cfg.stopwords), cfg.term)
    save_corpus(corpus, state.paths.corpus_vocab, state.paths.corpus_docs)
    _json_dump(
        {
            "records_total": len(records),
            "records_skipped": skipped,
            "records_matching": len(matching),
            "records_in_period": len(in_period),
            "documents": len(corpus.documents),
            "vocabulary": len(corpus.vocabulary),
            "tokens": corpus.num_tokens,
        },
        state.paths.ingest_summary,
    )
    state.corpus = corpus
    log.info("ingest: %d/%d records match %r, %d documents", len(matching), len(records), cfg.term, len(corpus.documents))


def _stage_topics(state: PipelineState) -> None:
    cfg = state.cfg
    corpus = state.need_corpus()
    model = lda_mod.fit(corpus, cfg.lda_config())
    lda_mod.save_model(model, state.paths.phi, state.paths.assignments)
    with open(state.paths.loglik, "w", encoding="utf-8") as fh:
        fh.write("sweep,log_likelihood\n")
        for i, ll in enumerate(model.loglik):
            fh.write(f"{i + 1},{repr(ll)}\n")
    series = news_volume(model, corpus, (cfg.period_start, cfg.period_end))
    save_series(series, state.paths.topic_series)
    state.model = model
    state.series = series


def _stage_prune(state: PipelineState) -> None:
    cfg = state.cfg
    report = prune(
        state.need_model(), state.need_corpus().vocabulary, state.need_series(),
        set(cfg.boilerplate_words), set(cfg.market_words),
        min_days=cfg.min_active_days, top_n=cfg.top_words,
    )
    save_prune_report(report, state.paths.prune_report)
    state.prune_report = report
    state.kept_ids = report.kept_ids
    if not state.kept_ids:
        raise ValueError("pruning eliminated every topic")


def _stage_normalize(state: PipelineState) -> None:
    cfg = state.cfg
    dates, raw = load_volume_csv(cfg.market_path)
    inside = [i for i, d in enumerate(dates) if cfg.period_start <= d <= cfg.period_end]
    if not inside:
        raise ValueError("no market data inside the study period")
    if len(inside) != len(dates):
        log.info("dropping %d market rows outside the period", len(dates) - len(inside))
    volume = moving_median_normalize(
        [dates[i] for i in inside], raw[inside],
        cfg.median_window_days, cfg.median_centered,
    )
    save_volume_series(volume, state.paths.volume)
    state.volume = volume


def _stage_peaks(state: PipelineState) -> None:
    cfg = state.cfg
    volume = state.need_volume()
    peaks = detect_peaks(volume, cfg.peak_window_months, cfg.peak_percentile)
    save_peaks(peaks, state.paths.peaks)
    save_volume_series(volume, state.paths.volume, peaks)
    state.peaks = peaks


def _stage_fit(state: PipelineState) -> None:
    cfg = state.cfg
    state.need_prune()
    volume = state.need_volume()
    X = design_matrix(state.need_series(), state.kept_ids, volume.dates)
    y = volume.normalized
    grid = lambda_grid(X, y, num=cfg.lambda_points, decades=cfg.lambda_decades)
    lam, winners = choose_lambda(
        X, y, folds=cfg.cv_folds, repeats=cfg.cv_repeats,
        seed=cfg.regression_seed(), grid=grid, full_output=True,
    )
    fit = fit_nnlasso(X, y, lam)
    fit.cv_trace = [float(v) for v in winners]
    with open(state.paths.fit, "w", encoding="utf-8") as fh:
        fh.write("topic_id,weight\n")
        for k, w in zip(state.kept_ids, fit.weights):
            fh.write(f"{k},{repr(float(w))}\n")
    _json_dump(
        {
            "lambda": fit.lam,
            "intercept": fit.intercept,
            "sweeps": fit.sweeps,
            "num_columns": len(state.kept_ids),
            "cv_lambda_winners": fit.cv_trace,
        },
        state.paths.fit_summary,
    )
    state.fit = fit


def _stage_evaluate(state: PipelineState) -> None:
    cfg = state.cfg
    state.need_prune()
    volume = state.need_volume()
    peaks = state.need_peaks()
    fit = state.need_fit()
    model = state.need_model()
    vocab = state.need_corpus().vocabulary
    X = design_matrix(state.need_series(), state.kept_ids, volume.dates)
    selection = compute_fve(fit, X, peaks.mask(volume.dates), cfg.fve_threshold)
    report = compute_fpe(fit, X, volume.normalized, volume.dates, peaks, cfg.fpe_ratio)
    selected_ids = [state.kept_ids[j] for j in selection.selected]
    entries = []
    for j, k in zip(selection.selected, selected_ids):
        words = [vocab.tokens[w] for w in model.top_words(k, cfg.top_words)]
        entries.append({"topic_id": k, "fve": float(selection.fve[j]), "top_words": words})
    entries.sort(key=lambda e: (-e["fve"], e["topic_id"]))
    # the fit table gains its fve/selected columns once they are known
    fve_by_topic = {k: float(selection.fve[j]) for j, k in enumerate(state.kept_ids)}
    with open(state.paths.fit, "w", encoding="utf-8") as fh:
        fh.write("topic_id,weight,fve,selected\n")
        for k, w in zip(state.kept_ids, fit.weights):
            flag = int(k in selected_ids)
            fh.write(f"{k},{repr(float(w))},{repr(fve_by_topic[k])},{flag}\n")
    _json_dump(
        {
            "fpe": report.fpe,
            "total_peaks": report.total_peaks,
            "explained_peaks": sorted(d.isoformat() for d in report.explained_peaks),
            "degenerate_peaks": report.degenerate_peaks,
            "null_mode": report.null_mode,
            "fve_threshold": cfg.fve_threshold,
            "fve_degenerate": selection.degenerate,
            "lambda": fit.lam,
            "intercept": fit.intercept,
            "selected": entries,
        },
        state.paths.evaluation,
    )
    state.selection_fve = {k: float(selection.fve[j]) for j, k in zip(selection.selected, selected_ids)}
    state.selected_topic_ids = selected_ids
    state.report = report


def _stage_graph(state: PipelineState) -> None:
    cfg = state.cfg
    selected_ids, fves = state.need_selection()
    model = state.need_model()
    stock = StockTopics(
        stock=cfg.term,
        vocabulary=state.need_corpus().vocabulary,
        phi=model.phi,
        selected=tuple((k, fves[k]) for k in selected_ids),
    )
    graph = build_graph([stock], threshold=cfg.jsd_threshold)
    export_graph(graph, state.paths.graph_gexf, "gexf")
    export_graph(graph, state.paths.graph_graphml, "graphml")
    export_graph(graph, state.paths.graph_edges, "edge-list")


def _stage_figures(state: PipelineState) -> None:
    cfg = state.cfg
    out = state.paths.figures_dir
    out.mkdir(parents=True, exist_ok=True)
    volume = state.need_volume()
    peaks = state.need_peaks()
    fit = state.need_fit()
    series = state.need_series()
    state.need_prune()
    selected_ids, _ = state.need_selection()
    model = state.need_model()
    vocab = state.need_corpus().vocabulary

    figures.volume_overview(
        volume, out / "volume_overview.csv", out / "volume_overview.png", title=cfg.term
    )
    figures.peaks_timeline(
        volume, peaks, out / "peaks_timeline.csv", out / "peaks_timeline.png", title=cfg.term
    )
    X = design_matrix(series, state.kept_ids, volume.dates)
    fitted = fit.intercept + X @ fit.weights
    figures.fit_vs_actual(
        volume.dates, volume.normalized, fitted,
        out / "fit_vs_actual.csv", out / "fit_vs_actual.png", title=cfg.term,
    )
    labels = {
        k: ", ".join(vocab.tokens[w] for w in model.top_words(k, 3)) for k in selected_ids
    }
    figures.topic_series_panel(
        series, selected_ids,
        out / "topic_series_selected.csv", out / "topic_series_selected.png",
        labels=labels,
    )


_STAGE_FNS = {
    "ingest": _stage_ingest,
    "topics": _stage_topics,
    "prune": _stage_prune,
    "normalize": _stage_normalize,
    "peaks": _stage_peaks,
    "fit": _stage_fit,
    "evaluate": _stage_evaluate,
    "graph": _stage_graph,
    "figures": _stage_figures,
}


def run_pipeline(cfg: PipelineConfig, fresh: bool = False, until: str | None = None) -> Path:
    """Run every stage (or up to ``until``), resuming from the checkpoint
    when the config hash matches. Returns the run directory."""
    cfg.validate()
    cfg = cfg.load_word_lists()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = RunPaths(out)
    cfg_hash = cfg.config_hash()
    _json_dump(
        {"config": cfg.to_dict(), "config_hash": cfg_hash, "seed": cfg.seed, "versions": _versions()},
        paths.manifest,
    )
    completed = set() if fresh else _load_checkpoint(paths, cfg_hash)
    if completed:
        log.info("resuming after stages: %s", ", ".join(s for s in STAGES if s in completed))

    state = PipelineState(cfg, paths)
    for stage in STAGES:
        if stage in completed:
            continue
        log.info("stage %s", stage)
        try:
            _STAGE_FNS[stage](state)
        except Exception as exc:
            _save_checkpoint(paths, cfg_hash, completed)
            raise StageError(stage, exc) from exc
        completed.add(stage)
        _save_checkpoint(paths, cfg_hash, completed)
        if until is not None and stage == until:
            break
    return out


def _ingest_for(cfg: PipelineConfig) -> Corpus:
    records, _ = ingest(cfg.news_path)
    matching = select_by_term(records, cfg.term)
    in_period = [r for r in matching if cfg.period_start <= r.date <= cfg.period_end]
    if not in_period:
        raise ValueError(f"no records for {cfg.term!r} inside the study period")
    return tokenize(in_period, set(cfg.stopwords), cfg.term)


def run_null_swap(cfg_a: PipelineConfig, cfg_b: PipelineConfig, out_path: Path | None = None) -> tuple:
    """Cross the two stocks' news and volume both ways and report FPE.

    Requires the two configs to share the study period. Writes a JSON
    report when ``out_path`` is given.
    """
    cfg_a.validate()
    cfg_b.validate()
    if (cfg_a.period_start, cfg_a.period_end) != (cfg_b.period_start, cfg_b.period_end):
        raise ConfigError("null swap requires identical study periods")
    cfg_a = cfg_a.load_word_lists()
    cfg_b = cfg_b.load_word_lists()

    corpus_a = _ingest_for(cfg_a)
    corpus_b = _ingest_for(cfg_b)
    dates_a, raw_a = load_volume_csv(cfg_a.market_path)
    dates_b, raw_b = load_volume_csv(cfg_b.market_path)

    log.info("null swap: %s news vs %s volume", cfg_a.term, cfg_b.term)
    res_ab = null_swap(corpus_a, dates_b, raw_b, replace(cfg_b, term=cfg_a.term))
    log.info("null swap: %s news vs %s volume", cfg_b.term, cfg_a.term)
    res_ba = null_swap(corpus_b, dates_a, raw_a, replace(cfg_a, term=cfg_b.term))

    if out_path is not None:
        def entry(res, news, volume):
            return {
                "news_term": news,
                "volume_term": volume,
                "fpe": res.report.fpe,
                "total_peaks": res.report.total_peaks,
                "explained_peaks": sorted(d.isoformat() for d in res.report.explained_peaks),
                "null_mode": res.report.null_mode,
                "lambda": res.fit.lam,
            }
        _json_dump(
            {
                "a_news_b_volume": entry(res_ab, cfg_a.term, cfg_b.term),
                "b_news_a_volume": entry(res_ba, cfg_b.term, cfg_a.term),
            },
            Path(out_path),
        )
    return res_ab.report, res_ba.report


def _slug(term: str) -> str:
    return re.sub(r"[^a-z0-9_-]+", "_", term.lower()).strip("_") or "term"


def run_batch(cfg: PipelineConfig, fresh: bool = False) -> dict:
    """Run the pipeline for every batch term with more news records than
    the inclusion floor; others are skipped. Returns the batch summary."""
    if not cfg.batch_terms:
        raise ConfigError("batch.terms is empty")
    cfg.validate()
    records, _ = ingest(cfg.news_path)
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    summary: dict = {}
    for term in cfg.batch_terms:
        count = len(select_by_term(records, term))
        if count <= cfg.min_records:
            log.info("skipping %r: %d records (needs more than %d)", term, count, cfg.min_records)
            summary[term] = {"included": False, "records": count}
            continue
        sub = replace(cfg, term=term, batch_terms=(), output_dir=root / _slug(term))
        run_pipeline(sub, fresh=fresh)
        with open(RunPaths(Path(sub.output_dir)).evaluation, encoding="utf-8") as fh:
            evaluation = json.load(fh)
        summary[term] = {
            "included": True,
            "records": count,
            "fpe": evaluation["fpe"],
            "selected_topics": [e["topic_id"] for e in evaluation["selected"]],
        }
    _json_dump(summary, root / "batch_summary.json")
    return summary


def load_stock_topics(run_dir: str | Path) -> StockTopics:
    """Read one finished run's selection back as graph-builder input."""
    paths = RunPaths(Path(run_dir))
    with open(paths.manifest, encoding="utf-8") as fh:
        term = json.load(fh)["config"]["term"]
    corpus = load_corpus(paths.corpus_vocab, paths.corpus_docs, term)
    phi = lda_mod.load_phi(paths.phi)
    with open(paths.evaluation, encoding="utf-8") as fh:
        payload = json.load(fh)
    selected = tuple((int(e["topic_id"]), float(e["fve"])) for e in payload["selected"])
    return StockTopics(stock=term, vocabulary=corpus.vocabulary, phi=phi, selected=selected)
