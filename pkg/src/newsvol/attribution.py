"""Nonnegative LASSO attribution of trading volume to news topics.

Fits normalized volume on per-topic daily news volumes with an L1 penalty
and nonnegativity constraints (cyclic coordinate descent with nonnegative
soft-threshold updates), chooses the penalty by repeated k-fold cross
validation, and scores the result with the fraction of volume explained
per topic (FVE) and the fraction of peak days explained (FPE).

Columns are standardized internally for coordinate-descent conditioning;
the penalty and the reported weights stay in raw news-volume units, so the
minimized objective is exactly

    (1/2T) * sum_t (y_t - b - sum_k w_k X[t,k])^2 + lambda * sum_k w_k,

with w_k >= 0 and the intercept b unpenalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date

import numpy as np
from numba import njit

from .corpus import Corpus
from .market import PeakSet, VolumeSeries, detect_peaks, moving_median_normalize
from .topic_series import PruneReport, TopicSeries, news_volume, prune
from . import lda as lda_mod

log = logging.getLogger(__name__)

_EXCLUDED = 1e300  # soft-threshold that no coordinate can clear
_DEFAULT_TOL = 1e-8
_DEFAULT_MAX_SWEEPS = 10_000


@dataclass
class RegressionFit:
    weights: np.ndarray  # nonnegative, raw news-volume units, one per column
    intercept: float
    lam: float
    residuals: np.ndarray  # y - intercept - X @ weights
    cv_trace: list[float] = field(default_factory=list)  # per-repeat chosen lambdas
    sweeps: int = 0


@dataclass
class TopicSelection:
    fve: np.ndarray  # fraction of volume explained per column, sums to 1
    selected: list[int]  # column indices with fve > threshold
    threshold: float
    degenerate: bool = False  # all weights zero or no peak-day contribution


@dataclass
class EvaluationReport:
    fpe: float
    explained_peaks: set[date]
    total_peaks: int
    null_mode: bool = False
    degenerate_peaks: int = 0  # peaks with nonpositive observed excess


@njit(cache=True)
def _cd_solve(gram, diag, cvec, thresh, beta, q, tol, max_sweeps):
    """One nonnegative soft-threshold coordinate-descent run on the Gram
    form. beta and q = gram @ beta are updated in place; returns sweeps."""
    num_cols = beta.shape[0]
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for k in range(num_cols):
            if diag[k] <= 0.0:
                continue
            rho = cvec[k] - q[k] + diag[k] * beta[k]
            b_new = (rho - thresh[k]) / diag[k]
            if b_new < 0.0:
                b_new = 0.0
            delta = b_new - beta[k]
            if delta != 0.0:
                beta[k] = b_new
                for j in range(num_cols):
                    q[j] += delta * gram[j, k]
            if abs(delta) > max_delta:
                max_delta = abs(delta)
        if max_delta < tol:
            return sweep + 1
    return max_sweeps


@njit(cache=True)
def _cd_path(gram, diag, cvec, thresh_grid, tol, max_sweeps, betas_out):
    """Warm-started solves along a descending penalty grid."""
    num_cols = cvec.shape[0]
    beta = np.zeros(num_cols)
    q = np.zeros(num_cols)
    for g in range(thresh_grid.shape[0]):
        _cd_solve(gram, diag, cvec, thresh_grid[g], beta, q, tol, max_sweeps)
        for k in range(num_cols):
            betas_out[g, k] = beta[k]


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    ok = std > 0
    Xs = np.zeros_like(X, dtype=np.float64)
    Xs[:, ok] = (X[:, ok] - mean[ok]) / std[ok]
    return Xs, mean, std, ok


def objective(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> float:
    """The penalized least-squares objective in raw units."""
    r = y - b - X @ w
    return float(0.5 * (r @ r) / len(y) + lam * w.sum())


def fit_nnlasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = _DEFAULT_TOL,
    max_sweeps: int = _DEFAULT_MAX_SWEEPS,
) -> RegressionFit:
    """Fit y on X with nonnegative weights, L1 penalty ``lam`` and an
    unpenalized intercept.

    Converges when the largest coordinate change in a sweep drops below
    ``tol`` (internal standardized units) or after ``max_sweeps`` sweeps.
    Zero-variance columns get weight 0 with a warning.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be T x K and y length T")
    T = X.shape[0]
    if T < 2:
        raise ValueError("need at least two observations")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in regression inputs")

    Xs, mean, std, ok = _standardize(X)
    if not np.all(ok):
        log.warning("%d zero-variance columns forced to weight 0", int((~ok).sum()))
    yc = y - y.mean()
    # at or above the kill point the zero vector is optimal; return it
    # analytically so the top of a lambda grid kills exactly instead of
    # leaving ulp-sized weights behind
    lam_kill = float(np.max(np.abs(X.T @ yc)) / T) if X.size else 0.0
    if lam > 0 and lam >= lam_kill * (1.0 - 1e-12):
        b = float(y.mean())
        return RegressionFit(weights=np.zeros(X.shape[1]), intercept=b,
                             lam=float(lam), residuals=y - b, sweeps=0)
    gram = (Xs.T @ Xs) / T
    diag = np.diag(gram).copy()
    cvec = (Xs.T @ yc) / T
    thresh = np.full(X.shape[1], _EXCLUDED)
    thresh[ok] = lam / std[ok]

    beta = np.zeros(X.shape[1])
    q = np.zeros(X.shape[1])
    sweeps = _cd_solve(gram, diag, cvec, thresh, beta, q, tol, max_sweeps)

    w = np.zeros(X.shape[1])
    w[ok] = beta[ok] / std[ok]
    b = float(y.mean() - w @ mean)
    residuals = y - b - X @ w
    return RegressionFit(weights=w, intercept=b, lam=float(lam), residuals=residuals, sweeps=sweeps)


def kkt_violation(X: np.ndarray, y: np.ndarray, fit: RegressionFit) -> np.ndarray:
    """Per-coordinate KKT residual of the nonnegative LASSO at the fit.

    For positive weights this is |g_k + lambda|; for zero weights the
    amount by which g_k + lambda dips below zero. g is the gradient of
    the smooth part in raw units.
    """
    T = X.shape[0]
    r = y - fit.intercept - X @ fit.weights
    g = -(X.T @ r) / T
    stat = g + fit.lam
    return np.where(fit.weights > 0, np.abs(stat), np.maximum(0.0, -stat))


def lambda_grid(X: np.ndarray, y: np.ndarray, num: int = 100, decades: float = 4.0) -> np.ndarray:
    """Descending log grid from lambda_max (kills every weight) down to
    lambda_max * 10**-decades."""
    T = X.shape[0]
    yc = y - y.mean()
    lam_max = float(np.max(np.abs(X.T @ yc)) / T) if X.size else 0.0
    if not np.isfinite(lam_max) or lam_max <= 0:
        return np.zeros(1)
    return np.geomspace(lam_max, lam_max * 10.0 ** (-decades), num)


def choose_lambda(
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 10,
    repeats: int = 100,
    seed: int = 0,
    grid: np.ndarray | None = None,
    full_output: bool = False,
):
    """Mean over repeats of the grid penalty minimizing k-fold CV error.

    Each repeat randomly partitions days into ``folds`` folds, fits the
    warm-started path on each training part and scores held-out squared
    error; the repeat's winner is the grid value with the lowest mean
    held-out MSE (ties go to the larger penalty). Deterministic given the
    seed.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    T = X.shape[0]
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if T < folds:
        raise ValueError(f"need at least {folds} observations for {folds}-fold CV")
    if grid is None:
        grid = lambda_grid(X, y)
    grid = np.asarray(grid, dtype=np.float64)

    rng = np.random.default_rng(seed)
    winners = np.empty(repeats)
    num_cols = X.shape[1]
    for rep in range(repeats):
        perm = rng.permutation(T)
        parts = np.array_split(perm, folds)
        fold_mse = np.zeros((folds, grid.size))
        for f, test_idx in enumerate(parts):
            train_mask = np.ones(T, dtype=bool)
            train_mask[test_idx] = False
            Xtr, ytr = X[train_mask], y[train_mask]
            Xte, yte = X[test_idx], y[test_idx]

            Xs, mean, std, ok = _standardize(Xtr)
            yc = ytr - ytr.mean()
            gram = (Xs.T @ Xs) / Xtr.shape[0]
            diag = np.diag(gram).copy()
            cvec = (Xs.T @ yc) / Xtr.shape[0]
            thresh_grid = np.full((grid.size, num_cols), _EXCLUDED)
            thresh_grid[:, ok] = grid[:, None] / std[ok][None, :]

            betas = np.empty((grid.size, num_cols))
            _cd_path(gram, diag, cvec, thresh_grid, _DEFAULT_TOL, _DEFAULT_MAX_SWEEPS, betas)

            W = np.zeros_like(betas)
            W[:, ok] = betas[:, ok] / std[ok][None, :]
            b = ytr.mean() - W @ mean
            pred = Xte @ W.T + b[None, :]
            fold_mse[f] = ((yte[:, None] - pred) ** 2).mean(axis=0)
        mean_mse = fold_mse.mean(axis=0)
        winners[rep] = grid[int(np.argmin(mean_mse))]
    chosen = float(winners.mean())
    log.info("chose lambda %.6g over %d repeats", chosen, repeats)
    if full_output:
        return chosen, winners
    return chosen


def compute_fve(
    fit: RegressionFit, X: np.ndarray, peak_mask: np.ndarray, threshold: float = 0.005
) -> TopicSelection:
    """Share of the fitted news-driven volume on peak days per column.

    contribution_k = sum over peak days of w_k * X[t,k]; fve is the
    normalized vector. Columns with fve above ``threshold`` are selected.
    All-zero weights (or zero total contribution) yield an all-zero,
    degenerate selection.
    """
    contributions = fit.weights * X[peak_mask].sum(axis=0)
    total = contributions.sum()
    if not np.any(fit.weights > 0) or total <= 0:
        log.warning("degenerate FVE: no positive peak-day contribution")
        return TopicSelection(np.zeros(X.shape[1]), [], threshold, degenerate=True)
    fve = contributions / total
    selected = [int(k) for k in np.nonzero(fve > threshold)[0]]
    return TopicSelection(fve, selected, threshold)


def compute_fpe(
    fit: RegressionFit,
    X: np.ndarray,
    y: np.ndarray,
    dates: list[date],
    peaks: PeakSet,
    ratio: float = 0.10,
) -> EvaluationReport:
    """Fraction of peak days whose news-explained excess reaches ``ratio``
    of the observed excess over the regression constant.

    A peak with nonpositive observed excess counts as explained iff the
    fitted excess is nonnegative (degenerate, logged).
    """
    if not peaks.peaks:
        raise ValueError("peak set is empty")
    fitted_excess = X @ fit.weights
    observed_excess = y - fit.intercept
    explained: set[date] = set()
    total = 0
    degenerate = 0
    for t, d in enumerate(dates):
        if d not in peaks.peaks:
            continue
        total += 1
        if observed_excess[t] > 0:
            if fitted_excess[t] >= ratio * observed_excess[t]:
                explained.add(d)
        else:
            degenerate += 1
            if fitted_excess[t] >= 0:
                explained.add(d)
    if degenerate:
        log.info("%d peak days had nonpositive observed excess", degenerate)
    if total == 0:
        raise ValueError("no peak day lies on the regression date axis")
    return EvaluationReport(
        fpe=len(explained) / total,
        explained_peaks=explained,
        total_peaks=total,
        degenerate_peaks=degenerate,
    )


def design_matrix(series: TopicSeries, kept_ids: list[int], dates: list[date]) -> np.ndarray:
    """Rows of per-topic daily news volume aligned to the given dates."""
    start = series.dates[0]
    num_days = len(series.dates)
    out = np.empty((len(dates), len(kept_ids)))
    for i, d in enumerate(dates):
        t = (d - start).days
        if t < 0 or t >= num_days:
            raise ValueError(f"date {d} outside topic-series axis")
        out[i] = series.matrix[kept_ids, t]
    return out


@dataclass
class AttributionResult:
    """Everything produced by steps 2-4 for one (corpus, volume) pair."""

    model: "lda_mod.TopicModel"
    series: TopicSeries
    prune_report: PruneReport
    kept_ids: list[int]
    volume: VolumeSeries
    peaks: PeakSet
    X: np.ndarray
    y: np.ndarray
    fit: RegressionFit
    selection: TopicSelection
    selected_topic_ids: list[int]
    report: EvaluationReport


def attribute(corpus: Corpus, market_dates: list[date], market_raw: np.ndarray, cfg) -> AttributionResult:
    """Steps 2-4 of the flowchart: topics, pruning, normalization, peaks,
    penalty choice, fit, FVE and FPE. ``cfg`` is a PipelineConfig."""
    period = (cfg.period_start, cfg.period_end)
    inside = [i for i, d in enumerate(market_dates) if period[0] <= d <= period[1]]
    if len(inside) != len(market_dates):
        log.info("dropping %d market rows outside the period", len(market_dates) - len(inside))
    if not inside:
        raise ValueError("no market data inside the study period")
    market_dates = [market_dates[i] for i in inside]
    market_raw = np.asarray(market_raw)[inside]

    model = lda_mod.fit(corpus, cfg.lda_config())
    series = news_volume(model, corpus, period)
    prune_report = prune(
        model, corpus.vocabulary, series,
        cfg.boilerplate_words, cfg.market_words,
        min_days=cfg.min_active_days, top_n=cfg.top_words,
    )
    kept = prune_report.kept_ids
    if not kept:
        raise ValueError("pruning eliminated every topic")

    volume = moving_median_normalize(
        market_dates, market_raw, cfg.median_window_days, cfg.median_centered
    )
    peaks = detect_peaks(volume, cfg.peak_window_months, cfg.peak_percentile)

    X = design_matrix(series, kept, volume.dates)
    y = volume.normalized
    grid = lambda_grid(X, y, num=cfg.lambda_points, decades=cfg.lambda_decades)
    lam, winners = choose_lambda(
        X, y, folds=cfg.cv_folds, repeats=cfg.cv_repeats,
        seed=cfg.regression_seed(), grid=grid, full_output=True,
    )
    fit = fit_nnlasso(X, y, lam)
    fit.cv_trace = [float(v) for v in winners]
    selection = compute_fve(fit, X, peaks.mask(volume.dates), cfg.fve_threshold)
    report = compute_fpe(fit, X, y, volume.dates, peaks, cfg.fpe_ratio)
    return AttributionResult(
        model=model,
        series=series,
        prune_report=prune_report,
        kept_ids=kept,
        volume=volume,
        peaks=peaks,
        X=X,
        y=y,
        fit=fit,
        selection=selection,
        selected_topic_ids=[kept[j] for j in selection.selected],
        report=report,
    )


def null_swap(corpus_b: Corpus, market_dates_a: list[date], market_raw_a: np.ndarray, cfg) -> AttributionResult:
    """Run steps 2-4 with one stock's news against another stock's volume.

    Both inputs must cover the configured study period: fatal if the news
    and market date spans do not overlap, since the swap is meaningless
    on disjoint coverage. The returned report is flagged as a null run.
    """
    doc_dates = corpus_b.dates()
    if not doc_dates:
        raise ValueError("empty corpus in null swap")
    if not market_dates_a:
        raise ValueError("empty market series in null swap")
    if doc_dates[-1] < market_dates_a[0] or doc_dates[0] > market_dates_a[-1]:
        raise ValueError("mismatched date coverage between news and market data")
    result = attribute(corpus_b, market_dates_a, market_raw_a, cfg)
    result.report.null_mode = True
    return result
