"""Fixed-width rolling-window backtests with 1..H month-ahead predictions.

A model maps a month's event counts to that month's index value.  Each
window trains on ``window`` consecutive months and is then applied to the
feature rows of the next ``horizons`` months; after that the window drops
its oldest month and takes in the next one.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from . import metrics
from .errors import ConfigError, ContractError, DataValidationError
from .ingest import FeatureMatrix, MonthlyGpiSeries
from .models import Dataset, fit, predict
from .months import Month
from .tuning import Grid, grid_search

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RollingConfig:
    learner: str = "gbt"
    grid: Optional[Grid] = None
    window: int = 72
    horizons: int = 6
    folds: int = 10
    seed: int = 0
    tune_once: bool = False
    start_offset: int = 0

    def __post_init__(self):
        if self.window < 12:
            raise ConfigError(f"window must be >= 12 months, got {self.window}")
        if not 1 <= self.horizons <= 12:
            raise ConfigError(f"horizons must be in 1..12, got {self.horizons}")
        if self.start_offset < 0:
            raise ConfigError("start_offset must be >= 0")
        if self.grid is not None and self.grid.learner != self.learner:
            raise ConfigError(f"grid is for {self.grid.learner}, config learner is {self.learner}")

    def resolved_grid(self) -> Grid:
        return self.grid if self.grid is not None else Grid.default(self.learner)


@dataclass(frozen=True)
class HorizonPrediction:
    country: str
    window_start: Month
    target_month: Month
    horizon: int
    predicted: float
    actual: Optional[float]


@dataclass(frozen=True)
class WindowFit:
    """What one training window produced; kept for explanations and audits."""

    start: int                      # row index into the (offset) feature matrix
    train_months: tuple[Month, ...]
    codes: tuple[str, ...]
    assignment: dict
    model: object
    train: Dataset


@dataclass
class BacktestResult:
    predictions: list[HorizonPrediction]
    windows: list[WindowFit] = field(default_factory=list)


def window_codes(features: FeatureMatrix, start: int, stop: int) -> tuple[str, ...]:
    """Codes with at least one event inside rows [start, stop)."""
    block = features.values[start:stop]
    seen = block.sum(axis=0) > 0
    codes = tuple(c for c, s in zip(features.codes, seen) if s)
    if not codes:
        # an eventless window still needs a design; fall back to all columns
        codes = features.codes
    if not codes:
        raise ContractError("feature matrix has no columns")
    return codes


def _truth_vector(features: FeatureMatrix, truth: MonthlyGpiSeries) -> list[Optional[float]]:
    return [truth.value_at(m) for m in features.months]


def plan_windows(n_rows: int, n_truth: int, window: int) -> list[int]:
    """Window start rows.

    A window needs ground truth on all its rows and at least one
    following feature row to predict.
    """
    last = min(n_rows - 1, n_truth) - window
    return list(range(0, last + 1)) if last >= 0 else []


def fit_window(features: FeatureMatrix, y: np.ndarray, start: int, cfg: RollingConfig,
               assignment: Optional[dict] = None) -> WindowFit:
    stop = start + cfg.window
    codes = window_codes(features, start, stop)
    X = features.rows(start, stop).select(codes).astype(np.float64)
    train = Dataset(X, y[start:stop], codes)
    if assignment is None:
        grid = cfg.resolved_grid()
        if len(grid) == 1:
            assignment = dict(grid.assignments[0])
        else:
            assignment, _ = grid_search(train, grid, cfg.folds, cfg.seed)
    model = fit(cfg.learner, train, assignment, cfg.seed)
    return WindowFit(start, features.months[start:stop], codes, assignment, model, train)


@dataclass(frozen=True)
class _Aligned:
    features: FeatureMatrix
    actual: list[Optional[float]]
    y: np.ndarray

    @property
    def n_truth(self) -> int:
        return len(self.y)

    @property
    def T(self) -> int:
        return len(self.features.months)


def _align(features: FeatureMatrix, truth: MonthlyGpiSeries, cfg: RollingConfig) -> _Aligned:
    if cfg.start_offset >= len(features.months):
        raise ContractError("start_offset leaves no feature rows")
    features = features.rows(cfg.start_offset, len(features.months))
    actual = _truth_vector(features, truth)
    if actual[0] is None:
        raise ContractError(
            f"ground truth for {truth.country} ({truth.start_month}..{truth.end_month}) "
            f"does not cover the first feature month {features.months[0]}"
        )
    n_truth = next((i for i, v in enumerate(actual) if v is None), len(actual))
    T = len(features.months)
    if min(T - 1, n_truth) < cfg.window:
        raise ContractError(
            f"{truth.country}: need at least {cfg.window + 1} aligned months, "
            f"have {T} feature months and {n_truth} with ground truth"
        )
    return _Aligned(features, actual, np.array(actual[:n_truth], dtype=np.float64))


def rolling_backtest(features: FeatureMatrix, truth: MonthlyGpiSeries, cfg: RollingConfig,
                     keep_windows: bool = False) -> BacktestResult:
    """Run every window and collect k-month-ahead predictions.

    With T feature months (all with ground truth) and window W this yields
    T - W - k + 1 predictions at horizon k.  Months past the end of the
    ground truth are predicted with ``actual=None``.
    """
    al = _align(features, truth, cfg)
    features, actual, y, T = al.features, al.actual, al.y, al.T

    preds: list[HorizonPrediction] = []
    windows: list[WindowFit] = []
    fixed = None
    for s in plan_windows(T, al.n_truth, cfg.window):
        wf = fit_window(features, y, s, cfg, fixed)
        if cfg.tune_once and fixed is None:
            fixed = wf.assignment
        end = s + cfg.window
        targets = range(end, min(end + cfg.horizons, T))
        X_future = features.rows(end, targets.stop).select(wf.codes).astype(np.float64)
        yhat = predict(wf.model, X_future, wf.codes)
        for k, (row, value) in enumerate(zip(targets, yhat), start=1):
            preds.append(HorizonPrediction(
                truth.country, features.months[s], features.months[row], k,
                float(value), actual[row],
            ))
        if keep_windows:
            windows.append(wf)
    return BacktestResult(preds, windows)


def refit_for_target(features: FeatureMatrix, truth: MonthlyGpiSeries, cfg: RollingConfig,
                     target: Month, horizon: int) -> tuple[WindowFit, np.ndarray, Optional[float]]:
    """Rebuild the window whose ``horizon``-ahead prediction lands on ``target``.

    Returns the window fit, the target's feature row restricted to the
    window's codes, and the actual value if known.
    """
    al = _align(features, truth, cfg)
    starts = plan_windows(al.T, al.n_truth, cfg.window)
    first = al.features.months[0]
    row = target - first
    s = row - cfg.window - (horizon - 1)
    if not 1 <= horizon <= cfg.horizons or not 0 <= row < al.T or s not in starts:
        lo = first + (cfg.window + horizon - 1)
        hi = first + min(starts[-1] + cfg.window + horizon - 1, al.T - 1)
        raise DataValidationError(
            f"{truth.country}: no {horizon}-month-ahead prediction for {target}; "
            f"valid {horizon}-month-ahead targets are {lo}..{hi} (horizons 1..{cfg.horizons})"
        )
    fixed = None
    if cfg.tune_once and s != 0:
        fixed = fit_window(al.features, al.y, 0, cfg).assignment
    wf = fit_window(al.features, al.y, s, cfg, fixed)
    x = al.features.rows(row, row + 1).select(wf.codes).astype(np.float64)[0]
    return wf, x, al.actual[row]


@dataclass(frozen=True)
class HorizonReport:
    metrics: dict[int, metrics.MetricsReport]
    missing_actuals: dict[int, int]
    skipped: dict[int, str]
    counts: dict[int, int]


def evaluate_horizons(preds: Iterable[HorizonPrediction]) -> HorizonReport:
    """Per-horizon Pearson / RMSE / MAPE over predictions that have actuals."""
    pairs: dict[int, list[tuple[float, float]]] = {}
    missing: dict[int, int] = {}
    counts: dict[int, int] = {}
    for p in preds:
        counts[p.horizon] = counts.get(p.horizon, 0) + 1
        if p.actual is None:
            missing[p.horizon] = missing.get(p.horizon, 0) + 1
            continue
        pairs.setdefault(p.horizon, []).append((p.actual, p.predicted))
    out: dict[int, metrics.MetricsReport] = {}
    skipped: dict[int, str] = {}
    for k in sorted(counts):
        got = pairs.get(k, [])
        if len(got) < 2:
            skipped[k] = f"horizon {k}: {len(got)} prediction(s) with actuals, need 2"
            logger.warning(skipped[k])
            continue
        ys, xs = zip(*got)
        rep = metrics.report(ys, xs)
        if rep.pearson is None:
            logger.warning("horizon %d: Pearson undefined (constant series)", k)
        out[k] = rep
    return HorizonReport(out, missing, skipped, counts)


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


PREDICTION_HEADER = ("country", "window_start", "target_month", "horizon", "predicted", "actual")


def write_predictions(preds: Sequence[HorizonPrediction], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PREDICTION_HEADER)
    for p in sorted(preds, key=lambda p: (p.country, p.window_start, p.horizon)):
        writer.writerow((p.country, str(p.window_start), str(p.target_month), p.horizon,
                         _fmt(p.predicted), _fmt(p.actual)))


def read_predictions(stream: TextIO) -> list[HorizonPrediction]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or tuple(reader.fieldnames) != PREDICTION_HEADER:
        raise ContractError(f"unexpected predictions header: {reader.fieldnames}")
    return [
        HorizonPrediction(
            row["country"], Month.parse(row["window_start"]), Month.parse(row["target_month"]),
            int(row["horizon"]), float(row["predicted"]),
            float(row["actual"]) if row["actual"] else None,
        )
        for row in reader
    ]


def write_metrics(reports: dict[str, HorizonReport], horizons: int, out: TextIO) -> None:
    """Table layout: one row per (country, metric), one column per horizon."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("country", "metric") + tuple(f"h{k}" for k in range(1, horizons + 1)))
    for country in sorted(reports):
        rep = reports[country]
        for name in ("pearson", "mape", "rmse", "n", "predictions"):
            row = [country, name]
            for k in range(1, horizons + 1):
                m = rep.metrics.get(k)
                if name == "predictions":
                    row.append(str(rep.counts.get(k, 0)))
                elif name == "n":
                    row.append(str(m.n if m is not None else 0))
                elif m is None:
                    row.append("")
                else:
                    row.append(_fmt(getattr(m, name)))
            writer.writerow(row)
