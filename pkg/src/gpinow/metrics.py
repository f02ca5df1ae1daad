"""Accuracy indicators between observed (y) and predicted (x) series."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError


@dataclass(frozen=True)
class MetricsReport:
    pearson: Optional[float]
    rmse: float
    mape: float
    n: int


def _pair(y, x, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if y.shape != x.shape:
        raise ContractError(f"length mismatch: {y.size} observed vs {x.size} predicted")
    if y.size < min_len:
        raise ContractError(f"need at least {min_len} values, got {y.size}")
    return y, x


def pearson(y: Sequence[float], x: Sequence[float]) -> Optional[float]:
    """Sample correlation; ``None`` when either series is constant."""
    y, x = _pair(y, x, 2)
    dy = y - y.mean()
    dx = x - x.mean()
    syy = float(dy @ dy)
    sxx = float(dx @ dx)
    if syy == 0.0 or sxx == 0.0:
        return None
    r = float(dy @ dx) / (math.sqrt(syy) * math.sqrt(sxx))
    return max(-1.0, min(1.0, r))


def rmse(y: Sequence[float], x: Sequence[float]) -> float:
    y, x = _pair(y, x, 1)
    d = x - y
    return math.sqrt(float(d @ d) / d.size)


def mape(y: Sequence[float], x: Sequence[float]) -> float:
    """Mean absolute percentage error, in percent."""
    y, x = _pair(y, x, 1)
    if np.any(y == 0):
        raise DomainError("MAPE is undefined when an observed value is zero")
    return float(np.mean(np.abs((y - x) / y)) * 100.0)


def percentage_error(y_t: float, x_t: float) -> float:
    """Signed error in percent: positive means the prediction overshoots."""
    if y_t == 0:
        raise DomainError("percentage error is undefined for an observed value of zero")
    return 100.0 * (x_t - y_t) / y_t


def report(y: Sequence[float], x: Sequence[float]) -> MetricsReport:
    y, x = _pair(y, x, 1)
    r = pearson(y, x) if y.size >= 2 else None
    return MetricsReport(r, rmse(y, x), mape(y, x), int(y.size))
