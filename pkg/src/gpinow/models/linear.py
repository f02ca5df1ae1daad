from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from ..errors import ConfigError
from . import _kernels
from .base import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ElasticNetParams:
    alpha: float = 0.5
    lam: float = 0.01
    max_iter: int = 10000
    tol: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be > 0")


@dataclass(frozen=True)
class ElasticNetModel:
    kind: ClassVar[str] = "elastic-net"

    coef: np.ndarray          # original feature units
    intercept: float
    means: np.ndarray
    scales: np.ndarray        # 0 marks a constant column
    feature_codes: tuple[str, ...]
    params: ElasticNetParams
    n_iter: int = 0
    converged: bool = True

    def __post_init__(self):
        for name in ("coef", "means", "scales"):
            getattr(self, name).setflags(write=False)

    @property
    def standardized_coef(self) -> np.ndarray:
        return self.coef * self.scales

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef + self.intercept


def fit_elastic_net(d: Dataset, p: ElasticNetParams = ElasticNetParams()) -> ElasticNetModel:
    """Elastic net by cyclic coordinate descent on z-scored columns.

    The penalty ``lam * (alpha |g|_1 + (1 - alpha)/2 |g|^2)`` acts on the
    standardized coefficients ``g``; they are mapped back to original units
    afterwards.  Constant columns keep a zero coefficient.
    """
    X, y = d.X, d.y
    n = d.n
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    active = scales > 0
    safe = np.where(active, scales, 1.0)
    Z = (X - means) / safe
    Z[:, ~active] = 0.0
    y_mean = y.mean()
    G = Z.T @ Z / n
    c = Z.T @ (y - y_mean) / n
    gamma, n_iter, converged = _kernels.coordinate_descent(
        G, c, active, float(p.lam), float(p.alpha), int(p.max_iter), float(p.tol)
    )
    if not converged:
        logger.debug("elastic net stopped at max_iter=%d", p.max_iter)
    coef = np.where(active, gamma / safe, 0.0)
    intercept = float(y_mean - coef @ means)
    return ElasticNetModel(coef, intercept, means, np.where(active, scales, 0.0),
                           d.codes, p, int(n_iter), bool(converged))


def linear_attributions(model: ElasticNetModel, x: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Exact additive attributions beta_j * (x_j - mean_j) for a linear model."""
    mu = np.asarray(background, dtype=np.float64).mean(axis=0)
    return model.coef * (np.asarray(x, dtype=np.float64) - mu)
