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
class SvrParams:
    c: float = 1.0
    gamma: float = 0.1
    epsilon: float = 0.1
    tol: float = 1e-3
    max_iter: int = 100000

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError("C must be > 0")
        if self.gamma <= 0:
            raise ConfigError("gamma must be > 0")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.tol <= 0:
            raise ConfigError("tol must be > 0")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SvrModel:
    kind: ClassVar[str] = "svr"

    support_vectors: np.ndarray   # standardized
    dual_coef: np.ndarray         # alpha - alpha* of each support vector
    bias: float
    means: np.ndarray
    scales: np.ndarray
    feature_codes: tuple[str, ...]
    params: SvrParams
    converged: bool = True
    n_iter: int = 0
    dual_objective: float = 0.0

    def _standardize(self, X):
        return (X - self.means) / self.scales

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        if len(self.dual_coef) == 0:
            return np.full(X.shape[0], self.bias)
        K = rbf_kernel(self._standardize(X), self.support_vectors, self.params.gamma)
        return K @ self.dual_coef + self.bias


def dual_objective(K: np.ndarray, y: np.ndarray, beta: np.ndarray, eps: float) -> float:
    """0.5 beta'K beta + eps * |beta|_1 - y'beta (to be minimized)."""
    return float(0.5 * beta @ K @ beta + eps * np.abs(beta).sum() - y @ beta)


def fit_svr_rbf(d: Dataset, p: SvrParams = SvrParams()) -> SvrModel:
    """Epsilon-SVR with an RBF kernel on z-scored features.

    The dual is solved by pairwise updates on the maximal KKT-violating
    pair.  Hitting ``max_iter`` returns the current iterate with
    ``converged=False``.
    """
    means = d.X.mean(axis=0)
    scales = d.X.std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    Z = (d.X - means) / scales
    K = rbf_kernel(Z, Z, p.gamma)
    beta, bias, n_iter, converged, viol = _kernels.svr_smo(
        K, np.ascontiguousarray(d.y), float(p.c), float(p.epsilon), float(p.tol), int(p.max_iter)
    )
    if not converged:
        logger.warning("SVR did not converge: KKT violation %.3g after %d steps", viol, n_iter)
    sv = np.flatnonzero(beta != 0.0)
    return SvrModel(
        support_vectors=Z[sv],
        dual_coef=beta[sv],
        bias=float(bias),
        means=means,
        scales=scales,
        feature_codes=d.codes,
        params=p,
        converged=bool(converged),
        n_iter=int(n_iter),
        dual_objective=dual_objective(K, d.y, beta, p.epsilon),
    )
