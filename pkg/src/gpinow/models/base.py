from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ContractError, DataValidationError


@dataclass(frozen=True)
class Dataset:
    """Training data: rows are months, columns are event-code counts.

    ``codes`` names the columns; models remember them at fit time.
    """

    X: np.ndarray
    y: np.ndarray
    codes: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise DataValidationError(f"X must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise DataValidationError(f"dataset needs n >= 1 and p >= 1, got {X.shape}")
        if y.shape != (n,):
            raise DataValidationError(f"y has shape {y.shape}, expected ({n},)")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataValidationError("dataset contains non-finite values")
        codes = tuple(self.codes) if self.codes else tuple(f"x{j}" for j in range(p))
        if len(codes) != p:
            raise DataValidationError(f"{len(codes)} codes for {p} columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "codes", codes)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], self.codes)


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation sorting by (x_0, x_1, ..., x_{p-1}, y).

    Learners that sample rows do so after this sort, which makes their
    output independent of the order rows were supplied in.
    """
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def presort(X: np.ndarray) -> np.ndarray:
    """Per-column stable argsort, shape (p, n)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def n_from_fraction(frac: float, p: int) -> int:
    # guard against 0.3 * 10 = 3.0000000000000004
    return max(1, min(p, int(np.ceil(frac * p - 1e-9))))


def check_matrix(X, codes: Sequence[str] | None, feature_codes: tuple[str, ...]) -> np.ndarray:
    if hasattr(X, "codes") and hasattr(X, "values") and codes is None:
        codes = X.codes
        X = X.values
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ContractError(f"expected a 2-D matrix, got shape {X.shape}")
    if codes is not None:
        codes = tuple(codes)
        if codes != feature_codes:
            expected = set(feature_codes)
            given = set(codes)
            extra = [c for c in codes if c not in expected]
            missing = [c for c in feature_codes if c not in given]
            if extra:
                raise ContractError(f"column {extra[0]!r} was not seen at fit time")
            if missing:
                raise ContractError(f"column {missing[0]!r} is missing")
            first = next(a for a, b in zip(codes, feature_codes) if a != b)
            raise ContractError(f"column {first!r} is out of fit-time order")
    if X.shape[1] != len(feature_codes):
        raise ContractError(f"matrix has {X.shape[1]} columns, model expects {len(feature_codes)}")
    if not np.isfinite(X).all():
        raise ContractError("prediction input contains non-finite values")
    return X


def predict(model, X, codes: Sequence[str] | None = None) -> np.ndarray:
    """Predict with any fitted model.

    ``X`` is a matrix or a FeatureMatrix; when ``codes`` (or the matrix's own
    codes) are given they must equal the model's fit-time column codes.
    """
    X = check_matrix(X, codes, model.feature_codes)
    out = model.predict_array(X)
    return out
