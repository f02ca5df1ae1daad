"""K-fold cross-validated grid search.

Folds come from one seeded shuffle of the row indices (plain k-fold, not
forward chaining), and the same folds are reused for every assignment.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence, TextIO

import numpy as np

from .errors import ConfigError, DataValidationError
from .metrics import rmse
from .models import Dataset, LEARNERS, fit, make_params
from .models.base import check_matrix

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "elastic-net": {"alpha": [0.1, 0.5, 0.9], "lambda": [0.001, 0.01, 0.1, 1.0]},
    "tree": {"max_depth": [2, 4, 8], "min_samples_split": [2, 8], "min_samples_leaf": [1, 4]},
    "forest": {"n_estimators": [100, 300], "max_features": [0.33, 1.0]},
    "gbt": {"n_estimators": [100, 300], "max_depth": [2, 4], "learning_rate": [0.05, 0.1],
            "colsample_bytree": [0.5, 1.0]},
    "svr": {"C": [0.1, 1.0, 10.0], "gamma": [0.01, 0.1, 1.0]},
}


@dataclass(frozen=True)
class Grid:
    learner: str
    assignments: tuple[dict, ...]

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ConfigError(f"unknown learner {self.learner!r}")
        if not self.assignments:
            raise ConfigError("grid is empty")
        for a in self.assignments:
            make_params(self.learner, a)

    @classmethod
    def from_lists(cls, learner: str, values: Mapping[str, Sequence[Any]]) -> "Grid":
        """Cartesian product; the last-listed parameter varies fastest."""
        keys = list(values)
        for k in keys:
            if isinstance(values[k], (str, bytes)) or not len(values[k]):
                raise ConfigError(f"grid values for {k!r} must be a non-empty list")
        combos = itertools.product(*(values[k] for k in keys))
        return cls(learner, tuple(dict(zip(keys, c)) for c in combos))

    @classmethod
    def default(cls, learner: str) -> "Grid":
        return cls.from_lists(learner, DEFAULT_GRIDS[learner])

    @classmethod
    def single(cls, learner: str, assignment: Mapping[str, Any] | None = None) -> "Grid":
        return cls(learner, (dict(assignment or {}),))

    def __len__(self) -> int:
        return len(self.assignments)


@dataclass(frozen=True)
class CvResult:
    assignment: dict
    fold_rmse: tuple[float, ...]
    mean_rmse: float


def kfold_splits(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if k < 2:
        raise DataValidationError(f"k must be >= 2, got {k}")
    if k > n:
        raise DataValidationError(f"cannot make {k} folds from {n} rows")
    perm = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF).permutation(n)
    folds = np.array_split(perm, k)
    splits = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        splits.append((np.sort(train), np.sort(test)))
    return splits


def cross_validate(d: Dataset, learner: str, assignment: Mapping[str, Any],
                   splits, seed: int) -> CvResult:
    scores = []
    for train, test in splits:
        model = fit(learner, d.subset(train), assignment, seed)
        pred = model.predict_array(check_matrix(d.X[test], None, model.feature_codes))
        scores.append(rmse(d.y[test], pred))
    return CvResult(dict(assignment), tuple(scores), float(np.mean(scores)))


def _boosting_groups(g: Grid, seed: int) -> list[list[int]]:
    """Indices of boosted assignments that differ only in ``n_estimators``."""
    groups: dict = {}
    for i, a in enumerate(g.assignments):
        key = replace(make_params(g.learner, a, seed), n_estimators=1)
        groups.setdefault(key, []).append(i)
    return list(groups.values())


def _cross_validate_staged(d: Dataset, g: Grid, members: list[int], splits, seed: int
                           ) -> dict[int, CvResult]:
    """CV a group of boosted assignments with one fit per fold.

    Boosting rounds and column masks of a shorter run are a prefix of a
    longer run with the same seed, so the staged predictions of the longest
    model are exactly the predictions of the shorter ones.
    """
    sizes = {i: make_params(g.learner, g.assignments[i], seed).n_estimators for i in members}
    longest = max(members, key=lambda i: sizes[i])
    scores: dict[int, list[float]] = {i: [] for i in members}
    for train, test in splits:
        model = fit(g.learner, d.subset(train), g.assignments[longest], seed)
        Xt = check_matrix(d.X[test], None, model.feature_codes)
        want = {sizes[i] for i in members}
        stages = {r: pred for r, pred in enumerate(model.staged_predict(Xt), start=1) if r in want}
        for i in members:
            scores[i].append(rmse(d.y[test], stages[sizes[i]]))
    return {i: CvResult(dict(g.assignments[i]), tuple(s), float(np.mean(s)))
            for i, s in scores.items()}


def grid_search(d: Dataset, g: Grid, k: int = 10, seed: int = 0) -> tuple[dict, list[CvResult]]:
    """Return the assignment with the lowest mean fold RMSE and all results.

    Ties keep the earliest assignment in grid order.  Boosted assignments
    that differ only in the number of rounds share their fits.
    """
    splits = kfold_splits(d.n, k, seed)
    if min(len(tr) for tr, _ in splits) < 2:
        raise DataValidationError("every training fold needs at least 2 rows")
    if g.learner == "gbt":
        by_index: dict[int, CvResult] = {}
        for members in _boosting_groups(g, seed):
            by_index.update(_cross_validate_staged(d, g, members, splits, seed))
        results = [by_index[i] for i in range(len(g))]
    else:
        results = [cross_validate(d, g.learner, a, splits, seed) for a in g.assignments]
    best = min(range(len(results)), key=lambda i: (results[i].mean_rmse, i))
    return dict(g.assignments[best]), results


def write_cv_results(results: Sequence[CvResult], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("assignment_id", "fold", "rmse"))
    for i, res in enumerate(results):
        for fold, score in enumerate(res.fold_rmse):
            writer.writerow((i, fold, repr(score)))
