"""Learner tags, parameter construction and a uniform ``fit`` entry point."""

from __future__ import annotations

from typing import Any, Mapping

from ..errors import ConfigError
from .base import Dataset
from .linear import ElasticNetParams, fit_elastic_net
from .svr import SvrParams, fit_svr_rbf
from .trees import ForestParams, GbtParams, TreeParams, fit_decision_tree, fit_gbt, fit_random_forest

LEARNERS = ("elastic-net", "tree", "forest", "gbt", "svr")
TREE_LEARNERS = ("tree", "forest", "gbt")

# Assignment keys accepted per learner (config spelling -> params field).
_KEYS = {
    "elastic-net": {"alpha": "alpha", "lambda": "lam", "lam": "lam", "max_iter": "max_iter", "tol": "tol"},
    "tree": {"max_depth": "max_depth", "min_samples_split": "min_samples_split",
             "min_samples_leaf": "min_samples_leaf"},
    "forest": {"max_depth": "max_depth", "min_samples_split": "min_samples_split",
               "min_samples_leaf": "min_samples_leaf", "n_estimators": "n_estimators",
               "max_features": "max_features"},
    "gbt": {"n_estimators": "n_estimators", "max_depth": "max_depth",
            "learning_rate": "learning_rate", "colsample_bytree": "colsample_bytree",
            "leaf_l2": "leaf_l2"},
    "svr": {"C": "c", "c": "c", "gamma": "gamma", "epsilon": "epsilon", "tol": "tol",
            "max_iter": "max_iter"},
}


def check_learner(tag: str) -> str:
    if tag not in LEARNERS:
        raise ConfigError(f"unknown learner {tag!r}; expected one of {', '.join(LEARNERS)}")
    return tag


def make_params(learner: str, assignment: Mapping[str, Any], seed: int = 0):
    """Build the learner's parameter object from a grid assignment."""
    keys = _KEYS[check_learner(learner)]
    kwargs = {}
    for key, value in assignment.items():
        if key not in keys:
            raise ConfigError(f"parameter {key!r} is not tunable for learner {learner}")
        kwargs[keys[key]] = value
    if learner == "elastic-net":
        return ElasticNetParams(**kwargs)
    if learner == "tree":
        return TreeParams(**kwargs)
    if learner == "forest":
        tree_kw = {k: kwargs.pop(k) for k in ("max_depth", "min_samples_split", "min_samples_leaf")
                   if k in kwargs}
        tree = TreeParams(**{"max_depth": 16, **tree_kw})
        return ForestParams(tree=tree, seed=seed, **kwargs)
    if learner == "gbt":
        return GbtParams(seed=seed, **kwargs)
    return SvrParams(**kwargs)


_FITTERS = {
    "elastic-net": fit_elastic_net,
    "tree": fit_decision_tree,
    "forest": fit_random_forest,
    "gbt": fit_gbt,
    "svr": fit_svr_rbf,
}


def fit(learner: str, d: Dataset, assignment: Mapping[str, Any] | None = None, seed: int = 0):
    params = make_params(learner, assignment or {}, seed)
    return _FITTERS[learner](d, params)
