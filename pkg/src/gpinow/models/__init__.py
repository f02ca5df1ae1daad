"""Regression learners sharing one fit/predict contract."""

from .base import Dataset, predict
from .linear import ElasticNetModel, ElasticNetParams, fit_elastic_net, linear_attributions
from .registry import LEARNERS, TREE_LEARNERS, fit, make_params
from .svr import SvrModel, SvrParams, fit_svr_rbf
from .trees import (
    ForestModel,
    ForestParams,
    GbtModel,
    GbtParams,
    Tree,
    TreeModel,
    TreeParams,
    fit_decision_tree,
    fit_gbt,
    fit_random_forest,
)

__all__ = [
    "Dataset", "predict", "fit", "make_params", "LEARNERS", "TREE_LEARNERS",
    "ElasticNetModel", "ElasticNetParams", "fit_elastic_net", "linear_attributions",
    "SvrModel", "SvrParams", "fit_svr_rbf",
    "Tree", "TreeModel", "TreeParams", "ForestModel", "ForestParams", "GbtModel", "GbtParams",
    "fit_decision_tree", "fit_random_forest", "fit_gbt",
]
