"""Versioned JSON documents for fitted models.

Floats are written with Python's shortest round-trip repr, so a dump/load
cycle reproduces every threshold and value bit for bit.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from ..errors import DataValidationError
from .linear import ElasticNetModel, ElasticNetParams
from .svr import SvrModel, SvrParams
from .trees import ForestModel, ForestParams, GbtModel, GbtParams, Tree, TreeModel, TreeParams

FORMAT = "gpinow.model"
VERSION = 1


def _tree_doc(t: Tree) -> list[dict]:
    return [
        {
            "feature": int(t.feature[i]),
            "threshold": float(t.threshold[i]),
            "left": int(t.left[i]),
            "right": int(t.right[i]),
            "value": float(t.value[i]),
            "coverage": int(t.coverage[i]),
        }
        for i in range(t.n_nodes)
    ]


def _tree_from(nodes: list[dict]) -> Tree:
    def col(name, dtype):
        return np.array([nd[name] for nd in nodes], dtype=dtype)

    tree = Tree(col("feature", np.int64), col("threshold", np.float64), col("left", np.int64),
                col("right", np.int64), col("value", np.float64), col("coverage", np.int64))
    n = tree.n_nodes
    for i in range(n):
        internal = tree.feature[i] >= 0
        kids = (tree.left[i], tree.right[i])
        if internal and not all(0 < k < n for k in kids):
            raise DataValidationError(f"node {i} has invalid children {kids}")
        if not internal and kids != (-1, -1):
            raise DataValidationError(f"leaf {i} has children")
    return tree


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a).ravel()]


def model_to_dict(model) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "feature_codes": list(model.feature_codes),
    }
    doc["params"] = dataclasses.asdict(model.params)
    if isinstance(model, ElasticNetModel):
        doc.update(coef=_floats(model.coef), intercept=model.intercept,
                   means=_floats(model.means), scales=_floats(model.scales),
                   n_iter=model.n_iter, converged=model.converged)
    elif isinstance(model, TreeModel):
        doc["trees"] = [_tree_doc(model.tree)]
    elif isinstance(model, ForestModel):
        doc["trees"] = [_tree_doc(t) for t in model.trees]
    elif isinstance(model, GbtModel):
        doc.update(base_score=model.base_score, learning_rate=model.learning_rate,
                   trees=[_tree_doc(t) for t in model.trees])
    elif isinstance(model, SvrModel):
        doc.update(support_vectors=[_floats(r) for r in model.support_vectors],
                   dual_coef=_floats(model.dual_coef), bias=model.bias,
                   means=_floats(model.means), scales=_floats(model.scales),
                   converged=model.converged, n_iter=model.n_iter,
                   dual_objective=model.dual_objective)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise DataValidationError("not a gpinow model document")
    if doc.get("version") != VERSION:
        raise DataValidationError(f"unsupported model document version {doc.get('version')}")
    kind = doc["kind"]
    codes = tuple(doc["feature_codes"])
    params = doc["params"]
    if kind == "elastic-net":
        return ElasticNetModel(np.array(doc["coef"]), doc["intercept"], np.array(doc["means"]),
                               np.array(doc["scales"]), codes, ElasticNetParams(**params),
                               doc["n_iter"], doc["converged"])
    if kind == "tree":
        return TreeModel(_tree_from(doc["trees"][0]), codes, TreeParams(**params))
    if kind == "forest":
        fp = dict(params)
        fp["tree"] = TreeParams(**fp["tree"])
        return ForestModel(tuple(_tree_from(t) for t in doc["trees"]), codes, ForestParams(**fp))
    if kind == "gbt":
        return GbtModel(doc["base_score"], doc["learning_rate"],
                        tuple(_tree_from(t) for t in doc["trees"]), codes, GbtParams(**params))
    if kind == "svr":
        p = len(codes)
        sv = np.array(doc["support_vectors"], dtype=np.float64).reshape(-1, p)
        return SvrModel(sv, np.array(doc["dual_coef"]), doc["bias"], np.array(doc["means"]),
                        np.array(doc["scales"]), codes, SvrParams(**params), doc["converged"],
                        doc["n_iter"], doc["dual_objective"])
    raise DataValidationError(f"unknown model kind {kind!r}")


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True)


def loads(text: str):
    return model_from_dict(json.loads(text))
