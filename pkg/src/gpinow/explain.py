"""Exact Shapley attributions for tree models.

The value of a feature coalition S is the tree's conditional expectation
when features in S are fixed to the explained row and all other splits are
averaged by the training coverage of their branches.  ``tree_shap`` gets the
Shapley values of that game in polynomial time by tracking, along every
root-to-leaf path, the weight of each coalition size; ``brute_force_shapley``
enumerates all 2^p coalitions and is kept as a reference.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from math import factorial
from typing import Any, Mapping, Optional, Sequence, TextIO

import numpy as np

from .errors import ContractError, UnsupportedModelError
from .models import ElasticNetModel, ForestModel, GbtModel, Tree, TreeModel
from .models.base import check_matrix
from .models.linear import linear_attributions
from .months import Month

MAX_BRUTE_FORCE_FEATURES = 20


@dataclass(frozen=True)
class ShapExplanation:
    base_value: float
    contributions: dict[str, float]
    output_value: float
    target_month: Optional[Month] = None
    horizon: Optional[int] = None

    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + sum(self.contributions.values()) - self.output_value)


@dataclass(frozen=True)
class GlobalImportance:
    ranking: tuple[tuple[str, float], ...]

    def codes(self) -> list[str]:
        return [c for c, _ in self.ranking]

    def as_dict(self) -> dict[str, float]:
        return dict(self.ranking)


def _ensemble(model) -> tuple[Sequence[Tree], float, float]:
    """(trees, per-tree weight, constant offset) so output = offset + w * sum(trees)."""
    if isinstance(model, TreeModel):
        return (model.tree,), 1.0, 0.0
    if isinstance(model, ForestModel):
        return model.trees, 1.0 / len(model.trees), 0.0
    if isinstance(model, GbtModel):
        return model.trees, model.learning_rate, model.base_score
    raise UnsupportedModelError(f"tree explanations need a tree model, got {type(model).__name__}")


# -- polynomial-time path algorithm -----------------------------------------

class _Path:
    """Unique features on the current root-to-node path.

    For each element: feature, fraction of coverage flowing this way when the
    feature is unknown (``zero``), 1/0 whether x follows this way (``one``),
    and permutation weights ``w``.
    """

    __slots__ = ("feat", "zero", "one", "w")

    def __init__(self, feat=(), zero=(), one=(), w=()):
        self.feat = list(feat)
        self.zero = list(zero)
        self.one = list(one)
        self.w = list(w)

    def copy(self) -> "_Path":
        return _Path(self.feat, self.zero, self.one, self.w)

    def extend(self, zero: float, one: float, feat: int) -> None:
        depth = len(self.w)
        self.feat.append(feat)
        self.zero.append(zero)
        self.one.append(one)
        self.w.append(1.0 if depth == 0 else 0.0)
        w = self.w
        for i in range(depth - 1, -1, -1):
            w[i + 1] += one * w[i] * (i + 1) / (depth + 1)
            w[i] = zero * w[i] * (depth - i) / (depth + 1)

    def unwind(self, k: int) -> None:
        """Remove element k, undoing its extend."""
        depth = len(self.w) - 1
        one, zero = self.one[k], self.zero[k]
        w = self.w
        nxt = w[depth]
        for i in range(depth - 1, -1, -1):
            if one != 0.0:
                tmp = w[i]
                w[i] = nxt * (depth + 1) / ((i + 1) * one)
                nxt = tmp - w[i] * zero * (depth - i) / (depth + 1)
            else:
                w[i] = w[i] * (depth + 1) / (zero * (depth - i))
        del self.feat[k], self.zero[k], self.one[k]
        w.pop()

    def unwound_sum(self, k: int) -> float:
        """Total weight of the path with element k removed."""
        depth = len(self.w) - 1
        one, zero = self.one[k], self.zero[k]
        w = self.w
        nxt = w[depth]
        total = 0.0
        for i in range(depth - 1, -1, -1):
            if one != 0.0:
                tmp = nxt * (depth + 1) / ((i + 1) * one)
                total += tmp
                nxt = w[i] - tmp * zero * (depth - i) / (depth + 1)
            else:
                total += w[i] * (depth + 1) / (zero * (depth - i))
        return total


def tree_path_shap(tree: Tree, x: np.ndarray, phi: np.ndarray, scale: float = 1.0) -> None:
    """Add the Shapley values of one tree at row ``x`` into ``phi``."""
    feature, threshold = tree.feature, tree.threshold
    left, right = tree.left, tree.right
    value, cover = tree.value, tree.coverage

    def recurse(node: int, path: _Path, zero: float, one: float, feat: int) -> None:
        path.extend(zero, one, feat)
        f = feature[node]
        if f < 0:
            v = value[node] * scale
            for i in range(1, len(path.w)):
                phi[path.feat[i]] += path.unwound_sum(i) * (path.one[i] - path.zero[i]) * v
            return
        if x[f] <= threshold[node]:
            hot, cold = left[node], right[node]
        else:
            hot, cold = right[node], left[node]
        in_zero, in_one = 1.0, 1.0
        if f in path.feat:
            k = path.feat.index(f)
            in_zero, in_one = path.zero[k], path.one[k]
            path.unwind(k)
        c = float(cover[node])
        recurse(hot, path.copy(), in_zero * cover[hot] / c, in_one, f)
        recurse(cold, path, in_zero * cover[cold] / c, 0.0, f)

    recurse(0, _Path(), 1.0, 1.0, -1)


def _check_background(model, background) -> None:
    if background is None:
        return
    B = background.X if hasattr(background, "X") else np.asarray(background)
    if B.ndim != 2 or B.shape[0] < 1:
        raise ContractError("background must be a non-empty matrix")
    if B.shape[1] != len(model.feature_codes):
        raise ContractError(
            f"background has {B.shape[1]} columns, model expects {len(model.feature_codes)}"
        )


def shap_values(model, x) -> tuple[float, np.ndarray]:
    """(base value, attribution vector) for one row of a tree model."""
    trees, w, offset = _ensemble(model)
    x = check_matrix(x, None, model.feature_codes)[0]
    phi = np.zeros(len(model.feature_codes))
    base = offset
    for t in trees:
        base += w * t.expected_value()
        if t.n_nodes > 1:
            tree_path_shap(t, x, phi, w)
    return base, phi


def tree_shap(model, x, background=None, target_month: Optional[Month] = None,
              horizon: Optional[int] = None) -> ShapExplanation:
    """Explain one prediction of a tree, forest or boosted model.

    Branch weights come from the training coverage stored in the trees, so
    ``base_value`` is the model's mean output over the rows each tree was
    grown on (for a forest, the bootstrap samples).  ``background`` is only
    checked for shape compatibility.
    """
    _ensemble(model)
    _check_background(model, background)
    base, phi = shap_values(model, x)
    out = float(model.predict_array(check_matrix(x, None, model.feature_codes))[0])
    return ShapExplanation(float(base), dict(zip(model.feature_codes, phi.tolist())), out,
                           target_month, horizon)


# -- exponential reference ---------------------------------------------------

def _coalition_values(tree: Tree, x: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Conditional expectation of ``tree`` for every coalition (rows of ``members``)."""

    def expect(node: int) -> np.ndarray:
        f = tree.feature[node]
        if f < 0:
            return np.full(members.shape[0], tree.value[node])
        lo, hi = tree.left[node], tree.right[node]
        v_lo, v_hi = expect(lo), expect(hi)
        c = float(tree.coverage[node])
        averaged = (tree.coverage[lo] * v_lo + tree.coverage[hi] * v_hi) / c
        known = v_lo if x[f] <= tree.threshold[node] else v_hi
        return np.where(members[:, f], known, averaged)

    return expect(0)


def coalition_game(model, x) -> np.ndarray:
    """v(S) for all 2^p coalitions; coalition S is the integer bitmask of its features."""
    trees, w, offset = _ensemble(model)
    x = check_matrix(x, None, model.feature_codes)[0]
    p = len(model.feature_codes)
    if p > MAX_BRUTE_FORCE_FEATURES:
        raise ContractError(f"refusing to enumerate 2^{p} coalitions (limit p <= {MAX_BRUTE_FORCE_FEATURES})")
    masks = np.arange(2 ** p, dtype=np.int64)
    members = ((masks[:, None] >> np.arange(p)) & 1).astype(bool)
    v = np.full(masks.size, float(offset))
    for t in trees:
        v += w * _coalition_values(t, x, members)
    return v


def brute_force_shapley(model, x, background=None) -> dict[str, float]:
    """Shapley values by summing marginal contributions over all coalitions."""
    _check_background(model, background)
    p = len(model.feature_codes)
    v = coalition_game(model, x)
    masks = np.arange(2 ** p, dtype=np.int64)
    sizes = np.array([bin(m).count("1") for m in range(2 ** p)])
    weight = np.array([factorial(s) * factorial(p - s - 1) / factorial(p) if s < p else 0.0
                       for s in range(p + 1)])
    phi = {}
    for j, code in enumerate(model.feature_codes):
        without = masks[(masks >> j) & 1 == 0]
        gains = v[without | (1 << j)] - v[without]
        phi[code] = float(np.sum(weight[sizes[without]] * gains))
    return phi


# -- aggregation and documents -----------------------------------------------

def global_importance(explanations: Sequence[ShapExplanation]) -> GlobalImportance:
    """Mean absolute attribution per feature, largest first (ties by code)."""
    if not explanations:
        raise ContractError("need at least one explanation")
    codes = list(explanations[0].contributions)
    for e in explanations[1:]:
        if list(e.contributions) != codes:
            raise ContractError("explanations cover different feature sets")
    mat = np.array([[e.contributions[c] for c in codes] for e in explanations])
    imp = np.abs(mat).mean(axis=0)
    ranking = sorted(zip(codes, imp.tolist()), key=lambda t: (-t[1], t[0]))
    return GlobalImportance(tuple(ranking))


def linear_explanation(model: ElasticNetModel, x, background) -> ShapExplanation:
    """Additive attributions of a linear model relative to the background mean."""
    B = background.X if hasattr(background, "X") else np.asarray(background, dtype=np.float64)
    x = check_matrix(x, None, model.feature_codes)[0]
    phi = linear_attributions(model, x, B)
    base = float(model.intercept + model.coef @ B.mean(axis=0))
    out = float(model.predict_array(x[None, :])[0])
    return ShapExplanation(base, dict(zip(model.feature_codes, phi.tolist())), out)


def explain_prediction(model, x, background, meta: Mapping[str, Any] | None = None) -> dict:
    """Explanation document with features split into upward and downward pushes."""
    meta = dict(meta or {})
    exp = tree_shap(model, x, background)
    contribs = [{"code": c, "phi": v} for c, v in exp.contributions.items()]
    pos = sorted(((c, v) for c, v in exp.contributions.items() if v > 0), key=lambda t: (-t[1], t[0]))
    neg = sorted(((c, v) for c, v in exp.contributions.items() if v < 0), key=lambda t: (t[1], t[0]))
    doc = {
        "country": meta.get("country"),
        "target_month": str(meta["target_month"]) if meta.get("target_month") else None,
        "horizon": meta.get("horizon"),
        "base_value": exp.base_value,
        "output_value": exp.output_value,
        "contributions": contribs,
        "positive": [{"code": c, "phi": v} for c, v in pos],
        "negative": [{"code": c, "phi": v} for c, v in neg],
    }
    for key in ("learner", "window_start"):
        if key in meta:
            doc[key] = str(meta[key])
    return doc


def dump_explanation(doc: dict, out: TextIO) -> None:
    json.dump(doc, out, indent=2)
    out.write("\n")


def write_importance(imp: GlobalImportance, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("code", "mean_abs_shap"))
    for code, value in imp.ranking:
        writer.writerow((code, repr(value)))
