"""Feature-relevance filters, rank scaling and the weighted filter ensemble.

Each filter scores every feature; scores are rank-transformed onto the
equidistant grid {0, 1/(p-1), ..., 1} (ties averaged) so that different
filters become commensurate.  The ensemble score of a feature is the
weighted average of its scaled filter scores.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import Dataset

DEFAULT_BINS = 10
FILTER_NAMES = ("info_gain", "auc", "jmi", "cmim")


def rank_scale(raw_scores: np.ndarray) -> np.ndarray:
    """Map raw scores onto the equidistant [0, 1] rank grid.

    Strictly larger raw scores get strictly larger scaled scores; tied
    values receive the mean of their grid positions.  A single feature
    degenerates to [1.0].
    """
    raw = np.asarray(raw_scores, dtype=float)
    if np.isnan(raw).any():
        raise ValueError("raw scores contain NaN")
    p = len(raw)
    if p == 1:
        return np.array([1.0])
    ranks = rankdata(raw, method="average")  # 1..p, ties averaged
    return (ranks - 1.0) / (p - 1.0)


def _bin_feature(x: np.ndarray, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-frequency discretization into integer codes."""
    distinct = np.unique(x)
    if len(distinct) <= bins:
        return np.searchsorted(distinct, x)
    edges = np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1])
    return np.searchsorted(np.unique(edges), x, side="right")


def _entropy(counts: np.ndarray) -> float:
    """Entropy in bits of a count vector."""
    counts = counts[counts > 0]
    total = counts.sum()
    pr = counts / total
    return float(-(pr * np.log2(pr)).sum())


def _mi_from_codes(a: np.ndarray, b: np.ndarray) -> float:
    """Mutual information I(A;B) in bits from integer code vectors."""
    na, nb = a.max() + 1, b.max() + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb)
    return _entropy(joint.sum(axis=1)) + _entropy(joint.sum(axis=0)) - _entropy(joint.ravel())


def info_gain(dataset: Dataset, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Information gain H(Y) - H(Y | binned X_j) per feature, in bits."""
    y = dataset.y
    return np.array([
        _mi_from_codes(_bin_feature(dataset.X[:, j], bins), y) for j in range(dataset.p)
    ])


def auc_score(dataset: Dataset) -> np.ndarray:
    """Folded rank AUC |2*AUC - 1| of each feature as a univariate score."""
    y = dataset.y
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    scores = np.empty(dataset.p)
    for j in range(dataset.p):
        ranks = rankdata(dataset.X[:, j], method="average")
        auc = (ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
        scores[j] = abs(2.0 * auc - 1.0)
    return scores


def _greedy_mi_order(dataset: Dataset, bins: int, kind: str) -> np.ndarray:
    """Forward-selection order for JMI/CMIM on binned features.

    The first feature maximizes I(X_j; Y); thereafter JMI accumulates
    sum_k I(X_j, X_k; Y) over selected k while CMIM tracks
    min_k I(X_j; Y | X_k).  Returns the selection order (feature
    indices, best first).  Ties break toward the lower index.
    """
    y = dataset.y
    p = dataset.p
    codes = [_bin_feature(dataset.X[:, j], bins) for j in range(p)]
    mi_y = np.array([_mi_from_codes(c, y) for c in codes])
    order = [int(np.argmax(mi_y))]
    remaining = set(range(p)) - set(order)
    # running criterion per candidate: JMI sum / CMIM running minimum
    crit = np.full(p, 0.0 if kind == "jmi" else np.inf)

    def joint_codes(j, k):
        return codes[j] * (codes[k].max() + 1) + codes[k]

    while remaining:
        k = order[-1]
        for j in remaining:
            if kind == "jmi":
                crit[j] += _mi_from_codes(joint_codes(j, k), y)
            else:
                # I(Xj; Y | Xk) = I(Xj,Xk; Y) - I(Xk; Y)
                cond = _mi_from_codes(joint_codes(j, k), y) - mi_y[k]
                crit[j] = min(crit[j], cond)
        cand = sorted(remaining)
        best = cand[int(np.argmax([crit[j] for j in cand]))]
        order.append(best)
        remaining.remove(best)
    return np.array(order, dtype=int)


def _order_to_scores(order: np.ndarray) -> np.ndarray:
    p = len(order)
    scores = np.empty(p)
    scores[order] = p - np.arange(1, p + 1)  # first selected highest
    return scores


def jmi(dataset: Dataset, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Joint-mutual-information forward ranking as raw scores."""
    if dataset.p == 1:
        return np.array([1.0])
    return _order_to_scores(_greedy_mi_order(dataset, bins, "jmi"))


def cmim(dataset: Dataset, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Conditional-mutual-information-maximization ranking as raw scores."""
    if dataset.p == 1:
        return np.array([1.0])
    return _order_to_scores(_greedy_mi_order(dataset, bins, "cmim"))


@dataclass(frozen=True)
class FilterMatrix:
    """p x M matrix of rank-scaled filter scores, one column per filter."""

    scores: np.ndarray
    filter_names: tuple[str, ...]

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        object.__setattr__(self, "scores", scores)
        if scores.ndim != 2 or scores.shape[1] != len(self.filter_names):
            raise ValueError("scores must be p x M with one name per column")
        if (scores < 0).any() or (scores > 1).any():
            raise ValueError("scaled scores must lie in [0, 1]")
        scores.setflags(write=False)

    @property
    def p(self) -> int:
        return self.scores.shape[0]

    @property
    def m(self) -> int:
        return self.scores.shape[1]

    def column(self, index: int) -> np.ndarray:
        return self.scores[:, index]

    def to_csv(self, path, feature_names=None):
        names = feature_names or [f"f{j}" for j in range(self.p)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "filter", "scaled_score"])
            for j in range(self.p):
                for m, fname in enumerate(self.filter_names):
                    writer.writerow([names[j], fname, repr(self.scores[j, m])])


def compute_filter_matrix(dataset: Dataset, bins: int = DEFAULT_BINS) -> FilterMatrix:
    """Run all built-in filters on a training dataset and rank-scale them."""
    columns = [
        rank_scale(info_gain(dataset, bins)),
        rank_scale(auc_score(dataset)),
        rank_scale(jmi(dataset, bins)),
        rank_scale(cmim(dataset, bins)),
    ]
    return FilterMatrix(np.column_stack(columns), FILTER_NAMES)


def ensemble_score(filter_matrix: FilterMatrix, weights: np.ndarray) -> np.ndarray:
    """Weighted average of the scaled filter columns (one value per feature)."""
    w = np.asarray(weights, dtype=float)
    if len(w) != filter_matrix.m:
        raise ValueError(f"expected {filter_matrix.m} weights, got {len(w)}")
    return filter_matrix.scores @ w


def top_fraction_mask(ef: np.ndarray, ffrac: float, p: int | None = None) -> np.ndarray:
    """Mask selecting the ceil(p * ffrac) highest-scored features.

    Ties break toward the lower feature index.
    """
    ef = np.asarray(ef, dtype=float)
    p = len(ef) if p is None else p
    if not 0.0 <= ffrac <= 1.0:
        raise ValueError(f"ffrac {ffrac} outside [0, 1]")
    count = math.ceil(p * ffrac)
    mask = np.zeros(p, dtype=np.int8)
    if count:
        # stable sort on (-score, index) so equal scores prefer low indices
        chosen = np.lexsort((np.arange(p), -ef))[:count]
        mask[chosen] = 1
    return mask
