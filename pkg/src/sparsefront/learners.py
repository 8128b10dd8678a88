"""Built-in classifiers and the bi-objective evaluator.

Learners are thin, stateless fit/predict pairs: a vectorized k-NN with
Minkowski distance and rectangular/triangular vote kernels, a
CART-style decision tree (scikit-learn backed) and an external
subprocess hook.  ``evaluate_config`` turns a configuration into the
(mean inner-CV misclassification error, weighted feature cost) vector
the optimizers minimize.
"""

from __future__ import annotations

import json
import math
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .data import CvSplit, Dataset
from .filters import FilterMatrix, ensemble_score, top_fraction_mask
from .space import Configuration

KNN_KERNELS = ("rectangular", "triangular")


@dataclass(frozen=True)
class ObjectiveVector:
    perf: float
    cost: float
    failed: bool = False

    def as_tuple(self) -> tuple[float, float]:
        return (self.perf, self.cost)


@dataclass(frozen=True)
class LearnerSpec:
    """Which classifier to run and how configuration hyperparams bind to it.

    ``kind`` is one of knn / decision_tree / external.  For ``external``,
    ``command`` is the argv prefix of the user program (see
    ``_predict_external`` for the temp-dir protocol).
    """

    kind: str
    command: tuple[str, ...] = ()
    defaults: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("knn", "decision_tree", "external"):
            raise ValueError(f"unknown learner kind {self.kind!r}")


def mmce(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Mean misclassification error."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) != len(y_pred) or len(y_true) == 0:
        raise ValueError("label vectors must have equal nonzero length")
    return float(np.mean(y_true != y_pred))


def _majority(y: np.ndarray) -> int:
    counts = np.bincount(y, minlength=2)
    return int(counts.argmax())  # ties -> class 0


def _predict_knn(params: dict, X_train, y_train, X_test) -> np.ndarray:
    k = int(params.get("k", 5))
    power = float(params.get("distance", 2.0))
    kernel = params.get("kernel", "rectangular")
    if kernel not in KNN_KERNELS:
        raise ValueError(f"unsupported knn kernel {kernel!r}")
    k = min(k, len(y_train))
    dist = cdist(X_test, X_train, metric="minkowski", p=power)
    # stable argsort keeps neighbor choice deterministic under ties
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.arange(len(X_test))[:, None]
    if kernel == "rectangular":
        weights = np.ones_like(nearest, dtype=float)
    else:
        d = dist[rows, nearest]
        # normalize by the (k+1)-th neighbor distance where available
        if k < len(y_train):
            d_ref = np.partition(dist, k, axis=1)[:, k][:, None]
        else:
            d_ref = d.max(axis=1, keepdims=True)
        d_ref = np.where(d_ref > 0, d_ref, 1.0)
        weights = np.clip(1.0 - d / d_ref, 1e-12, None)
    labels = y_train[nearest]
    vote1 = (weights * labels).sum(axis=1)
    vote0 = (weights * (1 - labels)).sum(axis=1)
    return (vote1 > vote0).astype(int)  # vote ties -> class 0


def _predict_tree(params: dict, X_train, y_train, X_test) -> np.ndarray:
    from sklearn.tree import DecisionTreeClassifier

    tree = DecisionTreeClassifier(
        max_depth=int(params.get("max_depth", 10)),
        min_samples_split=int(params.get("min_split", 2)),
        random_state=0,
    )
    tree.fit(X_train, y_train)
    return tree.predict(X_test).astype(int)


def _predict_external(command, params: dict, X_train, y_train, X_test) -> np.ndarray:
    """Subprocess protocol: train/test CSVs + params JSON in, labels out.

    The harness writes train.csv (features + label column), test.csv
    (features only) and params.json into a temp dir, invokes the command
    with that directory as its single extra argument and reads one
    predicted label per test row from stdout.
    """
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        np.savetxt(tmp / "train.csv", np.column_stack([X_train, y_train]), delimiter=",")
        np.savetxt(tmp / "test.csv", X_test, delimiter=",")
        (tmp / "params.json").write_text(json.dumps(params))
        out = subprocess.run(
            list(command) + [str(tmp)], capture_output=True, text=True, check=True
        ).stdout
    preds = [int(float(tok)) for tok in out.split()]
    if len(preds) != len(X_test):
        raise ValueError(f"external learner returned {len(preds)} labels for {len(X_test)} rows")
    return np.array(preds, dtype=int)


def train_predict(learner: LearnerSpec, dataset: Dataset, mask: np.ndarray,
                  train_idx: np.ndarray, test_idx: np.ndarray,
                  params: dict | None = None) -> np.ndarray:
    """Fit on the masked columns of the training rows, predict the test rows.

    An empty mask falls back to predicting the training fold's majority
    class everywhere.
    """
    params = {**learner.defaults, **(params or {})}
    mask = np.asarray(mask).astype(bool)
    y_train = dataset.y[train_idx]
    if not mask.any():
        return np.full(len(test_idx), _majority(y_train), dtype=int)
    X_train = dataset.X[np.ix_(train_idx, np.flatnonzero(mask))]
    X_test = dataset.X[np.ix_(test_idx, np.flatnonzero(mask))]
    if learner.kind == "knn":
        return _predict_knn(params, X_train, y_train, X_test)
    if learner.kind == "decision_tree":
        return _predict_tree(params, X_train, y_train, X_test)
    return _predict_external(learner.command, params, X_train, y_train, X_test)


def materialize_mask(config: Configuration, filter_matrix: FilterMatrix | None,
                     p: int) -> np.ndarray:
    """Resolve a configuration's feature mask.

    GA configurations carry the mask explicitly; BO configurations name
    a fraction plus either ensemble weights or a single filter column.
    """
    if config.mask is not None:
        return np.asarray(config.mask)
    if filter_matrix is None:
        raise ValueError("filter matrix required to materialize an ffrac configuration")
    if config.weights is not None:
        ef = ensemble_score(filter_matrix, config.weights)
    elif config.filter_index is not None:
        ef = filter_matrix.column(config.filter_index)
    else:
        raise ValueError("ffrac configuration needs weights or a filter index")
    return top_fraction_mask(ef, config.ffrac, p)


def feature_cost(mask: np.ndarray, costs: np.ndarray) -> float:
    """Total cost of the selected features; exactly S/p under uniform costs."""
    mask = np.asarray(mask)
    s = int(mask.sum())
    p = len(costs)
    if np.all(costs == 1.0 / p):
        return s / p
    return float(math.fsum(costs[mask.astype(bool)]))


def evaluate_config(config: Configuration, dataset: Dataset, inner_cv: CvSplit,
                    learner: LearnerSpec,
                    filter_matrix: FilterMatrix | None = None) -> ObjectiveVector:
    """Inner-CV performance and feature cost of one configuration.

    perf is the mean misclassification error over the inner folds; a
    learner failure on any fold records worst-case perf 1.0 and flags
    the result instead of aborting the optimizer.
    """
    mask = materialize_mask(config, filter_matrix, dataset.p)
    cost = feature_cost(mask, dataset.costs)
    errors = []
    for train_idx, test_idx in inner_cv.iter_train_test():
        try:
            pred = train_predict(learner, dataset, mask, train_idx, test_idx,
                                 config.hyperparams)
        except Exception:
            return ObjectiveVector(perf=1.0, cost=cost, failed=True)
        errors.append(mmce(dataset.y[test_idx], pred))
    return ObjectiveVector(perf=float(np.mean(errors)), cost=cost)


def estimate_geom_rate(dataset: Dataset, trials: int = 100, seed: int = 0,
                       max_depth: int = 10, min_split: int = 5,
                       ccp_alpha: float = 0.02) -> float:
    """Sparsity prior for geometric mask initialization.

    Fits depth-limited trees on random 90% subsets, averages the number
    of distinct split variables E and returns rho = 1/(1+E), the success
    probability whose geometric mean matches E.
    """
    from sklearn.tree import DecisionTreeClassifier

    rng = np.random.default_rng(seed)
    n_sub = max(int(round(dataset.n * 0.9)), 2)
    counts = []
    for _ in range(trials):
        idx = rng.choice(dataset.n, size=n_sub, replace=False)
        y = dataset.y[idx]
        if len(np.unique(y)) < 2:
            counts.append(0)
            continue
        # pruning keeps trees on uninformative data close to stumps
        tree = DecisionTreeClassifier(max_depth=max_depth, min_samples_split=min_split,
                                      ccp_alpha=ccp_alpha,
                                      random_state=int(rng.integers(2**31)))
        tree.fit(dataset.X[idx], y)
        split_vars = tree.tree_.feature
        counts.append(len(np.unique(split_vars[split_vars >= 0])))
    e_hat = float(np.mean(counts))
    if e_hat == 0:
        return 0.5
    return 1.0 / (1.0 + e_hat)
