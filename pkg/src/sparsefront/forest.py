"""Random-forest regression surrogate with across-tree uncertainty.

Backed by scikit-learn's RandomForestRegressor; the surface adds the
two things the optimizer needs: a (mean, variance) prediction where the
variance is the spread of per-tree predictions, and row-order-invariant
fitting (rows are canonically sorted before the seeded bootstrap).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestRegressor

VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    min_leaf: int = 3
    mtry_fraction: float = 1.0 / 3.0


@dataclass(frozen=True)
class Forest:
    model: RandomForestRegressor
    y_range: tuple[float, float]

    def predict_mean_var(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and population variance of per-tree predictions.

        Accepts a single design row or a batch; variance is floored at
        a tiny positive value so LCB stays defined.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        per_tree = np.stack([tree.predict(x) for tree in self.model.estimators_])
        mean = per_tree.mean(axis=0)
        var = np.maximum(per_tree.var(axis=0), VAR_FLOOR)
        return mean, var


def fit_forest(X: np.ndarray, y: np.ndarray, params: ForestParams | None = None,
               seed: int = 0) -> Forest:
    """Fit the surrogate on design rows (unit/level coding) and scalar targets."""
    params = params or ForestParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) < 1 or len(X) != len(y):
        raise ValueError("need at least one (row, target) pair")
    # canonical row order makes fitting invariant to training-row permutation
    order = np.lexsort(np.vstack([y[None, :], X.T[::-1]]))
    X, y = X[order], y[order]
    d = X.shape[1]
    mtry = max(int(np.ceil(d * params.mtry_fraction)), 1)
    model = RandomForestRegressor(
        n_estimators=params.n_trees,
        min_samples_leaf=params.min_leaf,
        max_features=mtry,
        bootstrap=True,
        random_state=seed,
    )
    model.fit(X, y)
    return Forest(model=model, y_range=(float(y.min()), float(y.max())))
