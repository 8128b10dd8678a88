"""Multi-objective joint hyperparameter tuning and feature selection.

Two optimizer families over a mixed hyperparameter + feature-mask space:
an NSGA-II with filter-ensemble-aware initialization and mutation, and
ParEGO-style Bayesian optimization with a random-forest surrogate.
Both optimize (misclassification error, weighted feature cost) and are
scored by nested resampling and dominated hypervolume.
"""

__version__ = "0.1.0"
