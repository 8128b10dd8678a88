"""Mixed parameter space and configuration encodings.

A search space is a list of parameter definitions (numeric, integer,
categorical).  A configuration binds a value to every parameter and,
depending on the optimizer variant, carries either an explicit feature
mask (GA) or a feature fraction (BO), plus either ensemble weights or a
single filter index.  All values are plain/immutable; random draws take
an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

NUMERIC = "numeric"
INTEGER = "integer"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ParamDef:
    """One dimension of the search space."""

    name: str
    kind: str
    lo: float | None = None
    hi: float | None = None
    levels: tuple[str, ...] | None = None
    log_scale: bool = False

    def __post_init__(self):
        if self.kind not in (NUMERIC, INTEGER, CATEGORICAL):
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.levels or len(set(self.levels)) < 2:
                raise ValueError(f"{self.name}: categorical needs >= 2 distinct levels")
            if self.log_scale:
                raise ValueError(f"{self.name}: log scale makes no sense for categoricals")
        else:
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ValueError(f"{self.name}: requires lo < hi")
            if self.log_scale and self.lo <= 0:
                raise ValueError(f"{self.name}: log scale requires lo > 0")

    def contains(self, value) -> bool:
        if self.kind == CATEGORICAL:
            return value in self.levels
        if self.kind == INTEGER and value != int(value):
            return False
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParamDef, ...]

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def by_name(self, name: str) -> ParamDef:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class StrategyParams:
    """Self-adapted mutation parameters carried by GA individuals.

    ``sigma`` maps numeric/integer parameter names to unit-cube mutation
    step sizes; ``p_cat`` is the per-gene categorical mutation rate and
    ``p_mask`` the feature-bit erase rate, both clamped to
    [1/n_dims, 0.5].
    """

    sigma: dict = field(default_factory=dict)
    p_cat: float = 0.1
    p_mask: float = 0.1

    SIGMA_LO = 1e-4
    SIGMA_HI = 0.5

    def clamped(self, n_dims: int) -> "StrategyParams":
        lo = min(1.0 / max(n_dims, 2), 0.5)
        sig = {k: float(np.clip(v, self.SIGMA_LO, self.SIGMA_HI)) for k, v in self.sigma.items()}
        return StrategyParams(
            sigma=sig,
            p_cat=float(np.clip(self.p_cat, lo, 0.5)),
            p_mask=float(np.clip(self.p_mask, lo, 0.5)),
        )


@dataclass(frozen=True)
class Configuration:
    """A point in the joint hyperparameter / feature-selection space.

    Exactly one of ``mask`` (GA variants) and ``ffrac`` (BO variants) is
    set.  ``weights`` (ensemble variants) and ``filter_index``
    (single-filter BO variants) are mutually exclusive as well.
    """

    hyperparams: dict
    mask: np.ndarray | None = None
    ffrac: float | None = None
    weights: np.ndarray | None = None
    filter_index: int | None = None
    strategy: StrategyParams | None = None

    def __post_init__(self):
        if self.mask is not None:
            object.__setattr__(self, "mask", np.asarray(self.mask, dtype=np.int8))
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def with_(self, **kwargs) -> "Configuration":
        return replace(self, **kwargs)

    @property
    def hamming_weight(self) -> int:
        if self.mask is None:
            raise ValueError("configuration has no feature mask")
        return int(self.mask.sum())


def simplex_repair(w: np.ndarray) -> np.ndarray:
    """Project a weight vector back onto the probability simplex.

    Negatives are clamped to zero and the result renormalized; an
    all-zero vector resets to uniform.
    """
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    total = w.sum()
    if total <= 0:
        return np.full(len(w), 1.0 / len(w))
    return w / total


def sample_simplex(m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the (m-1)-simplex."""
    return rng.dirichlet(np.ones(m))


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    """Draw hyperparameters uniformly within their bounds.

    Log-scale parameters are uniform in the log domain; categoricals are
    uniform over levels.  Mask/ffrac/weights are left unset, they are
    variant-specific.
    """
    values = {}
    for p in space:
        if p.kind == CATEGORICAL:
            values[p.name] = p.levels[rng.integers(len(p.levels))]
        elif p.log_scale:
            values[p.name] = math.exp(rng.uniform(math.log(p.lo), math.log(p.hi)))
            if p.kind == INTEGER:
                values[p.name] = int(np.clip(round(values[p.name]), p.lo, p.hi))
        elif p.kind == INTEGER:
            values[p.name] = int(rng.integers(int(p.lo), int(p.hi) + 1))
        else:
            values[p.name] = float(rng.uniform(p.lo, p.hi))
    return Configuration(hyperparams=values)


def _unit_of(p: ParamDef, value) -> float:
    if p.kind == CATEGORICAL:
        idx = p.levels.index(value)
        return idx / (len(p.levels) - 1)
    if not p.contains(value):
        raise ValueError(f"{p.name}: value {value!r} out of bounds")
    if p.log_scale:
        return (math.log(value) - math.log(p.lo)) / (math.log(p.hi) - math.log(p.lo))
    return (value - p.lo) / (p.hi - p.lo)


def _value_of(p: ParamDef, u: float):
    u = float(np.clip(u, 0.0, 1.0))
    if p.kind == CATEGORICAL:
        # round-half-up onto the level index grid
        idx = int(math.floor(u * (len(p.levels) - 1) + 0.5))
        return p.levels[idx]
    if p.log_scale:
        raw = math.exp(math.log(p.lo) + u * (math.log(p.hi) - math.log(p.lo)))
    else:
        raw = p.lo + u * (p.hi - p.lo)
    if p.kind == INTEGER:
        return int(np.clip(math.floor(raw + 0.5), p.lo, p.hi))
    return float(np.clip(raw, p.lo, p.hi))


def to_unit(space: SearchSpace, config: Configuration) -> np.ndarray:
    """Encode hyperparameters as a unit-cube vector (one entry per param)."""
    return np.array([_unit_of(p, config.hyperparams[p.name]) for p in space])


def from_unit(space: SearchSpace, vector: np.ndarray, like: Configuration | None = None) -> Configuration:
    """Decode a unit-cube vector back into hyperparameter values.

    Integers use round-half-up; categoricals snap to the nearest level
    index.  Non-hyperparameter fields are copied from ``like``.
    """
    vector = np.asarray(vector, dtype=float)
    if len(vector) != len(space):
        raise ValueError(f"expected vector of length {len(space)}, got {len(vector)}")
    values = {p.name: _value_of(p, u) for p, u in zip(space, vector)}
    if like is not None:
        return like.with_(hyperparams=values)
    return Configuration(hyperparams=values)


def validate(space: SearchSpace, config: Configuration, n_features: int | None = None,
             n_filters: int | None = None) -> list[str]:
    """Return all violations of the configuration against the space.

    An empty list means the configuration is valid.
    """
    problems = []
    for p in space:
        if p.name not in config.hyperparams:
            problems.append(f"missing hyperparameter {p.name!r}")
        elif not p.contains(config.hyperparams[p.name]):
            problems.append(f"{p.name}: value {config.hyperparams[p.name]!r} out of bounds")
    for name in config.hyperparams:
        try:
            space.by_name(name)
        except KeyError:
            problems.append(f"unknown hyperparameter {name!r}")
    if config.mask is not None and config.ffrac is not None:
        problems.append("mask and ffrac are mutually exclusive")
    if config.mask is None and config.ffrac is None:
        problems.append("one of mask or ffrac required")
    if config.mask is not None:
        if n_features is not None and len(config.mask) != n_features:
            problems.append(f"mask length {len(config.mask)} != p={n_features}")
        if not np.isin(config.mask, (0, 1)).all():
            problems.append("mask entries must be binary")
    if config.ffrac is not None and not 0.0 <= config.ffrac <= 1.0:
        problems.append(f"ffrac {config.ffrac} outside [0, 1]")
    if config.weights is not None and config.filter_index is not None:
        problems.append("weights and filter_index are mutually exclusive")
    if config.weights is not None:
        w = config.weights
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            problems.append("weights violate simplex constraint")
        if n_filters is not None and len(w) != n_filters:
            problems.append(f"weights length {len(w)} != M={n_filters}")
    if config.filter_index is not None and n_filters is not None:
        if not 0 <= config.filter_index < n_filters:
            problems.append(f"filter_index {config.filter_index} outside [0, {n_filters})")
    return problems
