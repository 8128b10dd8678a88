"""ParEGO-style Bayesian optimization over the reduced feature-selection space.

BO variants never carry an explicit mask: the genome is hyperparameters
plus a feature fraction and either ensemble weights (FE variants) or a
single filter index.  Multi-objective runs scalarize (perf, cost) with
a fresh random augmented-Chebyshev weight per proposed point; a
random-forest surrogate fitted on the scalarized archive is minimized
under an LCB acquisition over random + local candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forest import ForestParams, fit_forest
from .learners import ObjectiveVector
from .space import (
    Configuration,
    SearchSpace,
    from_unit,
    sample_simplex,
    sample_uniform,
    simplex_repair,
    to_unit,
)
from .trace import Trace

BATCH_SIZE = 15
N_CANDIDATES_UNIFORM = 500
N_CANDIDATES_LOCAL = 500
LOCAL_SD = 0.1
RHO_AUG = 0.05
NJ_SWEEP_POINTS = 20

BO_VARIANTS = {
    "BO-MO-FE": ("MO", "ensemble"),
    "BO-MO": ("MO", "individual"),
    "BO-SO-FE": ("SO", "ensemble"),
    "BO-SO": ("SO", "individual"),
    "BO-MO-FE-NJ": ("NJ", "ensemble"),
}


@dataclass(frozen=True)
class BoProblem:
    space: SearchSpace
    n_filters: int
    evaluate: callable  # Configuration -> ObjectiveVector


@dataclass
class BoState:
    mode: str            # MO | SO
    feature_mode: str    # ensemble | individual
    archive: list = field(default_factory=list)  # (Configuration, ObjectiveVector)

    @property
    def eval_count(self) -> int:
        return len(self.archive)

    def objective_rows(self) -> np.ndarray:
        return np.array([obj.as_tuple() for _, obj in self.archive])


def normalize_objectives(rows: np.ndarray) -> np.ndarray:
    """Per-objective min-max scaling over the archive; zero range maps to 0."""
    rows = np.asarray(rows, dtype=float)
    lo = rows.min(axis=0)
    span = rows.max(axis=0) - lo
    out = np.zeros_like(rows)
    for m in range(rows.shape[1]):
        if span[m] > 0:
            out[:, m] = (rows[:, m] - lo[m]) / span[m]
    return out


def parego_scalarize(normalized: np.ndarray, weights: np.ndarray,
                     rho_aug: float = RHO_AUG) -> np.ndarray:
    """Augmented Chebyshev scalarization (minimization) per archive row."""
    normalized = np.asarray(normalized, dtype=float)
    w = np.asarray(weights, dtype=float)
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("scalarization weights must lie on the simplex")
    weighted = normalized * w
    return weighted.max(axis=1) + rho_aug * weighted.sum(axis=1)


class _Encoder:
    """Maps BO configurations to/from unit-cube design rows for the surrogate."""

    def __init__(self, problem: BoProblem, feature_mode: str):
        self.problem = problem
        self.feature_mode = feature_mode
        self.d_hyper = len(problem.space)
        m = problem.n_filters
        self.d = self.d_hyper + 1 + (m if feature_mode == "ensemble" else 1)

    def encode(self, config: Configuration) -> np.ndarray:
        parts = [to_unit(self.problem.space, config), [config.ffrac]]
        if self.feature_mode == "ensemble":
            parts.append(config.weights)
        else:
            m = self.problem.n_filters
            parts.append([config.filter_index / (m - 1) if m > 1 else 0.0])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def decode(self, row: np.ndarray) -> Configuration:
        row = np.clip(np.asarray(row, dtype=float), 0.0, 1.0)
        config = from_unit(self.problem.space, row[: self.d_hyper])
        ffrac = float(row[self.d_hyper])
        if self.feature_mode == "ensemble":
            return config.with_(ffrac=ffrac,
                                weights=simplex_repair(row[self.d_hyper + 1:]))
        m = self.problem.n_filters
        idx = int(np.floor(row[self.d_hyper + 1] * (m - 1) + 0.5)) if m > 1 else 0
        return config.with_(ffrac=ffrac, filter_index=idx)

    def sample(self, rng: np.random.Generator) -> Configuration:
        config = sample_uniform(self.problem.space, rng)
        ffrac = float(rng.random())
        if self.feature_mode == "ensemble":
            return config.with_(ffrac=ffrac,
                                weights=sample_simplex(self.problem.n_filters, rng))
        return config.with_(ffrac=ffrac,
                            filter_index=int(rng.integers(self.problem.n_filters)))

    def perturb(self, row: np.ndarray, rng: np.random.Generator,
                sd: float = LOCAL_SD) -> np.ndarray:
        return np.clip(row + rng.standard_normal(len(row)) * sd, 0.0, 1.0)


def _scalar_targets(state: BoState, weights: np.ndarray) -> np.ndarray:
    rows = state.objective_rows()
    if state.mode == "SO":
        return rows[:, 0]
    return parego_scalarize(normalize_objectives(rows), weights)


def propose_batch(state: BoState, problem: BoProblem, rng: np.random.Generator,
                  q: int = BATCH_SIZE,
                  forest_params: ForestParams | None = None) -> list[Configuration]:
    """Propose q configurations in parallel, one LCB minimization per slot.

    Each slot draws its own scalarization weights and its own LCB
    kappa ~ Exponential(1) + 0.5, which spreads the batch across the
    explore/exploit axis.
    """
    encoder = _Encoder(problem, state.feature_mode)
    X = np.array([encoder.encode(c) for c, _ in state.archive])
    proposals = []
    for _ in range(q):
        weights = sample_simplex(2, rng) if state.mode == "MO" else np.array([1.0, 0.0])
        targets = _scalar_targets(state, weights)
        forest = fit_forest(X, targets, forest_params, seed=int(rng.integers(2**31)))
        kappa = float(rng.exponential(1.0) + 0.5)
        best = np.argsort(targets, kind="stable")[:10]
        candidates = np.vstack(
            [np.array([encoder.encode(encoder.sample(rng)) for _ in range(N_CANDIDATES_UNIFORM)])]
            + [encoder.perturb(X[best[i % len(best)]], rng)[None, :]
               for i in range(N_CANDIDATES_LOCAL)]
        )
        mean, var = forest.predict_mean_var(candidates)
        lcb = mean - kappa * np.sqrt(var)
        pick = candidates[int(np.argmin(lcb))]
        if len(X) and (np.abs(X - pick).max(axis=1) < 1e-12).any():
            pick = encoder.perturb(pick, rng)  # re-perturb archive duplicates once
        proposals.append(encoder.decode(pick))
    return proposals


def initial_design_size(problem: BoProblem, feature_mode: str) -> int:
    return 4 * _Encoder(problem, feature_mode).d


def run_bo(problem: BoProblem, variant: str, budget: int, rng: np.random.Generator,
           q: int = BATCH_SIZE, init_size: int | None = None,
           forest_params: ForestParams | None = None):
    """Run a BO variant until the evaluation budget is exhausted.

    Returns (trace, report) where report is the list of
    (configuration, objectives) the method puts forward: the Pareto set
    over all evaluations for MO modes, the best-perf incumbent for SO
    modes, and the ffrac-sweep Pareto set for the non-joint variant.
    """
    mode, feature_mode = BO_VARIANTS[variant]
    if mode == "NJ":
        return _run_bo_nj(problem, budget, rng, q=q, init_size=init_size,
                          forest_params=forest_params)
    encoder = _Encoder(problem, feature_mode)
    if init_size is None:
        init_size = 4 * encoder.d
    if budget < init_size:
        raise ValueError(f"budget {budget} below initial design size {init_size}")
    state = BoState(mode=mode, feature_mode=feature_mode)
    trace = Trace()
    for _ in range(init_size):
        config = encoder.sample(rng)
        obj = problem.evaluate(config)
        trace.add(config, obj, 0)
        state.archive.append((config, obj))
    n_rounds = (budget - init_size) // q
    for rnd in range(1, n_rounds + 1):
        for config in propose_batch(state, problem, rng, q=q, forest_params=forest_params):
            obj = problem.evaluate(config)
            trace.add(config, obj, rnd)
            state.archive.append((config, obj))
    return trace, _report(state)


def _report(state: BoState):
    from .metrics import pareto_front

    if state.mode == "SO":
        perf = [obj.perf for _, obj in state.archive]
        return [state.archive[int(np.argmin(perf))]]
    idx = pareto_front([obj.as_tuple() for _, obj in state.archive])
    return [state.archive[i] for i in idx]


def incumbent(archive) -> tuple[Configuration, ObjectiveVector]:
    perf = [obj.perf for _, obj in archive]
    return archive[int(np.argmin(perf))]


def _run_bo_nj(problem: BoProblem, budget: int, rng: np.random.Generator,
               q: int = BATCH_SIZE, init_size: int | None = None,
               forest_params: ForestParams | None = None):
    """Non-joint variant: single-objective FE tuning, then an ffrac sweep.

    The sweep re-evaluates the frozen incumbent at equally spaced
    feature fractions; the report is the Pareto set of sweep points
    plus the incumbent itself.
    """
    from .metrics import pareto_front

    sweep_n = NJ_SWEEP_POINTS
    if budget <= sweep_n:
        raise ValueError(f"budget {budget} leaves no room for the tuning stage")
    so_trace, so_report = run_bo(problem, "BO-SO-FE", budget - sweep_n, rng, q=q,
                                 init_size=init_size, forest_params=forest_params)
    best_config, best_obj = so_report[0]
    trace = Trace()
    trace.records = list(so_trace.records)
    points = [(best_config, best_obj)]
    round_index = max(r["generation"] for r in trace.records) + 1
    for ffrac in np.linspace(0.0, 1.0, sweep_n):
        config = best_config.with_(ffrac=float(ffrac))
        obj = problem.evaluate(config)
        trace.add(config, obj, round_index)
        points.append((config, obj))
    idx = pareto_front([obj.as_tuple() for _, obj in points])
    return trace, [points[i] for i in idx]
