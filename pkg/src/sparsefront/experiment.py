"""Experiment orchestration: nested resampling over the method roster.

For every outer fold the filter matrix is computed on the optimization
split only, each requested method runs against an inner-CV evaluator
with a hard evaluation budget, and the method's reported Pareto set is
retrained on the full optimization split and scored on the held-out
test split via the generalization dominated hypervolume.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .data import Dataset, fetch_openml, load_arff, load_csv, make_synthetic, split_cv
from .evo import GA_VARIANTS, EvoProblem, run_nsga2, init_mask
from .filters import FILTER_NAMES, FilterMatrix, compute_filter_matrix
from .learners import (
    LearnerSpec,
    ObjectiveVector,
    estimate_geom_rate,
    evaluate_config,
    materialize_mask,
    mmce,
    train_predict,
)
from .metrics import generalization_domhv, hypervolume_2d, pareto_front, rank_summary
from .mobo import BO_VARIANTS, BoProblem, run_bo, incumbent
from .space import Configuration, ParamDef, SearchSpace, sample_uniform, validate
from .trace import Trace, config_to_dict

log = logging.getLogger(__name__)

GA_METHODS = set(GA_VARIANTS)
BO_METHODS = set(BO_VARIANTS)
ALL_METHODS = sorted(GA_METHODS | BO_METHODS | {"random-search"})

NJ_PRETUNE_BUDGET = 500


class DatasetSource(BaseModel):
    """Exactly one of csv / arff / openml / synthetic."""

    csv: dict | None = None        # {path, target}
    arff: dict | None = None       # {path}
    openml: dict | None = None     # {did, cache_dir}
    synthetic: dict | None = None  # {n, p, k_informative, noise_sd, seed}

    @model_validator(mode="after")
    def _one_source(self):
        given = [k for k in ("csv", "arff", "openml", "synthetic") if getattr(self, k)]
        if len(given) != 1:
            raise ValueError(f"exactly one dataset source required, got {given}")
        return self


class LearnerConfig(BaseModel):
    kind: str = "knn"
    command: list[str] = Field(default_factory=list)
    defaults: dict = Field(default_factory=dict)


class ParamConfig(BaseModel):
    name: str
    kind: str
    lo: float | None = None
    hi: float | None = None
    levels: list[str] | None = None
    log: bool = False


class ExperimentConfig(BaseModel):
    dataset: DatasetSource
    learner: LearnerConfig = Field(default_factory=LearnerConfig)
    search_space: list[ParamConfig] | None = None
    methods: list[str]
    budget: int = 2000
    outer_folds: int = 10
    inner_folds: int = 10
    stratified: bool = True
    seed: int = 0
    workers: int = 1
    output_dir: str = "results"
    mu: int = 80
    offspring: int = 15
    batch: int = 15
    init_size: int | None = None
    rho: float | None = None
    fixed_hyperparams: dict | None = None
    costs: list[float] | None = None

    @model_validator(mode="after")
    def _check(self):
        if not self.methods:
            raise ValueError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {ALL_METHODS}")
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("folds must be >= 2")
        ga_floor = self.mu if any(m in GA_METHODS for m in self.methods) else 0
        if self.budget < max(ga_floor, 1):
            raise ValueError(f"budget {self.budget} below method minimum")
        return self


def default_search_space(learner_kind: str) -> SearchSpace:
    if learner_kind == "knn":
        return SearchSpace((
            ParamDef("k", "integer", 1, 50),
            ParamDef("distance", "numeric", 1, 100),
            ParamDef("kernel", "categorical", levels=("rectangular", "triangular")),
        ))
    if learner_kind == "decision_tree":
        return SearchSpace((
            ParamDef("max_depth", "integer", 1, 20),
            ParamDef("min_split", "integer", 2, 20),
        ))
    raise ValueError(f"no default search space for learner kind {learner_kind!r}")


def build_search_space(config: ExperimentConfig) -> SearchSpace:
    if not config.search_space:
        return default_search_space(config.learner.kind)
    defs = []
    for pc in config.search_space:
        defs.append(ParamDef(pc.name, pc.kind, pc.lo, pc.hi,
                             tuple(pc.levels) if pc.levels else None, pc.log))
    return SearchSpace(tuple(defs))


def load_dataset(source: DatasetSource, costs=None) -> Dataset:
    if source.csv:
        ds = load_csv(source.csv["path"], source.csv.get("target", "target"))
    elif source.arff:
        ds = load_arff(source.arff["path"])
    elif source.openml:
        ds = fetch_openml(int(source.openml["did"]),
                          source.openml.get("cache_dir", "cache"))
    else:
        s = source.synthetic
        ds, _ = make_synthetic(int(s["n"]), int(s["p"]), int(s["k_informative"]),
                               float(s.get("noise_sd", 0.1)), int(s.get("seed", 0)))
    if costs is not None:
        ds = Dataset(ds.X, ds.y, ds.feature_names, np.asarray(costs, dtype=float))
    return ds


class BudgetedEvaluator:
    """Counts inner-CV evaluations and enforces the per-method budget."""

    def __init__(self, dataset, inner_cv, learner, filter_matrix, budget):
        self.dataset = dataset
        self.inner_cv = inner_cv
        self.learner = learner
        self.filter_matrix = filter_matrix
        self.budget = budget
        self.count = 0

    def __call__(self, config: Configuration) -> ObjectiveVector:
        if self.count >= self.budget:
            raise RuntimeError(f"evaluation budget {self.budget} exceeded")
        self.count += 1
        return evaluate_config(config, self.dataset, self.inner_cv, self.learner,
                               self.filter_matrix)


def run_nj_pretune(d_optim: Dataset, inner_cv, learner: LearnerSpec,
                   filter_matrix: FilterMatrix, space: SearchSpace,
                   rng: np.random.Generator,
                   budget: int = NJ_PRETUNE_BUDGET, batch: int = 15) -> dict:
    """Single-objective BO on the full feature set; returns frozen hyperparams.

    Feature selection is disabled by pinning ffrac = 1, so every
    evaluation uses the full mask.
    """
    evaluator = BudgetedEvaluator(d_optim, inner_cv, learner, filter_matrix, budget)

    def pinned(config: Configuration) -> ObjectiveVector:
        return evaluator(config.with_(ffrac=1.0))

    problem = BoProblem(space=space, n_filters=filter_matrix.m, evaluate=pinned)
    _, report = run_bo(problem, "BO-SO-FE", budget, rng, q=batch)
    best_config, _ = report[0]
    assert evaluator.count <= budget
    return dict(best_config.hyperparams)


def _run_random_search(problem: EvoProblem, budget: int, rng: np.random.Generator):
    """Uniform hyperparameters + geometric-count masks, Pareto over all draws."""
    trace = Trace()
    points = []
    for _ in range(budget):
        config = sample_uniform(problem.space, rng)
        mask, _ = init_mask("geometric", problem.n_features, rng, rho=problem.rho)
        config = config.with_(mask=mask)
        obj = problem.evaluate(config)
        trace.add(config, obj, 0)
        points.append((config, obj))
    idx = pareto_front([obj.as_tuple() for _, obj in points])
    return trace, [points[i] for i in idx]


def run_method(method: str, d_optim: Dataset, inner_cv, learner: LearnerSpec,
               filter_matrix: FilterMatrix, space: SearchSpace, budget: int,
               rng: np.random.Generator, config: ExperimentConfig):
    """Run one method on one outer fold; returns (trace, report, evaluator)."""
    evaluator = BudgetedEvaluator(d_optim, inner_cv, learner, filter_matrix, budget)
    rho = config.rho
    if rho is None and (method in GA_METHODS or method == "random-search"):
        rho = estimate_geom_rate(d_optim, seed=int(rng.integers(2**31)))
    if method in GA_METHODS:
        fixed = None
        if GA_VARIANTS[method].freeze_hyperparams:
            fixed = config.fixed_hyperparams
            if fixed is None:
                fixed = run_nj_pretune(d_optim, inner_cv, learner, filter_matrix,
                                       space, rng, batch=config.batch)
        problem = EvoProblem(space=space, n_features=d_optim.p, evaluate=evaluator,
                             filter_matrix=filter_matrix, rho=rho,
                             fixed_hyperparams=fixed)
        trace, population = run_nsga2(problem, method, budget, rng,
                                      mu=config.mu, lam=config.offspring)
        # GA reports the nondominated set of its final generation only
        points = [(ind.config, ind.objectives) for ind in population]
        idx = pareto_front([obj.as_tuple() for _, obj in points])
        report = [points[i] for i in idx]
    elif method in BO_METHODS:
        problem = BoProblem(space=space, n_filters=filter_matrix.m, evaluate=evaluator)
        trace, report = run_bo(problem, method, budget, rng, q=config.batch,
                               init_size=config.init_size)
    else:
        problem = EvoProblem(space=space, n_features=d_optim.p, evaluate=evaluator,
                             filter_matrix=filter_matrix, rho=rho)
        trace, report = _run_random_search(problem, budget, rng)
    return trace, report, evaluator


def test_objectives(report, dataset: Dataset, optim_idx, test_idx,
                    learner: LearnerSpec, filter_matrix: FilterMatrix):
    """Retrain reported configurations on the full optim split, score on test."""
    out = []
    for config, obj in report:
        mask = materialize_mask(config, filter_matrix, dataset.p)
        pred = train_predict(learner, dataset, mask, optim_idx, test_idx,
                             config.hyperparams)
        out.append((mmce(dataset.y[test_idx], pred), obj.cost))
    return out


def _dataset_label(source: DatasetSource) -> str:
    if source.csv:
        return Path(source.csv["path"]).stem
    if source.arff:
        return Path(source.arff["path"]).stem
    if source.openml:
        return f"openml-{source.openml['did']}"
    s = source.synthetic
    return f"synthetic-{s['n']}x{s['p']}"


def run_experiment(config: ExperimentConfig) -> Path:
    """Full nested-resampling run; writes traces, fronts and summary.csv.

    Returns the output directory.  Per-fold failures are recorded in
    failures.csv and surfaced by a nonzero count in the run manifest.
    """
    out_dir = Path(config.output_dir)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)
    (out_dir / "fronts").mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(config.dataset, config.costs)
    space = build_search_space(config)
    learner = LearnerSpec(config.learner.kind, tuple(config.learner.command),
                          config.learner.defaults)
    label = _dataset_label(config.dataset)
    outer = split_cv(dataset, config.outer_folds, config.stratified, config.seed)
    rows = []
    failures = []
    for fold, (optim_idx, test_idx) in enumerate(outer.iter_train_test()):
        d_optim = dataset.subset(optim_idx)
        filter_matrix = compute_filter_matrix(d_optim)
        inner_cv = split_cv(d_optim, config.inner_folds, config.stratified,
                            seed=config.seed * 10_000 + fold)
        for method in config.methods:
            rng = np.random.default_rng((config.seed, fold, config.methods.index(method)))
            try:
                trace, report, evaluator = run_method(
                    method, d_optim, inner_cv, learner, filter_matrix, space,
                    config.budget, rng, config)
                test_pts = test_objectives(report, dataset, optim_idx, test_idx,
                                           learner, filter_matrix)
                optim_pts = [obj.as_tuple() for _, obj in report]
                domhv_gen = generalization_domhv(optim_pts, test_pts)
            except Exception as exc:  # record and continue with other folds
                log.exception("method %s failed on fold %d", method, fold)
                failures.append((method, fold, repr(exc)))
                continue
            trace.write_jsonl(out_dir / "traces" / f"{method}_fold{fold}.jsonl")
            with open(out_dir / "fronts" / f"{method}_fold{fold}.csv", "w",
                      newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["perf_optim", "cost", "mmce_test", "config"])
                for (c, obj), (t_perf, _) in zip(report, test_pts):
                    writer.writerow([repr(obj.perf), repr(obj.cost), repr(t_perf),
                                     json.dumps(config_to_dict(c), sort_keys=True)])
            rows.append((method, label, config.learner.kind, fold, config.budget,
                         domhv_gen))
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "dataset", "learner", "fold", "budget", "domhv_gen"])
        for row in rows:
            writer.writerow([*row[:5], repr(row[5])])
    if failures:
        with open(out_dir / "failures.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "fold", "error"])
            writer.writerows(failures)
    manifest = {"config": config.model_dump(), "n_results": len(rows),
                "n_failures": len(failures)}
    (out_dir / "experiment.json").write_text(json.dumps(manifest, indent=2))
    return out_dir


def _anytime_curve(trace: Trace, dataset: Dataset, optim_idx, test_idx,
                   learner: LearnerSpec, filter_matrix: FilterMatrix) -> np.ndarray:
    """Piecewise-constant test error of the running-best optim individual."""
    curve = np.empty(len(trace))
    best_perf = np.inf
    current = np.nan
    for i, rec in enumerate(trace.records):
        if rec["perf"] < best_perf:
            best_perf = rec["perf"]
            mask = materialize_mask(rec["config"], filter_matrix, dataset.p)
            pred = train_predict(learner, dataset, mask, optim_idx, test_idx,
                                 rec["config"].hyperparams)
            current = mmce(dataset.y[test_idx], pred)
        curve[i] = current
    return curve


def report(result_dir) -> Path:
    """Emit plot-ready CSVs: anytime curves, fronts and rank summaries."""
    result_dir = Path(result_dir)
    manifest_path = result_dir / "experiment.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{result_dir}: not a result directory (no experiment.json)")
    config = ExperimentConfig.model_validate(json.loads(manifest_path.read_text())["config"])
    summary_path = result_dir / "summary.csv"
    with open(summary_path) as fh:
        summary = list(csv.DictReader(fh))
    if not summary:
        raise ValueError(f"{summary_path}: no results to report")
    methods = sorted({r["method"] for r in summary})

    # rank summary over the (dataset, learner, fold) grid
    grid = {(r["method"], r["dataset"], r["learner"], r["fold"]): float(r["domhv_gen"])
            for r in summary}
    ranks = rank_summary(grid)
    with open(result_dir / "ranks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "avg_rank", "avg_rank_inverted"])
        for m in methods:
            writer.writerow([m, repr(ranks[m]), repr(len(methods) + 1 - ranks[m])])

    # anytime curves require re-scoring running-best individuals on test folds
    dataset = load_dataset(config.dataset, config.costs)
    learner = LearnerSpec(config.learner.kind, tuple(config.learner.command),
                          config.learner.defaults)
    outer = split_cv(dataset, config.outer_folds, config.stratified, config.seed)
    (result_dir / "anytime").mkdir(exist_ok=True)
    for method in methods:
        curves = []
        for fold, (optim_idx, test_idx) in enumerate(outer.iter_train_test()):
            trace_path = result_dir / "traces" / f"{method}_fold{fold}.jsonl"
            if not trace_path.exists():
                continue
            trace = Trace.read_jsonl(trace_path)
            filter_matrix = compute_filter_matrix(dataset.subset(optim_idx))
            curves.append(_anytime_curve(trace, dataset, optim_idx, test_idx,
                                         learner, filter_matrix))
        if not curves:
            raise ValueError(f"no traces found for method {method!r}")
        shortest = min(len(c) for c in curves)
        mean_curve = np.mean([c[:shortest] for c in curves], axis=0)
        with open(result_dir / "anytime" / f"{method}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["eval_index", "mean_mmce_test"])
            for i, v in enumerate(mean_curve):
                writer.writerow([i, repr(float(v))])
    return result_dir
