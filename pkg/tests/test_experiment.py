"""End-to-end tests for nested-resampling orchestration and reporting."""

import csv
import json

import numpy as np
import pytest
from pydantic import ValidationError

from sparsefront.data import make_synthetic, split_cv
from sparsefront.experiment import (
    BudgetedEvaluator,
    DatasetSource,
    ExperimentConfig,
    LearnerConfig,
    ParamConfig,
    build_search_space,
    default_search_space,
    load_dataset,
    report,
    run_experiment,
    run_method,
)
from sparsefront.filters import compute_filter_matrix
from sparsefront.learners import LearnerSpec


def small_config(tmp_path, methods, budget=16, **overrides):
    base = dict(
        dataset=DatasetSource(synthetic={"n": 60, "p": 8, "k_informative": 3,
                                         "noise_sd": 0.2, "seed": 0}),
        learner=LearnerConfig(kind="knn"),
        methods=methods,
        budget=budget,
        outer_folds=2,
        inner_folds=2,
        seed=1,
        output_dir=str(tmp_path / "out"),
        mu=8,
        offspring=4,
        batch=3,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_unknown_method_rejected(self, tmp_path):
        with pytest.raises(ValidationError, match="unknown methods"):
            small_config(tmp_path, ["not-a-method"])

    def test_empty_methods_rejected(self, tmp_path):
        with pytest.raises(ValidationError, match="nonempty"):
            small_config(tmp_path, [])

    def test_folds_floor(self, tmp_path):
        with pytest.raises(ValidationError, match="folds"):
            small_config(tmp_path, ["random-search"], outer_folds=1)

    def test_budget_below_population(self, tmp_path):
        with pytest.raises(ValidationError, match="budget"):
            small_config(tmp_path, ["GA-MO"], budget=5, mu=8)

    def test_two_dataset_sources_rejected(self):
        with pytest.raises(ValidationError, match="exactly one"):
            DatasetSource(csv={"path": "a.csv"}, synthetic={"n": 60, "p": 4,
                                                            "k_informative": 2})


class TestSearchSpace:
    def test_default_knn(self):
        space = default_search_space("knn")
        assert [p.name for p in space] == ["k", "distance", "kernel"]

    def test_default_tree(self):
        assert [p.name for p in default_search_space("decision_tree")] == \
            ["max_depth", "min_split"]

    def test_unknown_learner(self):
        with pytest.raises(ValueError, match="no default search space"):
            default_search_space("mystery")

    def test_custom_space_overrides_default(self, tmp_path):
        config = small_config(
            tmp_path, ["random-search"],
            search_space=[ParamConfig(name="k", kind="integer", lo=1, hi=5)])
        space = build_search_space(config)
        params = list(space)
        assert len(params) == 1 and params[0].hi == 5


class TestLoadDataset:
    def test_synthetic_with_costs(self):
        source = DatasetSource(synthetic={"n": 30, "p": 4, "k_informative": 2,
                                          "seed": 3})
        ds = load_dataset(source, costs=[0.1, 0.2, 0.3, 0.4])
        assert ds.n == 30 and ds.p == 4
        assert np.allclose(ds.costs, [0.1, 0.2, 0.3, 0.4])


class TestBudgetedEvaluator:
    def test_budget_enforced(self):
        ds, _ = make_synthetic(40, 5, 2, 0.1, 0)
        cv = split_cv(ds, 2, True, 0)
        fm = compute_filter_matrix(ds)
        evaluator = BudgetedEvaluator(ds, cv, LearnerSpec("knn"), fm, budget=2)
        from sparsefront.space import Configuration
        config = Configuration(hyperparams={"k": 3, "distance": 2.0,
                                            "kernel": "rectangular"},
                               mask=np.ones(5, dtype=np.int8))
        evaluator(config)
        evaluator(config)
        assert evaluator.count == 2
        with pytest.raises(RuntimeError, match="budget"):
            evaluator(config)


class TestRunExperiment:
    def test_outputs_and_row_count(self, tmp_path):
        config = small_config(tmp_path, ["ablation-3", "random-search"])
        out = run_experiment(config)
        with open(out / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4  # 2 methods x 2 folds
        assert {r["method"] for r in rows} == {"ablation-3", "random-search"}
        for r in rows:
            assert 0.0 <= float(r["domhv_gen"]) <= 1.0
            assert r["dataset"] == "synthetic-60x8"
        for method in config.methods:
            for fold in range(2):
                assert (out / "traces" / f"{method}_fold{fold}.jsonl").exists()
                assert (out / "fronts" / f"{method}_fold{fold}.csv").exists()
        manifest = json.loads((out / "experiment.json").read_text())
        assert manifest["n_results"] == 4 and manifest["n_failures"] == 0

    def test_reruns_are_byte_identical(self, tmp_path):
        out1 = run_experiment(small_config(tmp_path / "a", ["ablation-3"]))
        out2 = run_experiment(small_config(tmp_path / "b", ["ablation-3"]))
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
        for fold in range(2):
            name = f"ablation-3_fold{fold}.jsonl"
            assert (out1 / "traces" / name).read_bytes() == \
                (out2 / "traces" / name).read_bytes()

    def test_trace_budget_respected(self, tmp_path):
        config = small_config(tmp_path, ["ablation-3"])
        out = run_experiment(config)
        for fold in range(2):
            lines = (out / "traces" / f"ablation-3_fold{fold}.jsonl").read_text().strip()
            assert len(lines.splitlines()) == config.budget

    def test_method_failure_recorded(self, tmp_path):
        # BO's initial design (4x design dimension) exceeds this budget, so
        # the method fails on every fold while the GA still completes
        config = small_config(tmp_path, ["ablation-3", "BO-MO-FE"], budget=16)
        out = run_experiment(config)
        with open(out / "failures.csv") as fh:
            failures = list(csv.DictReader(fh))
        assert len(failures) == 2
        assert all(f["method"] == "BO-MO-FE" for f in failures)
        manifest = json.loads((out / "experiment.json").read_text())
        assert manifest["n_results"] == 2 and manifest["n_failures"] == 2


class TestRunMethodNj:
    def test_frozen_variant_uses_given_hyperparams(self, tmp_path):
        ds, _ = make_synthetic(60, 8, 3, 0.2, 0)
        cv = split_cv(ds, 2, True, 0)
        fm = compute_filter_matrix(ds)
        fixed = {"k": 3, "distance": 2.0, "kernel": "rectangular"}
        config = small_config(tmp_path, ["GA-MO-FE-NJ"], fixed_hyperparams=fixed)
        trace, rep, evaluator = run_method(
            "GA-MO-FE-NJ", ds, cv, LearnerSpec("knn"), fm,
            build_search_space(config), 16, np.random.default_rng(5), config)
        assert evaluator.count == 16
        for c, _ in rep:
            assert c.hyperparams == fixed


class TestReport:
    def test_report_outputs(self, tmp_path):
        config = small_config(tmp_path, ["ablation-3", "random-search"])
        out = run_experiment(config)
        report(out)
        with open(out / "ranks.csv") as fh:
            ranks = {r["method"]: float(r["avg_rank"]) for r in csv.DictReader(fh)}
        assert set(ranks) == {"ablation-3", "random-search"}
        # two methods: average ranks pair up around 1.5
        assert sum(ranks.values()) == pytest.approx(3.0)
        for method in config.methods:
            path = out / "anytime" / f"{method}.csv"
            with open(path) as fh:
                rows = list(csv.DictReader(fh))
            assert len(rows) == config.budget
            values = [float(r["mean_mmce_test"]) for r in rows]
            assert all(0.0 <= v <= 1.0 for v in values)

    def test_report_rejects_non_result_dir(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="experiment.json"):
            report(tmp_path)
