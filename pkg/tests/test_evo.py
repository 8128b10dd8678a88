"""Tests for the NSGA-II engine and its feature-mask operators."""

import itertools

import numpy as np
import pytest

from sparsefront.evo import (
    GA_VARIANTS,
    EvoProblem,
    adapt_strategy,
    crowding_distance,
    dominates,
    score_biased_inclusion,
    filter_ensemble_mutate,
    gaussian_mutate,
    hw_preserving_mutate,
    init_mask,
    nondominated_sort,
    nsga2_step,
    run_nsga2,
    sample_truncated_geometric,
    sbx_crossover,
    truncated_geometric_pmf,
    uniform_crossover,
    Individual,
)
from sparsefront.filters import FilterMatrix
from sparsefront.learners import ObjectiveVector
from sparsefront.space import (
    Configuration,
    ParamDef,
    SearchSpace,
    StrategyParams,
)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def small_space():
    return SearchSpace((
        ParamDef("k", "integer", 1, 20),
        ParamDef("scale", "numeric", 0.0, 1.0),
        ParamDef("kernel", "categorical", levels=("a", "b")),
    ))


def make_filter_matrix(p, seed=0):
    r = np.random.default_rng(seed)
    scores = r.random((p, 4))
    return FilterMatrix(scores, ("f1", "f2", "f3", "f4"))


def make_problem(space, p=12, rho=0.25, fixed=None):
    fm = make_filter_matrix(p)

    def evaluate(config):
        # cheap deterministic objectives: favor sparse masks that hit the
        # first filter column's top features
        mask = config.mask
        hits = float((fm.scores[:, 0] * mask).sum())
        return ObjectiveVector(perf=1.0 / (1.0 + hits), cost=mask.mean())

    return EvoProblem(space=space, n_features=p, evaluate=evaluate,
                      filter_matrix=fm, rho=rho, fixed_hyperparams=fixed)


class TestTruncatedGeometric:
    def test_small_case_exact(self):
        # p=2, rho=0.5: mass proportional to (1, 1/2, 1/4)
        pmf = truncated_geometric_pmf(2, 0.5)
        assert np.allclose(pmf, [4 / 7, 2 / 7, 1 / 7], atol=1e-15)

    def test_sums_to_one_and_decreasing(self):
        pmf = truncated_geometric_pmf(30, 0.2)
        assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(pmf) < 0)

    @pytest.mark.parametrize("rho", [0.0, 1.0, -0.1, 1.5])
    def test_invalid_rho_rejected(self, rho):
        with pytest.raises(ValueError):
            truncated_geometric_pmf(5, rho)

    def test_sampler_matches_pmf(self, rng):
        p, rho, n = 2, 0.5, 100_000
        draws = np.array([sample_truncated_geometric(p, rho, rng) for _ in range(n)])
        freq = np.bincount(draws, minlength=p + 1) / n
        assert np.abs(freq - truncated_geometric_pmf(p, rho)).max() < 0.01


class TestScoreBiasedInclusion:
    def test_uniform_scores_reduce_to_count_rule(self):
        # all ensemble scores 1/2 collapses the rule to (s+1)/(p+2)
        p, s = 10, 3
        pi = score_biased_inclusion(np.full(p, 0.5), s, p)
        assert np.allclose(pi, (s + 1) / (p + 2), atol=1e-15)

    def test_extreme_scores(self):
        pi = score_biased_inclusion(np.array([0.0, 1.0]), 4, 9)
        assert pi[0] == 0.0
        assert pi[1] == pytest.approx(1.0)

    def test_monotone_in_score(self):
        ef = np.linspace(0.0, 1.0, 50)
        pi = score_biased_inclusion(ef, 5, 20)
        assert np.all(np.diff(pi) > 0)

    def test_probabilities_in_unit_interval(self, rng):
        for _ in range(50):
            p = int(rng.integers(2, 40))
            s = int(rng.integers(0, p + 1))
            pi = score_biased_inclusion(rng.random(p), s, p)
            assert np.all(pi >= 0) and np.all(pi <= 1)


class TestInitMask:
    def test_bernoulli_naive_mean_half(self, rng):
        p, n = 40, 2000
        counts = [init_mask("bernoulli_naive", p, rng)[0].sum() for _ in range(n)]
        assert np.mean(counts) == pytest.approx(p / 2, abs=3 * p / 2 / np.sqrt(n))

    def test_geometric_counts_match_pmf(self, rng):
        p, rho, n = 2, 0.5, 60_000
        counts = np.array([init_mask("geometric", p, rng, rho=rho)[0].sum()
                           for _ in range(n)])
        freq = np.bincount(counts, minlength=p + 1) / n
        assert np.abs(freq - truncated_geometric_pmf(p, rho)).max() < 0.015

    def test_uniform_count_covers_all_weights(self, rng):
        p = 5
        seen = {int(init_mask("uniform_count", p, rng)[0].sum()) for _ in range(2000)}
        assert seen == set(range(p + 1))

    def test_filter_ensemble_returns_simplex_weights(self, rng):
        fm = make_filter_matrix(15)
        mask, w = init_mask("filter_ensemble", 15, rng, filter_matrix=fm)
        assert mask.shape == (15,) and set(np.unique(mask)) <= {0, 1}
        assert w.shape == (4,) and np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_filter_ensemble_needs_matrix(self, rng):
        with pytest.raises(ValueError, match="filter matrix"):
            init_mask("filter_ensemble", 10, rng)

    def test_unknown_kind(self, rng):
        with pytest.raises(ValueError, match="unknown"):
            init_mask("bogus", 10, rng)


class TestMaskMutation:
    @pytest.mark.parametrize("p,s,erase", [(100, 20, 0.1), (50, 5, 0.05), (8, 3, 0.25)])
    def test_hw_expected_weight(self, rng, p, s, erase):
        # E[S'] = (1-2*erase)*S + 2*erase*p*(S+1)/(p+2)
        mask = np.zeros(p, dtype=np.int8)
        mask[:s] = 1
        n = 4000
        out = np.array([hw_preserving_mutate(mask, erase, rng).sum() for _ in range(n)])
        expected = (1 - 2 * erase) * s + 2 * erase * p * (s + 1) / (p + 2)
        redraw = (s + 1) / (p + 2)
        var = 2 * erase * (1 - 2 * erase) * (s * (1 - redraw) ** 2 + (p - s) * redraw ** 2) \
            + 2 * erase * p * redraw * (1 - redraw)
        se = np.sqrt(max(var, 1e-9) / n)
        assert abs(out.mean() - expected) < 3 * se + 1e-9

    def test_hw_zero_rate_is_identity(self, rng):
        mask = (rng.random(30) < 0.4).astype(np.int8)
        assert np.array_equal(hw_preserving_mutate(mask, 0.0, rng), mask)

    def test_fe_mutation_prefers_high_scores(self, rng):
        # one filter dominates and scores split cleanly: redrawn bits must
        # concentrate on the high-score half
        p = 40
        scores = np.zeros((p, 4))
        scores[: p // 2, 0] = 1.0
        fm = FilterMatrix(scores, ("f1", "f2", "f3", "f4"))
        w = np.array([1.0, 0.0, 0.0, 0.0])
        mask = np.zeros(p, dtype=np.int8)
        mask[p // 2:] = 1  # start entirely on the low-score half
        total_low = 0
        for _ in range(300):
            out = filter_ensemble_mutate(mask, w, 0.5, fm, rng)
            total_low += int(out[p // 2:].sum())
        # every erased low-half bit has redraw probability 0
        assert total_low < 300 * mask.sum() * 0.5

    def test_fe_mutation_uniform_scores_match_hw(self, rng):
        # EF == 1/2 everywhere makes both mutations share the redraw law
        p, s, n = 30, 10, 5000
        fm = FilterMatrix(np.full((p, 4), 0.5), ("f1", "f2", "f3", "f4"))
        w = np.full(4, 0.25)
        mask = np.zeros(p, dtype=np.int8)
        mask[:s] = 1
        fe = np.mean([filter_ensemble_mutate(mask, w, 0.1, fm, rng).sum()
                      for _ in range(n)])
        hw = np.mean([hw_preserving_mutate(mask, 0.1, rng).sum() for _ in range(n)])
        assert abs(fe - hw) < 0.15


class TestHyperparamOperators:
    def test_sbx_conserves_parent_sum(self, rng):
        x1, x2 = rng.random(200), rng.random(200)
        c1, c2 = sbx_crossover(x1, x2, rng, clip=False)
        assert np.allclose(c1 + c2, x1 + x2, atol=1e-12)

    def test_sbx_children_in_bounds(self, rng):
        for _ in range(100):
            c1, c2 = sbx_crossover(rng.random(10), rng.random(10), rng)
            assert np.all((c1 >= 0) & (c1 <= 1)) and np.all((c2 >= 0) & (c2 <= 1))

    def test_sbx_larger_eta_stays_closer_to_parents(self, rng):
        x1, x2 = np.full(5000, 0.3), np.full(5000, 0.7)
        near, _ = sbx_crossover(x1, x2, rng, eta=20, clip=False)
        far, _ = sbx_crossover(x1, x2, rng, eta=1, clip=False)
        assert np.abs(near - x1).mean() < np.abs(far - x1).mean()

    def test_uniform_crossover_conserves_multiset(self, rng):
        a, b = rng.random(50), rng.random(50)
        ca, cb = uniform_crossover(a, b, rng)
        for i in range(50):
            assert {ca[i], cb[i]} == {a[i], b[i]}

    def test_uniform_crossover_length_mismatch(self, rng):
        with pytest.raises(ValueError, match="equal length"):
            uniform_crossover(np.zeros(3), np.zeros(4), rng)

    def test_gaussian_mean_displacement(self, rng):
        # with p=1 and tiny sigma, E|step| = sigma * sqrt(2/pi)
        sigma = 0.01
        u = np.full(200_000, 0.5)
        out = gaussian_mutate(u, np.full(len(u), sigma), rng, per_gene_p=1.0)
        mean_abs = np.abs(out - u).mean()
        assert mean_abs == pytest.approx(sigma * np.sqrt(2 / np.pi), rel=0.02)

    def test_gaussian_respects_gate(self, rng):
        u = np.full(10_000, 0.5)
        out = gaussian_mutate(u, np.full(len(u), 0.1), rng, per_gene_p=0.1)
        moved = (out != u).mean()
        assert moved == pytest.approx(0.1, abs=0.02)

    def test_adapt_strategy_clamps(self, rng):
        s = StrategyParams(sigma={"a": 10.0, "b": 1e-9}, p_cat=0.99, p_mask=1e-6)
        out = adapt_strategy(s, rng, n_mask_bits=20)
        for v in out.sigma.values():
            assert StrategyParams.SIGMA_LO <= v <= StrategyParams.SIGMA_HI
        assert 1 / 20 <= out.p_cat <= 0.5
        assert 1 / 20 <= out.p_mask <= 0.5


def brute_force_fronts(objs):
    remaining = list(range(len(objs)))
    fronts = []
    while remaining:
        front = [i for i in remaining
                 if not any(dominates(objs[j], objs[i]) for j in remaining)]
        fronts.append(sorted(front))
        remaining = [i for i in remaining if i not in front]
    return fronts


class TestNondominatedSort:
    def test_dominance_examples(self):
        assert dominates((1, 2), (1, 3))
        assert dominates((0, 0), (1, 1))
        assert not dominates((1, 2), (2, 1))
        assert not dominates((1, 2), (1, 2))

    def test_hand_fronts(self):
        objs = [(0.1, 0.9), (0.9, 0.1), (0.5, 0.5), (0.6, 0.6), (0.1, 0.9)]
        fronts = nondominated_sort(objs)
        assert sorted(fronts[0]) == [0, 1, 2, 4]
        assert sorted(fronts[1]) == [3]

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            objs = [tuple(rng.integers(0, 5, size=2)) for _ in range(20)]
            got = [sorted(f) for f in nondominated_sort(objs)]
            assert got == brute_force_fronts(objs)

    def test_single_point(self):
        assert nondominated_sort([(1.0, 2.0)]) == [[0]]


class TestCrowdingDistance:
    def test_three_point_line(self):
        d = crowding_distance([(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)])
        assert d[0] == np.inf and d[2] == np.inf
        assert d[1] == pytest.approx(2.0)

    def test_constant_objective_ignored(self):
        d = crowding_distance([(0.0, 3.0), (0.5, 3.0), (1.0, 3.0)])
        assert d[1] == pytest.approx(1.0)

    def test_closer_point_gets_smaller_distance(self):
        d = crowding_distance([(0.0, 1.0), (0.1, 0.9), (0.5, 0.5), (1.0, 0.0)])
        assert d[1] < d[2]


class TestNsga2:
    @pytest.mark.parametrize("name", ["ablation-3", "GA-MO", "GA-MO-FE"])
    def test_run_counts_and_population(self, small_space, name):
        problem = make_problem(small_space)
        rng = np.random.default_rng(11)
        trace, pop = run_nsga2(problem, name, budget=50, rng=rng, mu=10, lam=4)
        assert len(trace) == 50
        assert len(pop) == 10
        gens = np.array([r["generation"] for r in trace.records])
        assert (gens == 0).sum() == 10
        assert gens.max() == (50 - 10) // 4
        for g in range(1, gens.max() + 1):
            assert (gens == g).sum() == 4

    def test_budget_below_mu_rejected(self, small_space):
        problem = make_problem(small_space)
        with pytest.raises(ValueError, match="budget"):
            run_nsga2(problem, "GA-MO", budget=5, rng=np.random.default_rng(0), mu=10)

    def test_step_preserves_elites(self, small_space):
        problem = make_problem(small_space)
        rng = np.random.default_rng(3)
        from sparsefront.trace import Trace
        _, pop = run_nsga2(problem, "GA-MO", budget=30, rng=rng, mu=10, lam=4)
        objs = [ind.objectives.as_tuple() for ind in pop]
        best_perf = min(o[0] for o in objs)
        best_cost = min(o[1] for o in objs)
        nxt = nsga2_step(pop, problem, GA_VARIANTS["GA-MO"], rng, Trace(), 99, lam=4)
        nxt_objs = [ind.objectives.as_tuple() for ind in nxt]
        assert min(o[0] for o in nxt_objs) <= best_perf
        assert min(o[1] for o in nxt_objs) <= best_cost

    def test_determinism(self, small_space):
        problem = make_problem(small_space)
        runs = []
        for _ in range(2):
            trace, _ = run_nsga2(problem, "GA-MO-FE", budget=40,
                                 rng=np.random.default_rng(21), mu=10, lam=5)
            runs.append([(r["perf"], r["cost"]) for r in trace.records])
        assert runs[0] == runs[1]

    def test_frozen_hyperparams_stay_fixed(self, small_space):
        fixed = {"k": 5, "scale": 0.5, "kernel": "a"}
        problem = make_problem(small_space, fixed=fixed)
        trace, pop = run_nsga2(problem, "GA-MO-FE-NJ", budget=30,
                               rng=np.random.default_rng(2), mu=8, lam=4)
        for r in trace.records:
            assert r["config"].hyperparams == fixed

    def test_frozen_without_values_rejected(self, small_space):
        problem = make_problem(small_space)
        with pytest.raises(ValueError, match="fixed hyperparameters"):
            run_nsga2(problem, "GA-MO-FE-NJ", budget=20,
                      rng=np.random.default_rng(2), mu=8, lam=4)

    def test_variant_roster(self):
        assert set(GA_VARIANTS) == {
            "ablation-1", "ablation-2", "ablation-3", "ablation-4",
            "ablation-5", "ablation-6", "GA-MO", "GA-MO-FE", "GA-MO-FE-NJ",
        }
        assert GA_VARIANTS["GA-MO-FE"].evolve_weights
        assert GA_VARIANTS["GA-MO-FE-NJ"].freeze_hyperparams
        assert GA_VARIANTS["ablation-1"].init_kind == "bernoulli_naive"
