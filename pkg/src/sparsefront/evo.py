"""NSGA-II engine with feature-mask-aware initialization and mutation.

The genome is a mixed vector: hyperparameters (mutated/recombined per
type), an explicit feature mask, optionally a filter-ensemble weight
vector, and self-adapted strategy parameters.  The mask operators are
the point of this module: geometric-count initialization covers the
sparsity objective evenly, and the mutation variants approximately
preserve Hamming weight, optionally biased by filter-ensemble scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filters import FilterMatrix, ensemble_score
from .learners import ObjectiveVector
from .space import (
    CATEGORICAL,
    Configuration,
    SearchSpace,
    StrategyParams,
    sample_simplex,
    sample_uniform,
    simplex_repair,
    to_unit,
    from_unit,
)
from .trace import Trace

MU_DEFAULT = 80
LAMBDA_DEFAULT = 15
P_CROSSOVER = 0.7
P_MUTATION = 0.3
P_GENE = 0.1
SBX_ETA = 5.0
SIGMA_INIT = 0.1
W_PERTURB_SD = 0.05


@dataclass(frozen=True)
class GaVariant:
    name: str
    init_kind: str           # bernoulli_naive | uniform_count | geometric | filter_ensemble
    mask_mutation: str       # bitflip | hw_preserving | filter_ensemble
    evolve_weights: bool = False
    freeze_hyperparams: bool = False


GA_VARIANTS = {
    "ablation-1": GaVariant("ablation-1", "bernoulli_naive", "bitflip"),
    "ablation-2": GaVariant("ablation-2", "uniform_count", "bitflip"),
    "ablation-3": GaVariant("ablation-3", "geometric", "bitflip"),
    "ablation-4": GaVariant("ablation-4", "geometric", "hw_preserving"),
    "ablation-5": GaVariant("ablation-5", "filter_ensemble", "hw_preserving"),
    "ablation-6": GaVariant("ablation-6", "filter_ensemble", "filter_ensemble",
                            evolve_weights=True),
    "GA-MO": GaVariant("GA-MO", "filter_ensemble", "hw_preserving"),
    "GA-MO-FE": GaVariant("GA-MO-FE", "filter_ensemble", "filter_ensemble",
                          evolve_weights=True),
    "GA-MO-FE-NJ": GaVariant("GA-MO-FE-NJ", "filter_ensemble", "filter_ensemble",
                             evolve_weights=True, freeze_hyperparams=True),
}


@dataclass(frozen=True)
class EvoProblem:
    """Everything the GA needs: the space, feature count, evaluator, filters."""

    space: SearchSpace
    n_features: int
    evaluate: callable                     # Configuration -> ObjectiveVector
    filter_matrix: FilterMatrix | None = None
    rho: float = 0.25                      # geometric success probability
    fixed_hyperparams: dict | None = None  # NJ variants


@dataclass
class Individual:
    config: Configuration
    objectives: ObjectiveVector | None = None


# ---------------------------------------------------------------------------
# mask sampling and mutation

def truncated_geometric_pmf(p: int, rho: float) -> np.ndarray:
    """P(S = s) proportional to (1-rho)^s * rho for s in 0..p."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    mass = (1.0 - rho) ** np.arange(p + 1) * rho
    return mass / mass.sum()


def sample_truncated_geometric(p: int, rho: float, rng: np.random.Generator) -> int:
    return int(rng.choice(p + 1, p=truncated_geometric_pmf(p, rho)))


def _uniform_weight_mask(p: int, s: int, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros(p, dtype=np.int8)
    if s:
        mask[rng.choice(p, size=s, replace=False)] = 1
    return mask


def score_biased_inclusion(ef: np.ndarray, s: int, p: int) -> np.ndarray:
    """Per-bit inclusion probability from ensemble scores and target weight."""
    ef = np.asarray(ef, dtype=float)
    return ef * (s + 1) / (ef * s + (1.0 - ef) * (p - s) + 1.0)


def init_mask(kind: str, p: int, rng: np.random.Generator, rho: float = 0.25,
              filter_matrix: FilterMatrix | None = None):
    """Sample an initial feature mask.

    Returns (mask, weights); weights is None except for the
    filter_ensemble kind, which draws its own uniform simplex vector.
    """
    if kind == "bernoulli_naive":
        return (rng.random(p) < 0.5).astype(np.int8), None
    if kind == "uniform_count":
        return _uniform_weight_mask(p, int(rng.integers(p + 1)), rng), None
    if kind == "geometric":
        return _uniform_weight_mask(p, sample_truncated_geometric(p, rho, rng), rng), None
    if kind == "filter_ensemble":
        if filter_matrix is None:
            raise ValueError("filter_ensemble initialization requires a filter matrix")
        s = sample_truncated_geometric(p, rho, rng)
        w = sample_simplex(filter_matrix.m, rng)
        pi = score_biased_inclusion(ensemble_score(filter_matrix, w), s, p)
        return (rng.random(p) < pi).astype(np.int8), w
    raise ValueError(f"unknown mask initialization {kind!r}")


def hw_preserving_mutate(mask: np.ndarray, erase_rate: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Erase bits with probability 2*erase_rate, redraw at (S+1)/(p+2).

    S is the original mask's Hamming weight, so the expected weight is
    approximately preserved.
    """
    mask = np.asarray(mask, dtype=np.int8)
    p = len(mask)
    s = int(mask.sum())
    redraw_p = (s + 1) / (p + 2)
    erased = rng.random(p) < 2.0 * erase_rate
    out = mask.copy()
    out[erased] = (rng.random(erased.sum()) < redraw_p).astype(np.int8)
    return out


def filter_ensemble_mutate(mask: np.ndarray, weights: np.ndarray, erase_rate: float,
                           filter_matrix: FilterMatrix,
                           rng: np.random.Generator) -> np.ndarray:
    """Hamming-weight-preserving mutation biased by ensemble scores.

    Erased bits redraw with the same per-bit probabilities used for
    filter-ensemble initialization, at the original weight S.
    """
    mask = np.asarray(mask, dtype=np.int8)
    p = len(mask)
    pi = score_biased_inclusion(ensemble_score(filter_matrix, weights), int(mask.sum()), p)
    erased = rng.random(p) < 2.0 * erase_rate
    out = mask.copy()
    out[erased] = (rng.random(erased.sum()) < pi[erased]).astype(np.int8)
    return out


def _bitflip_mutate(mask: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    flips = rng.random(len(mask)) < rate
    return np.where(flips, 1 - mask, mask).astype(np.int8)


# ---------------------------------------------------------------------------
# hyperparameter operators (unit-cube coordinates)

def sbx_crossover(x1: np.ndarray, x2: np.ndarray, rng: np.random.Generator,
                  eta: float = SBX_ETA, clip: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover in [0, 1]^d; children clipped to bounds.

    Before clipping the children conserve the parent sum per coordinate
    (c1 + c2 == x1 + x2); pass clip=False to observe the raw children.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    u = rng.random(len(x1))
    beta = np.where(u <= 0.5,
                    (2.0 * u) ** (1.0 / (eta + 1.0)),
                    (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)))
    c1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2)
    c2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2)
    if clip:
        c1 = np.clip(c1, 0.0, 1.0)
        c2 = np.clip(c2, 0.0, 1.0)
    return c1, c2


def uniform_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                      swap_p: float = 0.5):
    """Position-wise swap with probability swap_p; pairwise values conserved."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) != len(b):
        raise ValueError("parents must have equal length")
    swap = rng.random(len(a)) < swap_p
    return np.where(swap, b, a), np.where(swap, a, b)


def gaussian_mutate(u: np.ndarray, sigma: np.ndarray, rng: np.random.Generator,
                    per_gene_p: float = P_GENE) -> np.ndarray:
    """Per-gene Gaussian step in unit coordinates, clipped to [0, 1]."""
    u = np.asarray(u, dtype=float)
    hit = rng.random(len(u)) < per_gene_p
    step = rng.standard_normal(len(u)) * np.asarray(sigma, dtype=float)
    return np.clip(np.where(hit, u + step, u), 0.0, 1.0)


def _logit(x):
    return math.log(x / (1.0 - x))


def _inv_logit(x):
    return 1.0 / (1.0 + math.exp(-x))


def adapt_strategy(strategy: StrategyParams, rng: np.random.Generator,
                   n_mask_bits: int) -> StrategyParams:
    """Log-normal self-adaptation of step sizes, logit-normal for rates."""
    d = max(len(strategy.sigma) + 2, 1)
    tau = 1.0 / math.sqrt(2.0 * d)
    sigma = {k: v * math.exp(tau * rng.standard_normal()) for k, v in strategy.sigma.items()}
    p_cat = _inv_logit(_logit(strategy.p_cat) + tau * rng.standard_normal())
    p_mask = _inv_logit(_logit(strategy.p_mask) + tau * rng.standard_normal())
    return StrategyParams(sigma=sigma, p_cat=p_cat, p_mask=p_mask).clamped(n_mask_bits)


# ---------------------------------------------------------------------------
# NSGA-II machinery

def dominates(a, b) -> bool:
    """Weak dominance: a <= b componentwise and a != b."""
    return all(x <= y for x, y in zip(a, b)) and tuple(a) != tuple(b)


def nondominated_sort(objectives) -> list[list[int]]:
    """Fast nondominated sorting into fronts of indices (front 1 first)."""
    n = len(objectives)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = np.zeros(n, dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(objectives[i], objectives[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(objectives[j], objectives[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = [[i for i in range(n) if counts[i] == 0]]
    while True:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        if not nxt:
            return fronts
        fronts.append(sorted(nxt))


def crowding_distance(objectives) -> np.ndarray:
    """Crowding distances within one front; boundary points get +inf."""
    objs = np.asarray(objectives, dtype=float)
    n = len(objs)
    dist = np.zeros(n)
    for m in range(objs.shape[1]):
        order = np.argsort(objs[:, m], kind="stable")
        dist[order[0]] = dist[order[-1]] = np.inf
        span = objs[order[-1], m] - objs[order[0], m]
        if span <= 0:
            continue
        gaps = (objs[order[2:], m] - objs[order[:-2], m]) / span
        dist[order[1:-1]] += gaps
    return dist


def _rank_and_crowding(individuals):
    objs = [ind.objectives.as_tuple() for ind in individuals]
    fronts = nondominated_sort(objs)
    rank = np.empty(len(objs), dtype=int)
    crowd = np.empty(len(objs))
    for r, front in enumerate(fronts):
        rank[front] = r
        crowd[front] = crowding_distance([objs[i] for i in front])
    return fronts, rank, crowd


def _tournament(rank, crowd, rng) -> int:
    i, j = rng.integers(len(rank)), rng.integers(len(rank))
    if rank[i] != rank[j]:
        return int(i if rank[i] < rank[j] else j)
    if crowd[i] != crowd[j]:
        return int(i if crowd[i] > crowd[j] else j)
    return int(i)


def _init_strategy(space: SearchSpace, n_mask_bits: int) -> StrategyParams:
    sigma = {p.name: SIGMA_INIT for p in space if p.kind != CATEGORICAL}
    return StrategyParams(sigma=sigma, p_cat=P_GENE, p_mask=P_GENE).clamped(n_mask_bits)


def _crossover(c1: Configuration, c2: Configuration, problem: EvoProblem,
               variant: GaVariant, rng) -> tuple[Configuration, Configuration]:
    space = problem.space
    if not variant.freeze_hyperparams and len(space):
        u1, u2 = to_unit(space, c1), to_unit(space, c2)
        numeric = np.array([p.kind != CATEGORICAL for p in space])
        if numeric.any():
            s1, s2 = sbx_crossover(u1[numeric], u2[numeric], rng)
            u1[numeric], u2[numeric] = s1, s2
        if (~numeric).any():
            s1, s2 = uniform_crossover(u1[~numeric], u2[~numeric], rng)
            u1[~numeric], u2[~numeric] = s1, s2
        c1 = from_unit(space, u1, like=c1)
        c2 = from_unit(space, u2, like=c2)
    m1, m2 = uniform_crossover(c1.mask, c2.mask, rng)
    c1, c2 = c1.with_(mask=m1), c2.with_(mask=m2)
    if variant.evolve_weights:
        w1, w2 = sbx_crossover(c1.weights, c2.weights, rng)
        c1 = c1.with_(weights=simplex_repair(w1))
        c2 = c2.with_(weights=simplex_repair(w2))
    # strategy parameters recombine by arithmetic mean
    s1, s2 = c1.strategy, c2.strategy
    mean = StrategyParams(
        sigma={k: 0.5 * (s1.sigma[k] + s2.sigma[k]) for k in s1.sigma},
        p_cat=0.5 * (s1.p_cat + s2.p_cat),
        p_mask=0.5 * (s1.p_mask + s2.p_mask),
    )
    return c1.with_(strategy=mean), c2.with_(strategy=mean)


def _mutate(config: Configuration, problem: EvoProblem, variant: GaVariant,
            rng) -> Configuration:
    space = problem.space
    strategy = adapt_strategy(config.strategy, rng, problem.n_features)
    config = config.with_(strategy=strategy)
    if not variant.freeze_hyperparams and len(space):
        u = to_unit(space, config)
        for i, p in enumerate(space):
            if p.kind == CATEGORICAL:
                if rng.random() < strategy.p_cat:
                    u[i] = rng.integers(len(p.levels)) / (len(p.levels) - 1)
            else:
                if rng.random() < P_GENE:
                    u[i] = np.clip(u[i] + rng.standard_normal() * strategy.sigma[p.name],
                                   0.0, 1.0)
        config = from_unit(space, u, like=config)
    if variant.evolve_weights:
        w = simplex_repair(config.weights + rng.standard_normal(len(config.weights)) * W_PERTURB_SD)
        config = config.with_(weights=w)
    if variant.mask_mutation == "bitflip":
        mask = _bitflip_mutate(config.mask, strategy.p_mask, rng)
    elif variant.mask_mutation == "hw_preserving":
        mask = hw_preserving_mutate(config.mask, strategy.p_mask, rng)
    else:
        mask = filter_ensemble_mutate(config.mask, config.weights, strategy.p_mask,
                                      problem.filter_matrix, rng)
    return config.with_(mask=mask)


def _spawn(problem: EvoProblem, variant: GaVariant, rng) -> Configuration:
    if variant.freeze_hyperparams:
        if problem.fixed_hyperparams is None:
            raise ValueError(f"{variant.name} requires fixed hyperparameters")
        config = Configuration(hyperparams=dict(problem.fixed_hyperparams))
    else:
        config = sample_uniform(problem.space, rng)
    mask, w = init_mask(variant.init_kind, problem.n_features, rng, rho=problem.rho,
                        filter_matrix=problem.filter_matrix)
    if variant.evolve_weights:
        if w is None:
            w = sample_simplex(problem.filter_matrix.m, rng)
    else:
        w = None
    return config.with_(mask=mask, weights=w,
                        strategy=_init_strategy(problem.space, problem.n_features))


def nsga2_step(population: list[Individual], problem: EvoProblem, variant: GaVariant,
               rng: np.random.Generator, trace: Trace, generation: int,
               lam: int = LAMBDA_DEFAULT, p_crossover: float = P_CROSSOVER,
               p_mutation: float = P_MUTATION) -> list[Individual]:
    """One generation: tournament selection, crossover, mutation, survival."""
    mu = len(population)
    _, rank, crowd = _rank_and_crowding(population)
    children: list[Configuration] = []
    while len(children) < lam:
        a = population[_tournament(rank, crowd, rng)].config
        b = population[_tournament(rank, crowd, rng)].config
        if rng.random() < p_crossover:
            a, b = _crossover(a, b, problem, variant, rng)
        children.extend([a, b])
    children = children[:lam]
    offspring = []
    for child in children:
        if rng.random() < p_mutation:
            child = _mutate(child, problem, variant, rng)
        obj = problem.evaluate(child)
        trace.add(child, obj, generation)
        offspring.append(Individual(child, obj))
    pool = population + offspring
    fronts, _, _ = _rank_and_crowding(pool)
    survivors: list[Individual] = []
    for front in fronts:
        if len(survivors) + len(front) <= mu:
            survivors.extend(pool[i] for i in front)
        else:
            crowd_f = crowding_distance([pool[i].objectives.as_tuple() for i in front])
            keep = np.argsort(-crowd_f, kind="stable")[: mu - len(survivors)]
            survivors.extend(pool[front[i]] for i in sorted(keep))
            break
    return survivors


def run_nsga2(problem: EvoProblem, variant: str | GaVariant, budget: int,
              rng: np.random.Generator, mu: int = MU_DEFAULT,
              lam: int = LAMBDA_DEFAULT) -> tuple[Trace, list[Individual]]:
    """Run the GA until the evaluation budget is exhausted.

    Returns the full trace and the final population (whose nondominated
    set is the method's reported Pareto set).
    """
    if isinstance(variant, str):
        variant = GA_VARIANTS[variant]
    if budget < mu:
        raise ValueError(f"budget {budget} cannot evaluate the initial population of {mu}")
    trace = Trace()
    population = []
    for _ in range(mu):
        config = _spawn(problem, variant, rng)
        obj = problem.evaluate(config)
        trace.add(config, obj, 0)
        population.append(Individual(config, obj))
    n_generations = (budget - mu) // lam
    for gen in range(1, n_generations + 1):
        population = nsga2_step(population, problem, variant, rng, trace, gen, lam=lam)
    return trace, population
