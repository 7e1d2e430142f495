"""Profile search strategies.

The main strategy is a randomized neighborhood-shrinking local search over
per-layer sensitivity coefficients c in [0,1]^L: each candidate c is turned
into a profile by running the constrained solver on the quadratic error
table for c, so every profile the evaluator ever sees satisfies the time
budget by construction. Two competitors mutate profiles directly in
grid-index space: a local search with the identical shrinking schedule, and
a genetic algorithm.

All randomness flows through SplitMix64(seed); fixed seed means identical
traces, with or without caching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DiscreteTimings,
    Profile,
    SkipList,
    SparsityGrid,
    TimeBudget,
    TimingTable,
    discretize,
)
from .dp import DpSolution, solve_dp
from .error_models import SensitivityVector, quadratic_errors
from .evaluators import EvalCache, Evaluator
from .exceptions import EvaluationError, InfeasibleError, ValidationError
from .rng import SplitMix64

TRACE_CSV_HEADER = "eval_index,strategy,d_or_generation,candidate_score,best_score"
DEFAULT_RESAMPLE_CAP = 10_000


@dataclass(frozen=True)
class SearchParams:
    """Knobs shared by the coefficient and direct searches.

    k is the trial count per neighborhood size (and the phase-1 sample
    count); shrink_fraction sets the initial neighborhood ceil(frac * L).
    early_stop switches a neighborhood from exactly-k trials to
    run-until-k-consecutive-failures. eval_budget caps invocations that
    reach the underlying evaluator (cache hits are free); the search stops
    gracefully when it is spent.
    """

    k: int = 100
    shrink_fraction: float = 0.1
    seed: int = 0
    eval_budget: int | None = None
    early_stop: bool = False
    buckets: int = 10_000
    use_cache: bool = True
    resample_cap: int = DEFAULT_RESAMPLE_CAP

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if not 0.0 < self.shrink_fraction <= 1.0:
            raise ValidationError("shrink_fraction must lie in (0, 1]")
        if self.buckets < 1 or self.resample_cap < 1:
            raise ValidationError("buckets and resample_cap must be >= 1")
        if self.eval_budget is not None and self.eval_budget < 1:
            raise ValidationError("eval_budget must be >= 1 when set")


@dataclass(frozen=True)
class GaParams:
    """Genetic-algorithm knobs. The replacement scheme is generational with
    a single elite; stopping is by generations, eval_budget, or both
    (whichever hits first).  With only eval_budget set, the run also ends
    after twice the generations that would spend the budget without cache
    hits, so that small search spaces cannot keep it alive forever."""

    population: int = 50
    tournament: int = 2
    crossover_p: float = 0.5
    mutation_p: float = 0.1
    seed: int = 0
    eval_budget: int | None = None
    generations: int | None = 20
    buckets: int = 10_000
    use_cache: bool = True
    resample_cap: int = DEFAULT_RESAMPLE_CAP

    def __post_init__(self):
        if self.population < 2 or self.tournament < 1:
            raise ValidationError("population must be >= 2 and tournament >= 1")
        if not 0.0 <= self.crossover_p <= 1.0 or not 0.0 <= self.mutation_p <= 1.0:
            raise ValidationError("crossover_p and mutation_p must lie in [0, 1]")
        if self.generations is None and self.eval_budget is None:
            raise ValidationError("genetic search needs generations or eval_budget")
        if self.buckets < 1 or self.resample_cap < 1:
            raise ValidationError("buckets and resample_cap must be >= 1")
        if self.eval_budget is not None and self.eval_budget < 1:
            raise ValidationError("eval_budget must be >= 1 when set")


@dataclass(frozen=True)
class TraceRow:
    eval_index: int
    d_or_generation: int
    candidate_score: float
    best_score: float


@dataclass
class SearchTrace:
    """Per-candidate record of a search run.

    eval_index counts candidates in submission order (1-based, strictly
    increasing; cache hits included). d_or_generation is the neighborhood
    size for the local searches (L during the initial uniform phase) and
    the generation number for the genetic algorithm (0 = initial
    population).
    """

    strategy: str
    rows: list[TraceRow] = field(default_factory=list)
    final_c: SensitivityVector | None = None
    final_profile: Profile | None = None
    underlying_evals: int = 0

    def add(self, eval_index: int, d: int, candidate_score: float, best_score: float) -> None:
        self.rows.append(TraceRow(eval_index, d, candidate_score, best_score))

    @property
    def best_score(self) -> float:
        if not self.rows:
            raise ValidationError("empty trace has no best score")
        return self.rows[-1].best_score

    def to_csv(self) -> str:
        lines = [TRACE_CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.eval_index},{self.strategy},{r.d_or_generation},"
                f"{r.candidate_score!r},{r.best_score!r}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


def neighborhood_size(shrink_fraction: float, num_layers: int) -> int:
    # guard against 0.1 * 30 = 3.0000000000000004 rounding the ceiling up
    return min(num_layers, max(1, math.ceil(shrink_fraction * num_layers - 1e-9)))


def nominal_evaluations(params: SearchParams, num_layers: int) -> int:
    """Candidate count of a full (non-early-stopped) shrinking-schedule run:
    1 + k in phase 1, then k per neighborhood size."""
    return 1 + params.k + params.k * neighborhood_size(params.shrink_fraction, num_layers)


class _Exhausted(Exception):
    """Internal: the evaluation budget is spent; unwind and return the best."""


class _Meter:
    """Budget gate in front of the (optionally cached) evaluator."""

    def __init__(self, evaluator: Evaluator, use_cache: bool, eval_budget: int | None):
        self.cache = EvalCache(inner=evaluator) if use_cache else None
        self._raw = evaluator
        self.budget = eval_budget
        self._raw_calls = 0

    def score(self, profile: Profile) -> float:
        if self.cache is not None:
            if (
                self.budget is not None
                and not self.cache.contains(profile)
                and self.cache.underlying_calls >= self.budget
            ):
                raise _Exhausted
            return self.cache.evaluate(profile)
        if self.budget is not None and self._raw_calls >= self.budget:
            raise _Exhausted
        self._raw_calls += 1
        return self._raw.evaluate(profile)

    @property
    def underlying_calls(self) -> int:
        return self.cache.underlying_calls if self.cache is not None else self._raw_calls


def spdy_search(
    evaluator: Evaluator,
    timing: TimingTable,
    budget: TimeBudget,
    grid: SparsityGrid,
    skip: SkipList | None = None,
    params: SearchParams | None = None,
) -> tuple[SensitivityVector, DpSolution, SearchTrace]:
    """Neighborhood-shrinking search over sensitivity coefficients.

    Phase 1 scores one initial uniform sample plus k competitors; phase 2
    walks d from ceil(shrink_fraction * L) down to 1, resampling d
    uniformly-chosen coordinates of the incumbent per trial and accepting
    strict improvements only.
    """
    params = params if params is not None else SearchParams()
    skip = skip if skip is not None else SkipList.none()
    num_layers = timing.num_layers
    dt = discretize(timing, budget, params.buckets)
    rng = SplitMix64(params.seed)
    meter = _Meter(evaluator, params.use_cache, params.eval_budget)
    trace = SearchTrace(strategy="spdy")
    counter = 0
    best_c: list[float] | None = None
    best_sol: DpSolution | None = None
    best_score = math.inf

    def assess(cvec: list[float]) -> tuple[float, DpSolution]:
        nonlocal counter
        table = quadratic_errors(SensitivityVector(coeffs=np.array(cvec)), grid)
        sol = solve_dp(table, dt, skip, params.buckets)
        score = meter.score(sol.profile)
        counter += 1
        return score, sol

    try:
        for trial in range(1 + params.k):
            c = [rng.random() for _ in range(num_layers)]
            score, sol = assess(c)
            if score < best_score:
                best_score, best_sol, best_c = score, sol, c
            trace.add(counter, num_layers, score, best_score)
        for d in range(neighborhood_size(params.shrink_fraction, num_layers), 0, -1):
            trials = fails = 0
            while (fails if params.early_stop else trials) < params.k:
                trials += 1
                c = list(best_c)
                for idx in rng.sample_indices(num_layers, d):
                    c[idx] = rng.random()
                score, sol = assess(c)
                if score < best_score:
                    best_score, best_sol, best_c = score, sol, c
                    fails = 0
                else:
                    fails += 1
                trace.add(counter, d, score, best_score)
    except _Exhausted:
        pass
    except EvaluationError as e:
        e.partial_trace = trace
        raise
    trace.final_c = SensitivityVector(coeffs=np.array(best_c))
    trace.final_profile = best_sol.profile
    trace.underlying_evals = meter.underlying_calls
    return trace.final_c, best_sol, trace


class _ProfileSampler:
    """Feasible-profile sampling and mutation in grid-index space."""

    def __init__(self, rng: SplitMix64, dt: DiscreteTimings, skip: SkipList, num_levels: int, cap: int):
        self.rng = rng
        self.buckets = dt.buckets
        self.budget = dt.bucket_count
        self.skip = skip.pinned_dense
        self.num_layers = dt.buckets.shape[0]
        self.num_levels = num_levels
        self.cap = cap

    def feasible(self, choices: list[int]) -> bool:
        total = 0
        for layer, i in enumerate(choices):
            total += int(self.buckets[layer, i])
        return total <= self.budget

    def _gene(self, layer: int) -> int:
        return 0 if layer in self.skip else self.rng.below(self.num_levels)

    def random_profile(self) -> list[int]:
        for _ in range(self.cap):
            choices = [self._gene(layer) for layer in range(self.num_layers)]
            if self.feasible(choices):
                return choices
        raise InfeasibleError(
            f"no budget-satisfying profile found in {self.cap} uniform samples"
        )

    def mutate(self, base: list[int], d: int) -> list[int]:
        for _ in range(self.cap):
            choices = list(base)
            for idx in self.rng.sample_indices(self.num_layers, d):
                choices[idx] = self._gene(idx)
            if self.feasible(choices):
                return choices
        raise InfeasibleError(
            f"no budget-satisfying mutation found in {self.cap} attempts"
        )


def direct_search(
    evaluator: Evaluator,
    timing: TimingTable,
    budget: TimeBudget,
    grid: SparsityGrid,
    skip: SkipList | None = None,
    params: SearchParams | None = None,
) -> tuple[Profile, SearchTrace]:
    """The same shrinking-neighborhood schedule, mutating profiles directly.

    Candidates are resampled (up to params.resample_cap) until they satisfy
    the discrete budget, so every traced candidate is feasible.
    """
    params = params if params is not None else SearchParams()
    skip = skip if skip is not None else SkipList.none()
    num_layers = timing.num_layers
    dt = discretize(timing, budget, params.buckets)
    rng = SplitMix64(params.seed)
    sampler = _ProfileSampler(rng, dt, skip, len(grid), params.resample_cap)
    meter = _Meter(evaluator, params.use_cache, params.eval_budget)
    trace = SearchTrace(strategy="direct")
    counter = 0
    best: list[int] | None = None
    best_score = math.inf

    def assess(choices: list[int]) -> float:
        nonlocal counter
        score = meter.score(Profile(choices=tuple(choices)))
        counter += 1
        return score

    try:
        for trial in range(1 + params.k):
            cand = sampler.random_profile()
            score = assess(cand)
            if score < best_score:
                best_score, best = score, cand
            trace.add(counter, num_layers, score, best_score)
        for d in range(neighborhood_size(params.shrink_fraction, num_layers), 0, -1):
            trials = fails = 0
            while (fails if params.early_stop else trials) < params.k:
                trials += 1
                cand = sampler.mutate(best, d)
                score = assess(cand)
                if score < best_score:
                    best_score, best = score, cand
                    fails = 0
                else:
                    fails += 1
                trace.add(counter, d, score, best_score)
    except _Exhausted:
        pass
    except EvaluationError as e:
        e.partial_trace = trace
        raise
    trace.final_profile = Profile(choices=tuple(best))
    trace.underlying_evals = meter.underlying_calls
    return trace.final_profile, trace


def genetic_search(
    evaluator: Evaluator,
    timing: TimingTable,
    budget: TimeBudget,
    grid: SparsityGrid,
    skip: SkipList | None = None,
    params: GaParams | None = None,
) -> tuple[Profile, SearchTrace]:
    """Generational GA over profiles: tournament parents, single-point
    crossover, per-gene mutation, feasibility repair by resampling, one
    elite carried over unevaluated."""
    params = params if params is not None else GaParams()
    skip = skip if skip is not None else SkipList.none()
    num_layers = timing.num_layers
    dt = discretize(timing, budget, params.buckets)
    rng = SplitMix64(params.seed)
    sampler = _ProfileSampler(rng, dt, skip, len(grid), params.resample_cap)
    meter = _Meter(evaluator, params.use_cache, params.eval_budget)
    trace = SearchTrace(strategy="ga")
    counter = 0
    best: list[int] | None = None
    best_score = math.inf

    def assess(choices: list[int], generation: int) -> float:
        nonlocal counter, best, best_score
        score = meter.score(Profile(choices=tuple(choices)))
        counter += 1
        if score < best_score:
            best_score, best = score, choices
        trace.add(counter, generation, score, best_score)
        return score

    def tournament(pop: list[tuple[float, list[int]]]) -> list[int]:
        picks = rng.sample_indices(len(pop), min(params.tournament, len(pop)))
        winner = picks[0]
        for idx in picks[1:]:
            if pop[idx][0] < pop[winner][0]:
                winner = idx
        return pop[winner][1]

    def offspring(pop: list[tuple[float, list[int]]]) -> list[int]:
        p1 = tournament(pop)
        p2 = tournament(pop)
        for _ in range(params.resample_cap):
            child = list(p1)
            if num_layers >= 2 and rng.random() < params.crossover_p:
                cut = 1 + rng.below(num_layers - 1)
                child = p1[:cut] + p2[cut:]
            for idx in range(num_layers):
                if rng.random() < params.mutation_p:
                    child[idx] = sampler._gene(idx)
            if sampler.feasible(child):
                return child
        raise InfeasibleError(f"no feasible offspring found in {params.resample_cap} attempts")

    try:
        population: list[tuple[float, list[int]]] = []
        for _ in range(params.population):
            cand = sampler.random_profile()
            population.append((assess(cand, 0), cand))
        max_generations = params.generations
        if max_generations is None:
            # The budget alone cannot stop the run when the reachable space
            # is smaller than eval_budget: once every feasible profile is
            # cached, later candidates cost nothing and the budget never
            # empties.  Bound the generations at twice the count that would
            # spend the budget if no candidate ever hit the cache.
            spend = max(0, params.eval_budget - params.population)
            max_generations = max(1, 2 * math.ceil(spend / (params.population - 1)))
        generation = 0
        while generation < max_generations:
            generation += 1
            elite = min(population, key=lambda item: item[0])
            nxt = [elite]
            while len(nxt) < params.population:
                cand = offspring(population)
                nxt.append((assess(cand, generation), cand))
            population = nxt
    except _Exhausted:
        pass
    except EvaluationError as e:
        e.partial_trace = trace
        raise
    trace.final_profile = Profile(choices=tuple(best))
    trace.underlying_evals = meter.underlying_calls
    return trace.final_profile, trace
