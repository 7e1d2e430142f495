"""Tests for the uniform and magnitude-threshold baseline profiles."""

from __future__ import annotations

import numpy as np
import pytest

from sparseplan.core import (
    Profile,
    SkipList,
    TimeBudget,
    TimingTable,
    make_grid,
    profile_time,
    time_budget,
)
from sparseplan.baselines import gmp_profile, uniform_profile
from sparseplan.error_models import LayerWeightStats
from sparseplan.exceptions import InfeasibleError, ValidationError
from sparseplan.testbed import (
    gen_timings,
    half_normal_quantiles,
    random_timing_spec,
    random_weight_stats,
)

GRID = make_grid(0.4, 0.99, 9)


def linear_timing(dense: list[float], grid=GRID) -> TimingTable:
    """Times exactly proportional to density, no jitter or floors."""
    levels = np.asarray(grid.levels)
    times = np.array([[d * (1.0 - s) for s in levels] for d in dense])
    times[:, 0] = dense
    return TimingTable(
        layer_names=tuple(f"layer{i:02d}" for i in range(len(dense))),
        times=times,
        base_time=0.0,
        grid=grid,
    )


def stats_with_sigmas(sigmas: list[float], count: int = 10_000) -> LayerWeightStats:
    return LayerWeightStats(
        layer_names=tuple(f"layer{i:02d}" for i in range(len(sigmas))),
        counts=np.full(len(sigmas), count, dtype=np.int64),
        quantiles=np.array([half_normal_quantiles(s, count) for s in sigmas]),
    )


class TestUniformProfile:
    def test_dense_budget_returns_dense(self) -> None:
        timing = linear_timing([0.01, 0.02])
        sol = uniform_profile(timing, TimeBudget(seconds=0.030), GRID)
        assert sol.profile.choices == (0, 0)

    def test_smallest_satisfying_index(self) -> None:
        timing = linear_timing([0.01, 0.01])
        # need total <= 0.01 => density <= 0.5 => sparsity >= 0.5; the grid
        # level at index 2 is the first with s >= 0.5
        levels = np.asarray(GRID.levels)
        target = int(np.argmax(1.0 - levels <= 0.5))
        sol = uniform_profile(timing, TimeBudget(seconds=0.01), GRID)
        assert sol.profile.choices == (target, target)
        # minimality: one index lower must violate the budget
        lower = Profile((target - 1, target - 1))
        assert profile_time(lower, timing) > 0.01

    def test_skip_pins_layers(self) -> None:
        timing = linear_timing([0.01, 0.01, 0.01])
        skip = SkipList.first_and_last(3)
        sol = uniform_profile(timing, TimeBudget(seconds=0.025), GRID, skip)
        assert sol.profile.choices[0] == 0
        assert sol.profile.choices[2] == 0
        assert sol.profile.choices[1] > 0
        assert profile_time(sol.profile, timing) <= 0.025

    def test_infeasible(self) -> None:
        timing = linear_timing([0.01, 0.01])
        # even 99% sparsity leaves 0.0002s of layer time
        with pytest.raises(InfeasibleError):
            uniform_profile(timing, TimeBudget(seconds=0.0001), GRID)

    def test_budget_satisfaction_random_instances(self) -> None:
        for seed in range(20):
            timing = gen_timings(random_timing_spec(6, seed=seed), GRID)
            budget = time_budget(timing, 1.8)
            sol = uniform_profile(timing, budget, GRID)
            assert profile_time(sol.profile, timing) <= budget.seconds


class TestGmpProfile:
    def test_equal_layers_match_uniform(self) -> None:
        # identical weight distributions and identical timing curves: the
        # global threshold implies the same sparsity everywhere, so the
        # result can prune no less evenly than the uniform baseline
        timing = linear_timing([0.01, 0.01, 0.01])
        stats = stats_with_sigmas([0.02, 0.02, 0.02])
        budget = TimeBudget(seconds=0.015)
        gmp = gmp_profile(stats, timing, budget, GRID)
        uni = uniform_profile(timing, budget, GRID)
        assert len(set(gmp.profile.choices)) == 1  # uniform by symmetry
        assert profile_time(gmp.profile, timing) <= budget.seconds
        # both land on a feasible uniform index; gmp may overshoot by at
        # most one level because it rounds a continuous sparsity
        assert abs(gmp.profile.choices[0] - uni.profile.choices[0]) <= 1

    def test_threshold_ordering_prunes_small_sigma_harder(self) -> None:
        # layer 0 has much smaller weights: a global threshold crosses a
        # larger fraction of them, so its sparsity must be >= layer 1's
        timing = linear_timing([0.01, 0.01])
        stats = stats_with_sigmas([0.005, 0.05])
        budget = TimeBudget(seconds=0.012)
        sol = gmp_profile(stats, timing, budget, GRID)
        assert sol.profile.choices[0] >= sol.profile.choices[1]
        assert profile_time(sol.profile, timing) <= budget.seconds

    def test_dense_budget_short_circuits(self) -> None:
        timing = linear_timing([0.01, 0.01])
        stats = stats_with_sigmas([0.01, 0.01])
        sol = gmp_profile(stats, timing, TimeBudget(seconds=0.021), GRID)
        assert sol.profile.choices == (0, 0)

    def test_skip_pins_layers(self) -> None:
        timing = linear_timing([0.01, 0.01, 0.01])
        stats = stats_with_sigmas([0.01, 0.01, 0.01])
        skip = SkipList(pinned_dense=frozenset({1}))
        sol = gmp_profile(stats, timing, TimeBudget(seconds=0.02), GRID, skip)
        assert sol.profile.choices[1] == 0
        assert profile_time(sol.profile, timing) <= 0.02

    def test_infeasible(self) -> None:
        timing = linear_timing([0.01, 0.01])
        stats = stats_with_sigmas([0.01, 0.01])
        with pytest.raises(InfeasibleError):
            gmp_profile(stats, timing, TimeBudget(seconds=0.0001), GRID)

    def test_layer_count_mismatch(self) -> None:
        timing = linear_timing([0.01, 0.01])
        stats = stats_with_sigmas([0.01])
        with pytest.raises(ValidationError):
            gmp_profile(stats, timing, TimeBudget(seconds=0.01), GRID)

    def test_budget_satisfaction_random_instances(self) -> None:
        for seed in range(15):
            timing = gen_timings(random_timing_spec(5, seed=seed), GRID)
            stats = random_weight_stats(5, seed=seed + 500)
            budget = time_budget(timing, 2.0)
            try:
                sol = gmp_profile(stats, timing, budget, GRID)
            except InfeasibleError:
                continue
            assert profile_time(sol.profile, timing) <= budget.seconds

    def test_rounding_ties_toward_lower_level(self) -> None:
        # grid levels 0, 0.5, 0.9: an implied sparsity of exactly 0.25 is
        # equidistant from 0 and 0.5 and must snap to the lower level (0)
        from sparseplan.baselines import _rounded_profile

        grid = make_grid(0.5, 0.9, 2)
        # dyadic 5-knot table with q(u) = u makes sparsity_below(t) = t exact
        q = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        stats = LayerWeightStats(("a",), np.array([100]), q.reshape(1, -1))
        p = _rounded_profile(stats, grid, 0.25, frozenset())  # exact 0 vs 0.5 tie
        assert p.choices == (0,)
        p = _rounded_profile(stats, grid, 0.7, frozenset())  # 0.5 vs 0.9 near-tie
        assert p.choices == (1,)
