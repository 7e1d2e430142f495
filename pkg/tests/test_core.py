"""Tests for grids, timing tables, budgets, discretization and skip lists."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseplan.core import (
    DiscreteTimings,
    Profile,
    SkipList,
    SparsityGrid,
    TimeBudget,
    TimingTable,
    discretize,
    load_timing_table,
    make_grid,
    parse_skip_spec,
    profile_time,
    save_timing_table,
    time_budget,
)
from sparseplan.exceptions import InfeasibleError, MalformedInputError, ValidationError

# Closed-form density decay for the default grid (0.4, 0.99, 41):
# ((1 - 0.99) / (1 - 0.4)) ** (1 / 40), computed independently and frozen.
DEFAULT_GRID_RATIO = 0.9027057706387532


def small_timing() -> TimingTable:
    grid = make_grid(0.5, 0.9, 2)
    return TimingTable(
        layer_names=("a", "b", "c"),
        times=np.array(
            [
                [0.010, 0.006, 0.003],
                [0.020, 0.011, 0.005],
                [0.008, 0.005, 0.002],
            ]
        ),
        base_time=0.002,
        grid=grid,
    )


class TestGrid:
    def test_default_grid_shape_and_endpoints(self) -> None:
        grid = make_grid(0.4, 0.99, 41)
        lv = grid.levels
        assert len(grid) == 42
        assert lv[0] == 0.0
        assert lv[1] == 0.4  # exact, not approximate
        assert lv[-1] == 0.99
        assert np.all(np.diff(lv) > 0)

    def test_default_grid_geometric_ratio(self) -> None:
        grid = make_grid(0.4, 0.99, 41)
        assert grid.ratio == pytest.approx(DEFAULT_GRID_RATIO, abs=1e-15)
        dens = 1.0 - grid.levels[1:]
        ratios = dens[1:] / dens[:-1]
        assert np.max(np.abs(ratios - DEFAULT_GRID_RATIO)) < 1e-9

    def test_single_level_grid(self) -> None:
        grid = make_grid(0.7, 0.7, 1)
        assert list(grid.levels) == [0.0, 0.7]
        with pytest.raises(ValidationError):
            make_grid(0.5, 0.7, 1)

    @pytest.mark.parametrize(
        "lower,upper,n",
        [(0.0, 0.9, 5), (-0.1, 0.9, 5), (0.5, 1.0, 5), (0.9, 0.5, 5), (0.4, 0.99, 0)],
    )
    def test_rejects_bad_parameters(self, lower: float, upper: float, n: int) -> None:
        with pytest.raises(ValidationError):
            make_grid(lower, upper, n)

    def test_grid_constructor_checks_levels(self) -> None:
        with pytest.raises(ValidationError):
            SparsityGrid(levels=np.array([0.1, 0.5]), ratio=1.0)  # no dense level
        with pytest.raises(ValidationError):
            SparsityGrid(levels=np.array([0.0, 0.5, 0.5]), ratio=1.0)  # not increasing
        with pytest.raises(ValidationError):
            SparsityGrid(levels=np.array([0.0, 0.5, 1.0]), ratio=0.0)  # reaches 1
        with pytest.raises(ValidationError):
            # decay between non-dense densities inconsistent with stated ratio
            SparsityGrid(levels=np.array([0.0, 0.4, 0.52, 0.7]), ratio=0.8)

    def test_levels_are_read_only(self) -> None:
        grid = make_grid(0.4, 0.99, 9)
        with pytest.raises(ValueError):
            grid.levels[0] = 0.5

    @given(
        lower=st.floats(0.01, 0.6),
        span=st.floats(0.005, 0.35),
        n=st.integers(2, 50),
    )
    @settings(max_examples=60, deadline=None)
    def test_grid_property_geometric(self, lower: float, span: float, n: int) -> None:
        upper = min(lower + span, 0.995)
        grid = make_grid(lower, upper, n)
        assert len(grid) == n + 1
        assert grid.levels[1] == lower and grid.levels[-1] == upper
        dens = 1.0 - np.asarray(grid.levels[1:])
        if n >= 2:
            ratios = dens[1:] / dens[:-1]
            assert np.max(np.abs(ratios - grid.ratio)) < 1e-9


class TestTimingTable:
    def test_totals(self) -> None:
        timing = small_timing()
        assert timing.num_layers == 3
        assert timing.dense_layer_total() == pytest.approx(0.038, abs=0.0)
        assert timing.dense_total() == pytest.approx(0.040)

    def test_validation(self) -> None:
        grid = make_grid(0.5, 0.9, 2)
        with pytest.raises(ValidationError):
            TimingTable(("a",), np.array([[1.0, 2.0]]), 0.0, grid)  # wrong width
        with pytest.raises(ValidationError):
            TimingTable(("a", "b"), np.array([[1.0, 1.0, 1.0]]), 0.0, grid)  # name mismatch
        with pytest.raises(ValidationError):
            TimingTable(("a",), np.array([[1.0, -0.1, 0.2]]), 0.0, grid)  # negative
        with pytest.raises(ValidationError):
            TimingTable(("a",), np.array([[1.0, 0.5, 0.2]]), -1.0, grid)  # bad base


class TestBudget:
    def test_speedup_one_is_exact_dense_layer_total(self) -> None:
        timing = small_timing()
        budget = time_budget(timing, 1.0)
        assert budget.seconds == timing.dense_layer_total()

    def test_speedup_formula(self) -> None:
        timing = small_timing()
        budget = time_budget(timing, 2.0)
        # (layers + base)/X - base, written to be exact at X=1
        assert budget.seconds == pytest.approx(0.040 / 2.0 - 0.002)
        assert budget.speedup == 2.0

    def test_speedup_below_one_rejected(self) -> None:
        with pytest.raises(ValidationError):
            time_budget(small_timing(), 0.5)

    def test_unreachable_speedup_is_infeasible(self) -> None:
        grid = make_grid(0.5, 0.9, 2)
        timing = TimingTable(("a",), np.array([[0.001, 0.0008, 0.0005]]), 0.010, grid)
        # dense total 0.011s with 0.010s unprunable: 5x cannot be reached
        with pytest.raises(InfeasibleError):
            time_budget(timing, 5.0)

    def test_budget_requires_positive_seconds(self) -> None:
        with pytest.raises(ValidationError):
            TimeBudget(seconds=0.0)
        with pytest.raises(ValidationError):
            TimeBudget(seconds=float("nan"))


class TestDiscretize:
    def test_rounding_half_away_from_zero(self) -> None:
        grid = make_grid(0.5, 0.9, 2)
        # dyadic times keep the scaled values exactly 2.5, 1.5 and 0.5
        timing = TimingTable(("a",), np.array([[1.25, 0.75, 0.25]]), 0.0, grid)
        budget = TimeBudget(seconds=1.0)
        disc = discretize(timing, budget, bucket_count=2)
        assert disc.buckets.tolist() == [[3, 2, 1]]
        assert disc.bucket_width == 0.5

    def test_matches_scalar_rounding(self) -> None:
        timing = small_timing()
        budget = time_budget(timing, 2.0)
        disc = discretize(timing, budget, bucket_count=100)
        for i in range(timing.num_layers):
            for j in range(len(timing.grid)):
                scaled = timing.times[i, j] * 100 / budget.seconds
                assert disc.buckets[i, j] == math.floor(scaled + 0.5)

    def test_entries_may_exceed_bucket_count(self) -> None:
        grid = make_grid(0.5, 0.9, 2)
        timing = TimingTable(("a",), np.array([[1.0, 0.5, 0.1]]), 0.0, grid)
        disc = discretize(timing, TimeBudget(seconds=0.2), bucket_count=10)
        assert disc.buckets[0, 0] == 50  # infeasible on its own, still representable

    def test_rejects_zero_buckets(self) -> None:
        with pytest.raises(ValidationError):
            discretize(small_timing(), TimeBudget(seconds=0.01), bucket_count=0)
        with pytest.raises(ValidationError):
            DiscreteTimings(buckets=np.array([[-1]]), bucket_count=5, bucket_width=0.1)


class TestProfileAndSkip:
    def test_profile_validation_and_sparsities(self) -> None:
        grid = make_grid(0.5, 0.9, 2)
        p = Profile(choices=(0, 2, 1))
        p.validate(3, 3)
        assert p.sparsities(grid) == [0.0, 0.9, 0.5]
        with pytest.raises(ValidationError):
            p.validate(2, 3)
        with pytest.raises(ValidationError):
            Profile(choices=(0, 3, 1)).validate(3, 3)

    def test_dense_profile(self) -> None:
        assert Profile.dense(4).choices == (0, 0, 0, 0)

    def test_profile_time_excludes_base(self) -> None:
        timing = small_timing()
        assert profile_time(Profile.dense(3), timing) == pytest.approx(0.038, abs=0.0)
        assert profile_time(Profile((2, 2, 2)), timing) == pytest.approx(0.010)
        assert profile_time(Profile((1, 0, 2)), timing) == pytest.approx(0.028)

    @pytest.mark.parametrize(
        "spec,expected",
        [
            ("none", frozenset()),
            ("", frozenset()),
            ("first,last", frozenset({0, 4})),
            ("first", frozenset({0})),
            ("last", frozenset({4})),
            ("1,3", frozenset({1, 3})),
            ("first,2,last", frozenset({0, 2, 4})),
            (" FIRST , Last ", frozenset({0, 4})),
        ],
    )
    def test_parse_skip_spec(self, spec: str, expected: frozenset[int]) -> None:
        assert parse_skip_spec(spec, 5).pinned_dense == expected

    def test_parse_skip_spec_rejects_garbage(self) -> None:
        with pytest.raises(ValidationError):
            parse_skip_spec("frist", 5)
        with pytest.raises(ValidationError):
            parse_skip_spec("7", 5)

    def test_skip_list_helpers(self) -> None:
        assert SkipList.first_and_last(6).pinned_dense == frozenset({0, 5})
        assert SkipList.none().pinned_dense == frozenset()
        with pytest.raises(ValidationError):
            SkipList(pinned_dense=frozenset({-1}))
        with pytest.raises(ValidationError):
            SkipList(pinned_dense=frozenset({3})).validate(3)


class TestTimingIO:
    def test_round_trip_is_exact(self, tmp_path) -> None:
        timing = small_timing()
        path = tmp_path / "timing.json"
        save_timing_table(timing, path)
        back = load_timing_table(path)
        assert back.layer_names == timing.layer_names
        assert back.base_time == timing.base_time
        assert np.array_equal(back.times, timing.times)
        assert np.array_equal(back.grid.levels, timing.grid.levels)

    def test_load_rejects_missing_file(self, tmp_path) -> None:
        with pytest.raises(MalformedInputError):
            load_timing_table(tmp_path / "nope.json")

    def test_load_rejects_invalid_json(self, tmp_path) -> None:
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(MalformedInputError):
            load_timing_table(path)

    def test_load_rejects_missing_fields(self, tmp_path) -> None:
        path = tmp_path / "partial.json"
        path.write_text(json.dumps({"base_time_s": 0.0}), encoding="utf-8")
        with pytest.raises(MalformedInputError):
            load_timing_table(path)

    def test_load_rejects_row_width_mismatch(self, tmp_path) -> None:
        doc = {
            "base_time_s": 0.0,
            "grid": {"lower": 0.5, "upper": 0.9, "n_levels": 2},
            "layers": [{"name": "a", "times_s": [1.0, 0.5]}],
        }
        path = tmp_path / "short.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(MalformedInputError):
            load_timing_table(path)

    def test_load_rejects_non_object_top_level(self, tmp_path) -> None:
        path = tmp_path / "list.json"
        path.write_text("[1, 2, 3]", encoding="utf-8")
        with pytest.raises(MalformedInputError):
            load_timing_table(path)
