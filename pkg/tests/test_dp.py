"""Tests for the exact bucketized solver against its brute-force oracle."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseplan.core import DiscreteTimings, Profile, SkipList
from sparseplan.dp import ErrorTable, brute_force, dp_tables, solve_dp
from sparseplan.exceptions import (
    EnumerationCapError,
    InfeasibleError,
    ValidationError,
)


def random_instance(
    seed: int,
    max_layers: int = 6,
    max_levels: int = 5,
    max_budget: int = 50,
) -> tuple[ErrorTable, DiscreteTimings, SkipList, int]:
    """Small random instance with continuous errors (ties are measure-zero)."""
    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, max_layers + 1))
    S = int(rng.integers(2, max_levels + 1))
    budget = int(rng.integers(1, max_budget + 1))
    errors = rng.random((L, S))
    errors[:, 0] = 0.0
    buckets = rng.integers(0, max_budget, size=(L, S)).astype(np.int64)
    if rng.random() < 0.3 and L >= 2:
        skip = SkipList.first_and_last(L)
    else:
        skip = SkipList.none()
    dt = DiscreteTimings(buckets=buckets, bucket_count=budget, bucket_width=1.0)
    return ErrorTable(errors=errors), dt, skip, budget


def simple_instance() -> tuple[ErrorTable, DiscreteTimings]:
    err = ErrorTable(errors=np.array([[0.0, 0.1, 0.45], [0.0, 0.3, 0.9]]))
    dt = DiscreteTimings(
        buckets=np.array([[10, 6, 3], [8, 5, 2]]),
        bucket_count=12,
        bucket_width=1.0,
    )
    return err, dt


class TestSolveAgainstOracle:
    def test_small_known_instance(self) -> None:
        err, dt = simple_instance()
        sol = solve_dp(err, dt)
        # feasible profiles within 12 buckets: (0,2)=0.9, (1,1)=0.4,
        # (1,2)=1.0, (2,0)=0.45, (2,1)=0.75, (2,2)=1.35 -> unique best (1,1)
        assert sol.profile.choices == (1, 1)
        assert sol.total_error == pytest.approx(0.4)
        assert sol.total_buckets == 11
        oracle = brute_force(err, dt)
        assert sol.profile == oracle.profile
        assert sol.total_error == oracle.total_error

    @pytest.mark.parametrize("seed", range(60))
    def test_matches_brute_force_exactly(self, seed: int) -> None:
        err, dt, skip, budget = random_instance(seed)
        try:
            fast = solve_dp(err, dt, skip, budget)
        except InfeasibleError as e_fast:
            with pytest.raises(InfeasibleError) as e_slow:
                brute_force(err, dt, skip, budget)
            assert e_slow.value.min_buckets == e_fast.min_buckets
            return
        slow = brute_force(err, dt, skip, budget)
        assert fast.profile == slow.profile
        assert fast.total_error == slow.total_error  # bitwise, not approx
        assert fast.total_buckets == slow.total_buckets

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force_property(self, seed: int) -> None:
        err, dt, skip, budget = random_instance(seed, max_layers=5, max_levels=4)
        try:
            fast = solve_dp(err, dt, skip, budget)
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                brute_force(err, dt, skip, budget)
            return
        slow = brute_force(err, dt, skip, budget)
        assert fast.profile == slow.profile
        assert fast.total_error == slow.total_error


class TestScalarVectorizedAgreement:
    @pytest.mark.parametrize("seed", range(25))
    def test_tables_bit_identical(self, seed: int) -> None:
        err, dt, skip, budget = random_instance(seed)
        Dv, Pv = dp_tables(err, dt, skip, budget, vectorized=True)
        Ds, Ps = dp_tables(err, dt, skip, budget, vectorized=False)
        assert np.array_equal(Dv, Ds)
        assert np.array_equal(Pv, Ps)

    def test_solutions_identical(self) -> None:
        err, dt, skip, budget = random_instance(99)
        try:
            a = solve_dp(err, dt, skip, budget, vectorized=True)
            b = solve_dp(err, dt, skip, budget, vectorized=False)
        except InfeasibleError:
            return
        assert a.profile == b.profile and a.total_error == b.total_error


class TestSolveBehaviour:
    def test_budget_relaxation_never_hurts(self) -> None:
        for seed in range(10):
            err, dt, skip, _ = random_instance(seed, max_budget=40)
            prev = np.inf
            for budget in range(10, 120, 10):
                try:
                    sol = solve_dp(err, dt, skip, budget)
                except InfeasibleError:
                    continue
                assert sol.total_error <= prev
                assert sol.total_buckets <= budget
                prev = min(prev, sol.total_error)

    def test_skip_pins_layers_dense(self) -> None:
        err, dt = simple_instance()
        sol = solve_dp(err, dt, SkipList.first_and_last(2), bucket_budget=30)
        assert sol.profile.choices == (0, 0)
        with pytest.raises(InfeasibleError):
            # dense-dense needs 18 buckets
            solve_dp(err, dt, SkipList.first_and_last(2), bucket_budget=17)

    def test_infeasible_reports_minimum(self) -> None:
        err, dt = simple_instance()
        with pytest.raises(InfeasibleError) as exc:
            solve_dp(err, dt, bucket_budget=4)
        assert exc.value.min_buckets == 5  # 3 + 2

    def test_positive_scaling_preserves_argmin_exactly(self) -> None:
        err, dt, skip, budget = random_instance(1)  # feasible, nonzero optimum
        base = solve_dp(err, dt, skip, budget)
        for lam in (0.25, 2.0, 8.0):
            scaled = solve_dp(ErrorTable(errors=err.errors * lam), dt, skip, budget)
            assert scaled.profile == base.profile
            assert scaled.total_error == base.total_error * lam

    def test_single_layer(self) -> None:
        err = ErrorTable(errors=np.array([[0.0, 0.2, 0.5]]))
        dt = DiscreteTimings(
            buckets=np.array([[9, 5, 2]]), bucket_count=6, bucket_width=1.0
        )
        sol = solve_dp(err, dt)
        assert sol.profile.choices == (1,)
        assert sol.total_error == 0.2

    def test_zero_bucket_choices(self) -> None:
        err = ErrorTable(errors=np.array([[0.0, 0.1], [0.0, 0.2]]))
        dt = DiscreteTimings(
            buckets=np.array([[3, 0], [2, 0]]), bucket_count=1, bucket_width=1.0
        )
        sol = solve_dp(err, dt)
        assert sol.profile.choices == (1, 1)
        assert sol.total_buckets == 0

    def test_dimension_mismatch_rejected(self) -> None:
        err, dt = simple_instance()
        bad = ErrorTable(errors=np.zeros((3, 3)))
        with pytest.raises(ValidationError):
            solve_dp(bad, dt)

    def test_error_table_validation(self) -> None:
        with pytest.raises(ValidationError):
            ErrorTable(errors=np.array([[0.0, -0.1]]))
        with pytest.raises(ValidationError):
            ErrorTable(errors=np.array([[0.0, np.inf]]))
        with pytest.raises(ValidationError):
            ErrorTable(errors=np.zeros(4))


class TestBruteForce:
    def test_enumeration_cap(self) -> None:
        L, S = 12, 6  # 6^12 > 2e9 combinations, far above the default cap
        err = ErrorTable(errors=np.zeros((L, S)))
        dt = DiscreteTimings(
            buckets=np.ones((L, S), dtype=np.int64),
            bucket_count=100,
            bucket_width=1.0,
        )
        with pytest.raises(EnumerationCapError):
            brute_force(err, dt)

    def test_enumeration_cap_parameter(self) -> None:
        err = ErrorTable(errors=np.zeros((2, 2)))
        dt = DiscreteTimings(
            buckets=np.zeros((2, 2), dtype=np.int64), bucket_count=1, bucket_width=1.0
        )
        with pytest.raises(EnumerationCapError):
            brute_force(err, dt, cap=3)  # 4 combinations > 3
        assert brute_force(err, dt, cap=4).total_error == 0.0

    def test_lexicographic_tie_break(self) -> None:
        # both layers: level 1 strictly cheaper in buckets, same error
        err = ErrorTable(errors=np.zeros((2, 2)))
        dt = DiscreteTimings(
            buckets=np.array([[2, 1], [2, 1]]), bucket_count=4, bucket_width=1.0
        )
        sol = brute_force(err, dt)
        assert sol.profile.choices == (0, 0)

    def test_accumulation_order_matches_solver(self) -> None:
        # errors chosen so that summation order changes the last bit
        vals = np.array(
            [[0.0, 0.1], [0.0, 0.2], [0.0, 0.3], [0.0, 0.7], [0.0, 1e-16]]
        )
        err = ErrorTable(errors=vals)
        dt = DiscreteTimings(
            buckets=np.ones((5, 2), dtype=np.int64) * np.array([2, 1]),
            bucket_count=5,
            bucket_width=1.0,
        )
        fast = solve_dp(err, dt)
        slow = brute_force(err, dt)
        assert fast.profile.choices == (1, 1, 1, 1, 1)
        assert fast.total_error == slow.total_error


def test_solution_to_dict() -> None:
    from sparseplan.dp import DpSolution

    sol = DpSolution(profile=Profile((0, 1)), total_error=0.25, total_buckets=7)
    doc = sol.to_dict(sparsities=[0.0, 0.5], total_time_s=0.01)
    assert doc == {
        "choices": [0, 1],
        "sparsities": [0.0, 0.5],
        "total_error": 0.25,
        "total_time_s": 0.01,
        "feasible": True,
    }
