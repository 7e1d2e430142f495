"""Comparison profile generators: minimal uniform sparsity and global
magnitude pruning rounded to the grid.

Both baselines are defined against the continuous time budget (they exist
before any discretization), so the DpSolution they return carries
total_buckets = 0 and total_error = 0.0; their quality is judged by an
evaluator, not by an error table.
"""

from __future__ import annotations

import numpy as np

from .core import Profile, SkipList, SparsityGrid, TimeBudget, TimingTable, profile_time
from .dp import DpSolution
from .error_models import LayerWeightStats
from .exceptions import InfeasibleError, ValidationError

THRESHOLD_RESOLUTION = 1e-6  # relative width at which the tau bisection stops


def _pinned(skip: SkipList | None, num_layers: int) -> frozenset:
    skip = skip if skip is not None else SkipList.none()
    skip.validate(num_layers)
    return skip.pinned_dense


def uniform_profile(
    timing: TimingTable,
    budget: TimeBudget,
    grid: SparsityGrid,
    skip: SkipList | None = None,
) -> DpSolution:
    """Smallest grid index that, applied to every non-skipped layer, meets
    the continuous budget (skipped layers stay dense)."""
    pinned = _pinned(skip, timing.num_layers)
    for index in range(len(grid)):
        choices = tuple(0 if l in pinned else index for l in range(timing.num_layers))
        profile = Profile(choices=choices)
        if profile_time(profile, timing) <= budget.seconds:
            return DpSolution(profile=profile, total_error=0.0, total_buckets=0)
    raise InfeasibleError(
        f"uniform profile misses the budget even at sparsity {grid.levels[-1]}"
    )


def _rounded_profile(
    stats: LayerWeightStats,
    grid: SparsityGrid,
    tau: float,
    pinned: frozenset,
) -> Profile:
    """Profile induced by magnitude threshold tau: each layer's implied
    sparsity snaps to the nearest grid level, ties toward less pruning."""
    levels = grid.levels
    choices = []
    for layer in range(stats.num_layers):
        if layer in pinned:
            choices.append(0)
            continue
        implied = stats.sparsity_below(layer, tau)
        # np.argmin returns the first minimum, i.e. the lower level on ties
        choices.append(int(np.argmin(np.abs(levels - implied))))
    return Profile(choices=tuple(choices))


def gmp_profile(
    stats: LayerWeightStats,
    timing: TimingTable,
    budget: TimeBudget,
    grid: SparsityGrid,
    skip: SkipList | None = None,
) -> DpSolution:
    """Global-magnitude-threshold profile: bisect the threshold tau until
    the grid-rounded profile meets the continuous budget, returning the
    profile of the smallest such tau (to THRESHOLD_RESOLUTION relative)."""
    if stats.num_layers != timing.num_layers:
        raise ValidationError(
            f"stats cover {stats.num_layers} layers, timing table has {timing.num_layers}"
        )
    pinned = _pinned(skip, timing.num_layers)

    def feasible(tau: float) -> bool:
        p = _rounded_profile(stats, grid, tau, pinned)
        return profile_time(p, timing) <= budget.seconds

    lo = 0.0
    if feasible(lo):
        return DpSolution(
            profile=_rounded_profile(stats, grid, lo, pinned),
            total_error=0.0,
            total_buckets=0,
        )
    hi = float(np.max(stats.quantiles[:, -1]))
    if not feasible(hi):
        raise InfeasibleError(
            "global magnitude pruning misses the budget even when every "
            "prunable layer is at its maximum grid sparsity"
        )
    while hi - lo > THRESHOLD_RESOLUTION * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return DpSolution(
        profile=_rounded_profile(stats, grid, hi, pinned),
        total_error=0.0,
        total_buckets=0,
    )
