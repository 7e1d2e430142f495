"""Exact solver for the bucketized constrained profile problem.

Given per-layer error scores and integer-bucket times, find the profile
minimizing total error subject to total buckets <= budget. Solved bottom-up
over a (layers x time) table with a predecessor matrix for traceback; a
brute-force enumerator doubles as the verification oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import DiscreteTimings, Profile, SkipList, _frozen
from .exceptions import EnumerationCapError, InfeasibleError, ValidationError

ENUMERATION_CAP = 10_000_000


@dataclass(frozen=True, eq=False)
class ErrorTable:
    """Per-layer, per-sparsity error scores consumed by the solver."""

    errors: np.ndarray  # float64, shape (L, |S|), finite, >= 0

    def __post_init__(self):
        e = np.asarray(self.errors, dtype=np.float64)
        if e.ndim != 2:
            raise ValidationError("errors must be an L x |S| matrix")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ValidationError("error scores must be finite and nonnegative")
        object.__setattr__(self, "errors", _frozen(e))

    @property
    def num_layers(self) -> int:
        return self.errors.shape[0]

    @property
    def num_levels(self) -> int:
        return self.errors.shape[1]


@dataclass(frozen=True)
class DpSolution:
    profile: Profile
    total_error: float
    total_buckets: int
    feasible: bool = True

    def to_dict(self, sparsities: list[float], total_time_s: float) -> dict:
        return {
            "choices": list(self.profile.choices),
            "sparsities": sparsities,
            "total_error": self.total_error,
            "total_time_s": total_time_s,
            "feasible": self.feasible,
        }


def _allowed_choices(num_layers: int, num_levels: int, skip: SkipList) -> list[range]:
    skip.validate(num_layers)
    full = range(num_levels)
    return [range(1) if layer in skip.pinned_dense else full for layer in range(num_layers)]


def _check_dims(err: ErrorTable, dt: DiscreteTimings) -> None:
    if err.errors.shape != dt.buckets.shape:
        raise ValidationError(
            f"error table {err.errors.shape} and bucket table {dt.buckets.shape} disagree"
        )


def _min_bucket_total(buckets: np.ndarray, allowed: list[range]) -> int:
    return int(sum(buckets[layer, list(choices)].min() for layer, choices in enumerate(allowed)))


def dp_tables(
    err: ErrorTable,
    dt: DiscreteTimings,
    skip: SkipList | None = None,
    bucket_budget: int | None = None,
    vectorized: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Fill the cost table D and predecessor table P.

    D[l, t] is the least total error of the first l+1 layers taking exactly
    t buckets (inf when unreachable); P[l, t] is the grid choice at layer l
    achieving it. Levels are scanned in ascending sparsity with
    strict-improvement updates, so ties resolve to the least-destructive
    choice. The vectorized and scalar paths produce bit-identical tables.
    """
    _check_dims(err, dt)
    skip = skip if skip is not None else SkipList.none()
    budget = dt.bucket_count if bucket_budget is None else int(bucket_budget)
    if budget < 0:
        raise ValidationError("bucket budget must be nonnegative")
    L = err.num_layers
    allowed = _allowed_choices(L, err.num_levels, skip)
    errors = err.errors
    buckets = dt.buckets

    D = np.full((L, budget + 1), np.inf, dtype=np.float64)
    P = np.full((L, budget + 1), -1, dtype=np.int32)

    for s in allowed[0]:
        t = int(buckets[0, s])
        if t <= budget and errors[0, s] < D[0, t]:
            D[0, t] = errors[0, s]
            P[0, t] = s

    if vectorized:
        for layer in range(1, L):
            prev, cur, pcur = D[layer - 1], D[layer], P[layer]
            for s in allowed[layer]:
                ts = int(buckets[layer, s])
                if ts > budget:
                    continue
                cand = errors[layer, s] + prev[: budget + 1 - ts]
                seg = cur[ts:]
                better = cand < seg
                np.copyto(seg, cand, where=better)
                np.copyto(pcur[ts:], s, where=better)
    else:
        for layer in range(1, L):
            prev, cur, pcur = D[layer - 1], D[layer], P[layer]
            for s in allowed[layer]:
                ts = int(buckets[layer, s])
                e = errors[layer, s]
                for t in range(ts, budget + 1):
                    cand = e + prev[t - ts]
                    if cand < cur[t]:
                        cur[t] = cand
                        pcur[t] = s
    return D, P


def solve_dp(
    err: ErrorTable,
    dt: DiscreteTimings,
    skip: SkipList | None = None,
    bucket_budget: int | None = None,
    vectorized: bool = True,
) -> DpSolution:
    """Minimize total error over all profiles within the bucket budget.

    Raises InfeasibleError (carrying the minimal achievable bucket total)
    when even the fastest choice per layer exceeds the budget.
    """
    _check_dims(err, dt)
    skip = skip if skip is not None else SkipList.none()
    budget = dt.bucket_count if bucket_budget is None else int(bucket_budget)
    allowed = _allowed_choices(err.num_layers, err.num_levels, skip)

    D, P = dp_tables(err, dt, skip, budget, vectorized)
    last = D[-1]
    if not np.isfinite(last).any():
        raise InfeasibleError(
            f"no profile fits in {budget} buckets; the fastest needs "
            f"{_min_bucket_total(dt.buckets, allowed)}",
            min_buckets=_min_bucket_total(dt.buckets, allowed),
        )
    t = int(np.argmin(last))  # first minimum, i.e. the fastest optimal total
    total_error = float(last[t])
    total_buckets = t
    choices = []
    for layer in range(err.num_layers - 1, -1, -1):
        s = int(P[layer, t])
        choices.append(s)
        t -= int(dt.buckets[layer, s])
    choices.reverse()
    return DpSolution(
        profile=Profile(choices=tuple(choices)),
        total_error=total_error,
        total_buckets=total_buckets,
    )


def brute_force(
    err: ErrorTable,
    dt: DiscreteTimings,
    skip: SkipList | None = None,
    bucket_budget: int | None = None,
    cap: int = ENUMERATION_CAP,
) -> DpSolution:
    """Exhaustive minimizer over all profiles; the verification oracle.

    Ties break to the lexicographically smallest choice vector. Error sums
    accumulate in ascending layer order, matching the solver's fold exactly.
    """
    _check_dims(err, dt)
    skip = skip if skip is not None else SkipList.none()
    budget = dt.bucket_count if bucket_budget is None else int(bucket_budget)
    allowed = _allowed_choices(err.num_layers, err.num_levels, skip)

    size = 1
    for choices in allowed:
        size *= len(choices)
        if size > cap:
            raise EnumerationCapError(
                f"enumeration of more than {cap} profiles refused (instance has {size}+)"
            )

    errors = err.errors.tolist()
    buckets = dt.buckets.tolist()
    best_error = None
    best_profile = None
    best_buckets = 0
    for combo in itertools.product(*allowed):
        total_t = 0
        for layer, s in enumerate(combo):
            total_t += buckets[layer][s]
        if total_t > budget:
            continue
        total_e = 0.0
        for layer, s in enumerate(combo):
            total_e += errors[layer][s]
        if best_error is None or total_e < best_error:
            best_error = total_e
            best_profile = combo
            best_buckets = total_t
    if best_profile is None:
        raise InfeasibleError(
            f"no profile fits in {budget} buckets; the fastest needs "
            f"{_min_bucket_total(dt.buckets, allowed)}",
            min_buckets=_min_bucket_total(dt.buckets, allowed),
        )
    return DpSolution(
        profile=Profile(choices=tuple(best_profile)),
        total_error=best_error,
        total_buckets=best_buckets,
    )
