"""Domain types shared by every other module: the sparsity grid, per-layer
timing tables, time budgets and their integer-bucket discretization.

All types are immutable after construction (arrays are marked read-only), so
instances can be shared freely across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InfeasibleError, MalformedInputError, ValidationError

RATIO_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SparsityGrid:
    """Ordered sparsity choices shared by all layers; index 0 is dense."""

    levels: np.ndarray  # float64, strictly increasing, levels[0] == 0
    ratio: float  # density decay between consecutive non-dense levels

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=np.float64)
        if lv.ndim != 1 or lv.size < 2:
            raise ValidationError("grid needs the dense level plus at least one sparsity")
        if lv[0] != 0.0:
            raise ValidationError("grid levels must start with the dense choice 0")
        if np.any(np.diff(lv) <= 0):
            raise ValidationError("grid levels must be strictly increasing")
        if lv[-1] >= 1.0 or np.any(lv < 0):
            raise ValidationError("grid levels must lie in [0, 1)")
        drift = [(1.0 - lv[j + 1]) / (1.0 - lv[j]) - self.ratio for j in range(1, lv.size - 1)]
        if drift and max(abs(d) for d in drift) >= RATIO_TOL:
            raise ValidationError("consecutive non-dense densities do not decay by the stated ratio")
        object.__setattr__(self, "levels", _frozen(lv))

    def __len__(self) -> int:
        return int(self.levels.size)


def make_grid(lower: float, upper: float, n_levels: int) -> SparsityGrid:
    """Geometric-in-density grid: dense plus n_levels sparsities spanning
    [lower, upper], each step keeping a constant fraction of remaining weights.
    """
    if not 0 < lower <= upper < 1:
        raise ValidationError(f"need 0 < lower <= upper < 1, got lower={lower}, upper={upper}")
    if n_levels < 1:
        raise ValidationError(f"need n_levels >= 1, got {n_levels}")
    if n_levels == 1:
        if lower != upper:
            raise ValidationError("a single level requires lower == upper")
        return SparsityGrid(levels=np.array([0.0, lower]), ratio=1.0)
    ratio = ((1.0 - upper) / (1.0 - lower)) ** (1.0 / (n_levels - 1))
    # endpoints are exact by construction; pow only shapes the interior
    levels = [0.0, lower]
    levels += [1.0 - (1.0 - lower) * ratio**i for i in range(1, n_levels - 1)]
    levels.append(upper)
    return SparsityGrid(levels=np.array(levels), ratio=ratio)


@dataclass(frozen=True, eq=False)
class TimingTable:
    """Measured (or synthesized) execution time of every layer at every
    grid sparsity, plus the runtime of operations pruning cannot touch."""

    layer_names: tuple[str, ...]
    times: np.ndarray  # seconds, shape (L, |S|)
    base_time: float
    grid: SparsityGrid

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != len(self.layer_names):
            raise ValidationError("times must be an L x |S| matrix matching layer_names")
        if t.shape[1] != len(self.grid):
            raise ValidationError(
                f"times has {t.shape[1]} sparsity columns but the grid has {len(self.grid)} levels"
            )
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValidationError("layer times must be finite and nonnegative")
        if not math.isfinite(self.base_time) or self.base_time < 0:
            raise ValidationError("base_time must be finite and nonnegative")
        object.__setattr__(self, "layer_names", tuple(self.layer_names))
        object.__setattr__(self, "times", _frozen(t))

    @property
    def num_layers(self) -> int:
        return self.times.shape[0]

    def dense_layer_total(self) -> float:
        return float(np.sum(self.times[:, 0]))

    def dense_total(self) -> float:
        return self.base_time + self.dense_layer_total()


@dataclass(frozen=True)
class TimeBudget:
    """Execution-time target for the prunable layers only."""

    seconds: float
    speedup: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.seconds) or self.seconds <= 0:
            raise ValidationError(f"budget must be a positive time, got {self.seconds}")


def time_budget(timing: TimingTable, speedup: float) -> TimeBudget:
    """Layer-time budget for an end-to-end speedup target.

    Evaluated as dense_layer_total/X + base*(1/X - 1), which is algebraically
    the usual dense_total/X - base form but returns the dense layer total
    exactly when X == 1.
    """
    if not math.isfinite(speedup) or speedup < 1.0:
        raise ValidationError(f"speedup target must be >= 1, got {speedup}")
    seconds = timing.dense_layer_total() / speedup + timing.base_time * (1.0 / speedup - 1.0)
    if seconds <= 0:
        raise InfeasibleError(
            f"speedup {speedup}x is unreachable: even zero layer time leaves "
            f"{timing.base_time}s of unprunable work"
        )
    return TimeBudget(seconds=seconds, speedup=speedup)


@dataclass(frozen=True, eq=False)
class DiscreteTimings:
    """Integer-bucket view of a timing table against a specific budget.

    Entries may exceed bucket_count; such choices are simply infeasible on
    their own. Zero buckets are allowed.
    """

    buckets: np.ndarray  # int64, shape (L, |S|)
    bucket_count: int
    bucket_width: float

    def __post_init__(self):
        b = np.asarray(self.buckets, dtype=np.int64)
        if b.ndim != 2 or np.any(b < 0):
            raise ValidationError("buckets must be a nonnegative L x |S| matrix")
        if self.bucket_count < 1:
            raise ValidationError("bucket_count must be >= 1")
        object.__setattr__(self, "buckets", _frozen(b))


def discretize(timing: TimingTable, budget: TimeBudget, bucket_count: int = 10_000) -> DiscreteTimings:
    """Round layer times to integer buckets of width budget/B, half away
    from zero."""
    if bucket_count < 1:
        raise ValidationError(f"need at least one bucket, got {bucket_count}")
    scaled = timing.times * float(bucket_count) / budget.seconds
    buckets = np.floor(scaled + 0.5).astype(np.int64)
    return DiscreteTimings(
        buckets=buckets,
        bucket_count=bucket_count,
        bucket_width=budget.seconds / bucket_count,
    )


@dataclass(frozen=True)
class Profile:
    """One grid index per layer."""

    choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))

    def validate(self, num_layers: int, num_levels: int) -> None:
        if len(self.choices) != num_layers:
            raise ValidationError(f"profile has {len(self.choices)} choices for {num_layers} layers")
        if any(not 0 <= c < num_levels for c in self.choices):
            raise ValidationError("profile contains an out-of-range grid index")

    def sparsities(self, grid: SparsityGrid) -> list[float]:
        return [float(grid.levels[c]) for c in self.choices]

    @staticmethod
    def dense(num_layers: int) -> "Profile":
        return Profile(choices=(0,) * num_layers)


@dataclass(frozen=True)
class SkipList:
    """Layers pinned to the dense choice."""

    pinned_dense: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "pinned_dense", frozenset(int(i) for i in self.pinned_dense))
        if any(i < 0 for i in self.pinned_dense):
            raise ValidationError("skip list indices must be nonnegative")

    def validate(self, num_layers: int) -> None:
        bad = [i for i in self.pinned_dense if i >= num_layers]
        if bad:
            raise ValidationError(f"skip list indices {bad} out of range for {num_layers} layers")

    @staticmethod
    def first_and_last(num_layers: int) -> "SkipList":
        return SkipList(pinned_dense=frozenset({0, num_layers - 1}))

    @staticmethod
    def none() -> "SkipList":
        return SkipList()


def parse_skip_spec(spec: str, num_layers: int) -> SkipList:
    """Parse a skip-list string: "none", or comma-separated tokens from
    {"first", "last", <index>}."""
    text = spec.strip().lower()
    if text == "none" or text == "":
        return SkipList.none()
    pinned: set[int] = set()
    for token in text.split(","):
        token = token.strip()
        if token == "first":
            pinned.add(0)
        elif token == "last":
            pinned.add(num_layers - 1)
        else:
            try:
                pinned.add(int(token))
            except ValueError:
                raise ValidationError(f"unrecognized skip token {token!r}") from None
    skip = SkipList(pinned_dense=frozenset(pinned))
    skip.validate(num_layers)
    return skip


def profile_time(profile: Profile, timing: TimingTable) -> float:
    """Total layer time of a profile in seconds (base time excluded)."""
    profile.validate(timing.num_layers, len(timing.grid))
    idx = np.fromiter(profile.choices, dtype=np.int64, count=timing.num_layers)
    return float(np.sum(timing.times[np.arange(timing.num_layers), idx]))


# --- timing file ingestion -------------------------------------------------

def _load_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as e:
        raise MalformedInputError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise MalformedInputError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise MalformedInputError(f"{path}: expected a JSON object at top level")
    return data


def load_timing_table(path: str | Path) -> TimingTable:
    """Read a timing file:

    {"base_time_s": float,
     "grid": {"lower": f, "upper": f, "n_levels": int},
     "layers": [{"name": str, "times_s": [float; |S|]}]}
    """
    data = _load_json(path)
    try:
        gspec = data["grid"]
        grid = make_grid(float(gspec["lower"]), float(gspec["upper"]), int(gspec["n_levels"]))
        base = float(data["base_time_s"])
        layers = data["layers"]
        names = [str(entry["name"]) for entry in layers]
        rows = [entry["times_s"] for entry in layers]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedInputError(f"{path}: missing or ill-typed field ({e})") from e
    except ValidationError as e:
        raise MalformedInputError(f"{path}: bad grid spec: {e}") from e
    if not rows:
        raise MalformedInputError(f"{path}: at least one layer required")
    width = len(grid)
    for name, row in zip(names, rows):
        if len(row) != width:
            raise MalformedInputError(
                f"{path}: layer {name!r} has {len(row)} times but the grid has {width} levels"
            )
    try:
        return TimingTable(
            layer_names=tuple(names),
            times=np.array(rows, dtype=np.float64),
            base_time=base,
            grid=grid,
        )
    except ValidationError as e:
        raise MalformedInputError(f"{path}: {e}") from e


def save_timing_table(timing: TimingTable, path: str | Path) -> None:
    grid = timing.grid
    n_levels = len(grid) - 1
    doc = {
        "base_time_s": timing.base_time,
        "grid": {
            "lower": float(grid.levels[1]),
            "upper": float(grid.levels[-1]),
            "n_levels": n_levels,
        },
        "layers": [
            {"name": name, "times_s": [float(x) for x in row]}
            for name, row in zip(timing.layer_names, timing.times)
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
