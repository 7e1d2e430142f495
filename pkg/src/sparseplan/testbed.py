"""Synthetic instance generators: timing tables with realistic speedup
shapes, ground-truth loss surfaces (additive and cross-layer coupled), and
half-normal weight statistics.

These make search behavior testable at desk scale: the additive surface's
exact optimum is recoverable by the solver on the true error table, while
the coupled surface rewards strategies that account for interactions.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass

import numpy as np

from .core import SparsityGrid, TimingTable, _load_json
from .error_models import QUANTILE_POINTS, LayerWeightStats
from .evaluators import Evaluator
from .exceptions import MalformedInputError, ValidationError
from .rng import SplitMix64

JITTER = 0.02  # multiplicative timing noise bound, per layer


@dataclass(frozen=True)
class SyntheticTimingSpec:
    """Shape parameters for generated per-layer timing curves.

    Each layer's curve is dense * max(floor, (1 + eps) * (1 - s)^beta) with
    one seeded jitter draw eps in [-jitter, jitter] per layer (the dense
    entry is exempt). low_sparsity_slowdown > 0 additionally floors the
    sparse entries at slowdown * (1 - s) * dense, modeling kernels that lose
    to dense execution at low sparsity; values above ~1.7 make t(0.4) exceed
    the dense time.
    """

    dense_times: tuple[float, ...]
    betas: tuple[float, ...]
    floors: tuple[float, ...]
    seed: int = 0
    base_time: float = 0.0
    low_sparsity_slowdown: float = 0.0
    jitter: float = JITTER

    def __post_init__(self):
        n = len(self.dense_times)
        if n < 1 or len(self.betas) != n or len(self.floors) != n:
            raise ValidationError("dense_times, betas, floors must have equal nonzero length")
        if any(t <= 0 or not np.isfinite(t) for t in self.dense_times):
            raise ValidationError("dense times must be positive and finite")
        if any(b <= 0 for b in self.betas):
            raise ValidationError("speedup exponents must be positive")
        if any(not 0.0 <= f < 1.0 for f in self.floors):
            raise ValidationError("overhead floors must lie in [0, 1)")
        if self.base_time < 0 or self.low_sparsity_slowdown < 0:
            raise ValidationError("base_time and low_sparsity_slowdown must be >= 0")
        if not 0.0 <= self.jitter < 1.0:
            raise ValidationError("jitter must lie in [0, 1)")

    @property
    def num_layers(self) -> int:
        return len(self.dense_times)


@dataclass(frozen=True)
class SyntheticLossSpec:
    """Parameters of the synthetic loss surfaces.

    additive part: sum_l amplitudes[l] * (i_l / (|S|-1))^exponents[l];
    coupled part adds sum_l couplings[l] * i_l * i_{l+1} / (|S|-1)^2 over
    consecutive pairs. All-dense is exactly 0 and the loss is non-decreasing
    in every coordinate.
    """

    amplitudes: tuple[float, ...]
    exponents: tuple[float, ...]
    couplings: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        n = len(self.amplitudes)
        if n < 1 or len(self.exponents) != n:
            raise ValidationError("amplitudes and exponents must have equal nonzero length")
        if len(self.couplings) != max(0, n - 1):
            raise ValidationError("couplings must have one entry per consecutive layer pair")
        if any(a < 0 or not np.isfinite(a) for a in self.amplitudes):
            raise ValidationError("amplitudes must be >= 0 and finite")
        if any(p < 1 for p in self.exponents):
            raise ValidationError("exponents must be >= 1")
        if any(g < 0 for g in self.couplings):
            raise ValidationError("couplings must be >= 0")

    @property
    def num_layers(self) -> int:
        return len(self.amplitudes)


def gen_timings(spec: SyntheticTimingSpec, grid: SparsityGrid) -> TimingTable:
    """Generate a timing table from the spec; deterministic per seed."""
    rng = SplitMix64(spec.seed)
    levels = grid.levels
    num_layers = spec.num_layers
    times = np.empty((num_layers, levels.size), dtype=np.float64)
    for layer in range(num_layers):
        eps = rng.uniform(-spec.jitter, spec.jitter)
        curve = (1.0 + eps) * (1.0 - levels) ** spec.betas[layer]
        curve[0] = 1.0
        if spec.low_sparsity_slowdown > 0.0:
            slow = spec.low_sparsity_slowdown * (1.0 - levels[1:])
            curve[1:] = np.maximum(curve[1:], slow)
        np.maximum(curve, spec.floors[layer], out=curve)
        times[layer] = spec.dense_times[layer] * curve
    names = tuple(f"layer{idx:02d}" for idx in range(num_layers))
    return TimingTable(layer_names=names, times=times, base_time=spec.base_time, grid=grid)


class SyntheticLossEvaluator(Evaluator):
    """In-process evaluator of the synthetic loss; concurrent-safe and pure."""

    concurrent_safe = True

    def __init__(self, spec: SyntheticLossSpec, grid: SparsityGrid, coupled: bool):
        if len(grid) < 2:
            raise ValidationError("grid must have at least two levels")
        self.spec = spec
        self.grid = grid
        self.num_layers = spec.num_layers
        self.coupled = coupled
        self._den = float(len(grid) - 1)
        self._amps = np.asarray(spec.amplitudes, dtype=np.float64)
        self._exps = np.asarray(spec.exponents, dtype=np.float64)
        self._gammas = np.asarray(spec.couplings, dtype=np.float64)

    def evaluate(self, profile) -> float:
        idx = np.asarray(profile.choices, dtype=np.float64)
        if idx.size != self.num_layers:
            raise ValidationError(f"profile has {idx.size} layers, evaluator expects {self.num_layers}")
        value = float(np.sum(self._amps * (idx / self._den) ** self._exps))
        if self.coupled and self._gammas.size:
            value += float(np.sum(self._gammas * idx[:-1] * idx[1:])) / (self._den * self._den)
        return value


def additive_loss(spec: SyntheticLossSpec, grid: SparsityGrid) -> SyntheticLossEvaluator:
    """Evaluator for the additive part only (couplings ignored)."""
    return SyntheticLossEvaluator(spec, grid, coupled=False)


def coupled_loss(spec: SyntheticLossSpec, grid: SparsityGrid) -> SyntheticLossEvaluator:
    """Evaluator for the additive part plus consecutive-pair interactions."""
    return SyntheticLossEvaluator(spec, grid, coupled=True)


def additive_error_table(spec: SyntheticLossSpec, grid: SparsityGrid):
    """The exact per-layer error table of the additive loss: the solver run
    on this table is the ground-truth optimum of additive_loss."""
    from .dp import ErrorTable

    width = len(grid)
    base = np.arange(width, dtype=np.float64) / (width - 1)
    amps = np.asarray(spec.amplitudes, dtype=np.float64)
    exps = np.asarray(spec.exponents, dtype=np.float64)
    return ErrorTable(errors=amps[:, None] * base[None, :] ** exps[:, None])


# --- random instance construction -------------------------------------------

def random_timing_spec(
    num_layers: int,
    seed: int,
    dense_range: tuple[float, float] = (0.0005, 0.02),
    beta_range: tuple[float, float] = (0.4, 1.6),
    floor_range: tuple[float, float] = (0.0, 0.08),
    base_fraction: tuple[float, float] = (0.02, 0.08),
    low_sparsity_slowdown: float = 0.0,
) -> SyntheticTimingSpec:
    """Draw a timing spec with SplitMix64(seed); base time is a seeded
    fraction of the summed dense times."""
    rng = SplitMix64(seed)
    dense = [rng.uniform(*dense_range) for _ in range(num_layers)]
    betas = [rng.uniform(*beta_range) for _ in range(num_layers)]
    floors = [rng.uniform(*floor_range) for _ in range(num_layers)]
    base = rng.uniform(*base_fraction) * sum(dense)
    return SyntheticTimingSpec(
        dense_times=tuple(dense),
        betas=tuple(betas),
        floors=tuple(floors),
        seed=seed,
        base_time=base,
        low_sparsity_slowdown=low_sparsity_slowdown,
    )


def random_loss_spec(
    num_layers: int,
    seed: int,
    amp_range: tuple[float, float] = (0.05, 1.0),
    exp_range: tuple[float, float] = (2.0, 2.0),
    coupling_scale: float = 0.0,
) -> SyntheticLossSpec:
    """Draw a loss spec with SplitMix64(seed). The default exponent range
    pins p = 2, the regime where the quadratic model is exact."""
    rng = SplitMix64(seed)
    amps = [rng.uniform(*amp_range) for _ in range(num_layers)]
    exps = [rng.uniform(*exp_range) for _ in range(num_layers)]
    gammas = [rng.uniform(0.0, coupling_scale) for _ in range(max(0, num_layers - 1))]
    return SyntheticLossSpec(
        amplitudes=tuple(amps), exponents=tuple(exps), couplings=tuple(gammas), seed=seed
    )


def half_normal_quantiles(sigma: float, count: int, points: int = QUANTILE_POINTS) -> np.ndarray:
    """Quantile table of |w| for w ~ Normal(0, sigma^2): q(u) =
    sigma * Phi^{-1}((1+u)/2), with the top knot capped at the
    1 - 1/(2*count) quantile so a finite sample's maximum stays finite."""
    if sigma <= 0 or count < 1:
        raise ValidationError("sigma must be positive and count >= 1")
    nd = statistics.NormalDist()
    u = np.minimum(np.linspace(0.0, 1.0, points), 1.0 - 0.5 / count)
    return np.array([sigma * nd.inv_cdf((1.0 + x) / 2.0) for x in u])


def random_weight_stats(
    num_layers: int,
    seed: int,
    sigma_range: tuple[float, float] = (0.005, 0.05),
    count_range: tuple[int, int] = (4096, 1048576),
) -> LayerWeightStats:
    """Half-normal magnitude statistics with seeded per-layer scale/count."""
    rng = SplitMix64(seed)
    names, counts, tables = [], [], []
    for layer in range(num_layers):
        sigma = rng.uniform(*sigma_range)
        count = count_range[0] + rng.below(count_range[1] - count_range[0] + 1)
        names.append(f"layer{layer:02d}")
        counts.append(count)
        tables.append(half_normal_quantiles(sigma, count))
    return LayerWeightStats(
        layer_names=tuple(names),
        counts=np.array(counts, dtype=np.int64),
        quantiles=np.array(tables),
    )


# --- spec file ingestion -----------------------------------------------------

def load_loss_spec(path) -> SyntheticLossSpec:
    """Read a loss-spec file: {"amplitudes": [...], "exponents": [...],
    "couplings": [...], "seed": int}."""
    data = _load_json(path)
    try:
        spec = SyntheticLossSpec(
            amplitudes=tuple(float(x) for x in data["amplitudes"]),
            exponents=tuple(float(x) for x in data["exponents"]),
            couplings=tuple(float(x) for x in data.get("couplings", [])),
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedInputError(f"{path}: {e}") from e
    return spec


def save_loss_spec(spec: SyntheticLossSpec, path) -> None:
    doc = {
        "amplitudes": list(spec.amplitudes),
        "exponents": list(spec.exponents),
        "couplings": list(spec.couplings),
        "seed": spec.seed,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
