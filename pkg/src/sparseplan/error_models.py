"""Constructors of error tables: the learned quadratic model plus the
hand-crafted magnitude- and loss-based metrics used for ablations.

Weight distributions enter as per-layer quantile tables of |w| rather than
raw dumps. The table convention is inverted-CDF: entry j is the smallest
magnitude whose empirical CDF reaches j/1000, i.e. the largest weight dropped
when pruning a fraction j/1000 by magnitude. Values between knots are read
by linear interpolation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Profile, SparsityGrid, _frozen, _load_json
from .exceptions import MalformedInputError, ValidationError

QUANTILE_POINTS = 1001


@dataclass(frozen=True, eq=False)
class SensitivityVector:
    """Per-layer coefficients in [0, 1] parametrizing the quadratic model."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim != 1 or c.size < 1:
            raise ValidationError("sensitivity coefficients must be a nonempty vector")
        if not np.all(np.isfinite(c)) or np.any(c < 0) or np.any(c > 1):
            raise ValidationError("sensitivity coefficients must lie in [0, 1]")
        object.__setattr__(self, "coeffs", _frozen(c))

    def __len__(self) -> int:
        return int(self.coeffs.size)


@dataclass(frozen=True, eq=False)
class LayerWeightStats:
    """Element counts and |w| quantile tables for every layer."""

    layer_names: tuple[str, ...]
    counts: np.ndarray  # int64, shape (L,)
    quantiles: np.ndarray  # float64, shape (L, QUANTILE_POINTS), rows non-decreasing

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        q = np.asarray(self.quantiles, dtype=np.float64)
        if counts.ndim != 1 or q.ndim != 2 or counts.size != q.shape[0]:
            raise ValidationError("counts and quantile rows must cover the same layers")
        if len(self.layer_names) != counts.size:
            raise ValidationError("layer_names length must match counts")
        if np.any(counts < 1):
            raise ValidationError("layer element counts must be >= 1")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise ValidationError("quantile tables must be finite and nonnegative")
        if np.any(np.diff(q, axis=1) < 0):
            raise ValidationError("quantile tables must be non-decreasing")
        object.__setattr__(self, "layer_names", tuple(self.layer_names))
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "quantiles", _frozen(q))

    @property
    def num_layers(self) -> int:
        return int(self.counts.size)

    def quantile_at(self, layer: int, u: float | np.ndarray) -> np.ndarray:
        """q(u) for one layer, linearly interpolated between knots."""
        knots = np.linspace(0.0, 1.0, self.quantiles.shape[1])
        return np.interp(u, knots, self.quantiles[layer])

    def sparsity_below(self, layer: int, threshold: float) -> float:
        """Fraction of the layer's weights with |w| < threshold (inverse of
        the quantile table, linearly interpolated)."""
        q = self.quantiles[layer]
        knots = np.linspace(0.0, 1.0, q.size)
        if threshold <= q[0]:
            return 0.0
        if threshold >= q[-1]:
            return 1.0
        j = int(np.searchsorted(q, threshold, side="left"))
        lo, hi = q[j - 1], q[j]
        if hi == lo:
            return float(knots[j])
        return float(knots[j - 1] + (knots[j] - knots[j - 1]) * (threshold - lo) / (hi - lo))


def abs_quantile_table(magnitudes: np.ndarray, points: int = QUANTILE_POINTS) -> np.ndarray:
    """Inverted-CDF quantile table of |values| at u = 0, 1/(points-1), ..., 1."""
    mags = np.sort(np.abs(np.asarray(magnitudes, dtype=np.float64).ravel()))
    n = mags.size
    if n == 0:
        raise ValidationError("cannot build a quantile table from zero weights")
    u = np.linspace(0.0, 1.0, points)
    idx = np.clip(np.ceil(u * n).astype(np.int64), 1, n) - 1
    return mags[idx]


def quadratic_errors(c: SensitivityVector, grid: SparsityGrid) -> "ErrorTable":
    """errors[l][i] = c_l * (i / (|S|-1))^2 over grid indices i."""
    from .dp import ErrorTable

    width = len(grid)
    base = (np.arange(width, dtype=np.float64) / (width - 1)) ** 2
    return ErrorTable(errors=np.outer(c.coeffs, base))


def _squared_integral_prefix(q: np.ndarray) -> np.ndarray:
    """Prefix integrals of q(u)^2 at each knot, exact for the piecewise-
    linear interpolant: per interval h*(a^2 + a*b + b^2)/3."""
    h = 1.0 / (q.size - 1)
    a, b = q[:-1], q[1:]
    pieces = h * (a * a + a * b + b * b) / 3.0
    return np.concatenate([[0.0], np.cumsum(pieces)])


def squared_weight_errors(
    stats: LayerWeightStats, grid: SparsityGrid, normalized: bool = False
) -> "ErrorTable":
    """Sum of squared magnitudes of the weights pruned at each level,
    estimated as count * integral of q(u)^2 over [0, s]; per-element when
    normalized."""
    from .dp import ErrorTable

    levels = grid.levels
    out = np.zeros((stats.num_layers, levels.size), dtype=np.float64)
    for layer in range(stats.num_layers):
        q = stats.quantiles[layer]
        npts = q.size
        h = 1.0 / (npts - 1)
        prefix = _squared_integral_prefix(q)
        j = np.minimum((levels / h).astype(np.int64), npts - 2)
        w = levels - j * h
        a = q[j]
        v = a + (q[j + 1] - a) * (w / h)
        integral = prefix[j] + w * (a * a + a * v + v * v) / 3.0
        scale = 1.0 if normalized else float(stats.counts[layer])
        out[layer] = scale * integral
    out[:, 0] = 0.0
    return ErrorTable(errors=out)


def custom_norm_errors(stats: LayerWeightStats, grid: SparsityGrid) -> "ErrorTable":
    """Largest dropped magnitude divided by remaining density, per level;
    zero at the dense choice by convention."""
    from .dp import ErrorTable

    levels = grid.levels
    out = np.zeros((stats.num_layers, levels.size), dtype=np.float64)
    for layer in range(stats.num_layers):
        dropped_max = stats.quantile_at(layer, levels[1:])
        out[layer, 1:] = dropped_max / (1.0 - levels[1:])
    return ErrorTable(errors=out)


def layerwise_loss_errors(evaluator, grid: SparsityGrid, dense_profile: Profile) -> "ErrorTable":
    """Loss increase from pruning exactly one layer at a time.

    Costs L*(|S|-1) + 1 evaluations. Negative deltas are evaluation noise
    and clamp to zero so the solver's nonnegativity contract holds.
    """
    from .dp import ErrorTable

    num_layers = len(dense_profile.choices)
    width = len(grid)
    base = evaluator.evaluate(dense_profile)
    out = np.zeros((num_layers, width), dtype=np.float64)
    for layer in range(num_layers):
        for i in range(1, width):
            probe = list(dense_profile.choices)
            probe[layer] = i
            delta = evaluator.evaluate(Profile(choices=tuple(probe))) - base
            out[layer, i] = max(0.0, delta)
    return ErrorTable(errors=out)


# --- weight-stats file ingestion --------------------------------------------

def load_weight_stats(path: str | Path) -> LayerWeightStats:
    """Read a weight-stats file:

    {"layers": [{"name": str, "count": int, "abs_quantiles": [float; 1001]}]}
    """
    data = _load_json(path)
    try:
        layers = data["layers"]
        names = [str(entry["name"]) for entry in layers]
        counts = [int(entry["count"]) for entry in layers]
        tables = [entry["abs_quantiles"] for entry in layers]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedInputError(f"{path}: missing or ill-typed field ({e})") from e
    if not names:
        raise MalformedInputError(f"{path}: at least one layer required")
    for name, table in zip(names, tables):
        if len(table) != QUANTILE_POINTS:
            raise MalformedInputError(
                f"{path}: layer {name!r} has {len(table)} quantile points, expected {QUANTILE_POINTS}"
            )
    try:
        return LayerWeightStats(
            layer_names=tuple(names),
            counts=np.array(counts, dtype=np.int64),
            quantiles=np.array(tables, dtype=np.float64),
        )
    except ValidationError as e:
        raise MalformedInputError(f"{path}: {e}") from e


def save_weight_stats(stats: LayerWeightStats, path: str | Path) -> None:
    doc = {
        "layers": [
            {
                "name": name,
                "count": int(count),
                "abs_quantiles": [float(x) for x in row],
            }
            for name, count, row in zip(stats.layer_names, stats.counts, stats.quantiles)
        ]
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_sensitivity(path: str | Path) -> SensitivityVector:
    """Read a sensitivity file: {"coeffs": [float; L]}."""
    data = _load_json(path)
    try:
        coeffs = [float(x) for x in data["coeffs"]]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedInputError(f"{path}: missing or ill-typed 'coeffs' ({e})") from e
    try:
        return SensitivityVector(coeffs=np.array(coeffs, dtype=np.float64))
    except ValidationError as e:
        raise MalformedInputError(f"{path}: {e}") from e


def load_error_table(path: str | Path, expected_levels: int | None = None) -> "ErrorTable":
    """Read an error-table file: {"layers": [{"name": str, "errors": [float; |S|]}]}."""
    from .dp import ErrorTable

    data = _load_json(path)
    try:
        layers = data["layers"]
        rows = [[float(x) for x in entry["errors"]] for entry in layers]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedInputError(f"{path}: missing or ill-typed field ({e})") from e
    if not rows:
        raise MalformedInputError(f"{path}: at least one layer required")
    width = len(rows[0]) if expected_levels is None else expected_levels
    for i, row in enumerate(rows):
        if len(row) != width:
            raise MalformedInputError(f"{path}: layer {i} has {len(row)} errors, expected {width}")
    try:
        return ErrorTable(errors=np.array(rows, dtype=np.float64))
    except ValidationError as e:
        raise MalformedInputError(f"{path}: {e}") from e
