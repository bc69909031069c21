"""Weighted antitonic least squares via pool-adjacent-violators.

The fit negates the sequence and delegates to scikit-learn's isotonic PAV. The
min-max oracles are O(k^3) reference implementations used by the tests.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.isotonic import isotonic_regression

from .core import EmptySampleError, InvalidInputError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightedSequence:
    """Values with strictly positive weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if values.size == 0:
            raise EmptySampleError("empty sample")
        if values.shape != weights.shape:
            raise InvalidInputError("values and weights differ in length")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("values must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise InvalidInputError("weights must be positive and finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def unit(cls, values: Sequence[float] | np.ndarray) -> WeightedSequence:
        values = np.asarray(values, dtype=float)
        return cls(values=values, weights=np.ones_like(values))

    def __len__(self) -> int:
        return int(self.values.size)


def antitonic_fit(seq: WeightedSequence) -> np.ndarray:
    """Return the nonincreasing weighted least squares fit of seq.

    Each output value is the weighted mean of the contiguous block it was pooled
    into. The antitonic problem is the isotonic one on the negated sequence.
    """
    if len(seq) == 1:
        return seq.values.copy()
    fitted = isotonic_regression(-seq.values, sample_weight=seq.weights, increasing=True)
    return -np.asarray(fitted, dtype=float)


@dataclass(frozen=True)
class TiePooling:
    """Cases grouped by tied covariate value, sorted by that value."""

    unique_x: np.ndarray
    group: np.ndarray
    weights: np.ndarray

    @classmethod
    def of(cls, x: Sequence[float] | np.ndarray) -> TiePooling:
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            raise EmptySampleError("empty sample")
        unique_x, group = np.unique(x, return_inverse=True)
        return cls(unique_x=unique_x, group=group, weights=np.bincount(group).astype(float))

    def pool(self, values: Sequence[float] | np.ndarray) -> np.ndarray:
        """Mean of the values in each tie group."""
        values = np.asarray(values, dtype=float).ravel()
        if values.size != self.group.size:
            raise InvalidInputError("values and covariates differ in length")
        return np.bincount(self.group, weights=values, minlength=self.unique_x.size) / self.weights

    def sequence(self, values: Sequence[float] | np.ndarray) -> WeightedSequence:
        """Pooled values weighted by tie counts, ready for antitonic_fit."""
        return WeightedSequence(values=self.pool(values), weights=self.weights)


def pool_ties(
    x: Sequence[float] | np.ndarray, values: Sequence[float] | np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pool values at tied covariates into one weighted point each.

    Returns:
        (unique_x, pooled mean values, tie counts as weights)
    """
    ties = TiePooling.of(x)
    return ties.unique_x, ties.pool(values), ties.weights


def _minmax(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    k = values.size
    cum_w = np.concatenate(([0.0], np.cumsum(weights)))
    cum_wv = np.concatenate(([0.0], np.cumsum(weights * values)))
    # block[a, b] = weighted mean of values[a..b], meaningful for a <= b
    with np.errstate(divide="ignore", invalid="ignore"):
        block = (cum_wv[None, 1:] - cum_wv[:-1, None]) / (cum_w[None, 1:] - cum_w[:-1, None])
    result = np.empty(k)
    for j in range(k):
        result[j] = block[: j + 1, j:].max(axis=1).min()
    return result


def minmax_oracle(indicators: Sequence[float] | np.ndarray) -> np.ndarray:
    """min over k <= j of max over l >= j of the block average of indicators[k..l]."""
    values = np.asarray(indicators, dtype=float).ravel()
    if values.size == 0:
        raise EmptySampleError("empty sample")
    return _minmax(values, np.ones_like(values))


def weighted_minmax_oracle(seq: WeightedSequence) -> np.ndarray:
    """Weighted generalization of minmax_oracle, block averages weighted by seq.weights."""
    return _minmax(seq.values, seq.weights)
