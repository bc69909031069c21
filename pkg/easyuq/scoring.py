"""Proper scoring rules for step and mixture predictive distributions."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .const import (
    ATTR_MEAN_SCORE,
    ATTR_N_CASES,
    ATTR_N_INFINITE,
    ATTR_PER_CASE,
    SCORE_CRPS,
    SCORE_LOGS,
)
from .core import (
    EmptySampleError,
    InvalidInputError,
    KernelSpec,
    MixtureDistribution,
    StepCDF,
)
from .smoothing import (
    kernel_excess,
    log_kernel_from_squares,
    log_weights,
    mixture_cdf,
    mixture_logpdf,
    pair_excess,
    weighted_logsumexp,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreReport:
    """Mean score over a collection of forecast cases."""

    mean_score: float
    n_cases: int
    per_case: np.ndarray | None = field(default=None, repr=False)
    n_infinite: int = 0

    def as_dict(self, include_cases: bool = False) -> dict:
        result = {
            ATTR_MEAN_SCORE: self.mean_score,
            ATTR_N_CASES: self.n_cases,
            ATTR_N_INFINITE: self.n_infinite,
        }
        if include_cases and self.per_case is not None:
            result[ATTR_PER_CASE] = self.per_case.tolist()
        return result


def mean_score(scores: Iterable[float] | np.ndarray, keep_cases: bool = True) -> ScoreReport:
    """Arithmetic mean of case scores; +inf propagates."""
    values = np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores, dtype=float).ravel()
    if values.size == 0:
        raise EmptySampleError("empty sample")
    n_infinite = int(np.count_nonzero(np.isposinf(values)))
    if n_infinite:
        _LOGGER.warning("%d of %d scores are infinite", n_infinite, values.size)
    return ScoreReport(
        mean_score=float(np.mean(values)),
        n_cases=int(values.size),
        per_case=values.copy() if keep_cases else None,
        n_infinite=n_infinite,
    )


def _step_crps(support: np.ndarray, masses: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Energy form of the CRPS for rows of point masses on a sorted support."""
    absolute = np.abs(support[None, :] - y[:, None])
    expected_error = np.sum(masses * absolute, axis=1)
    # sum_{j,l} w_j w_l |z_j - z_l| = 2 sum_j w_j (z_j W_{<j} - S_{<j}) on sorted z
    weight_before = np.cumsum(masses, axis=1) - masses
    moment_before = np.cumsum(masses * support, axis=1) - masses * support
    spread = np.sum(masses * (support * weight_before - moment_before), axis=1)
    return np.maximum(expected_error - spread, 0.0)


def crps_step(cdf: StepCDF, y: float) -> float:
    """Exact CRPS of a step CDF: sum w_j|y_j - y| - 1/2 sum w_j w_l |y_j - y_l|."""
    return float(_step_crps(cdf.support, cdf.masses[None, :], np.asarray([y], dtype=float))[0])


def crps_step_many(support: np.ndarray, cumulative: np.ndarray, ys: Sequence[float] | np.ndarray) -> np.ndarray:
    """CRPS for each row of a cumulative matrix (shared support) against ys."""
    cumulative = np.atleast_2d(np.asarray(cumulative, dtype=float))
    masses = np.diff(cumulative, axis=1, prepend=0.0)
    return _step_crps(np.asarray(support, dtype=float), masses, np.asarray(ys, dtype=float))


class CaseScorer:
    """Scores row i of a weight matrix, smoothed over shared locations, at outcomes[i].

    Distances between outcomes and locations are kernel independent and kept,
    so a bandwidth search pays only for kernel evaluations at each step.
    Rows are renormalized to unit mass; locations without mass in any row are
    dropped.
    """

    def __init__(
        self,
        locations: Sequence[float] | np.ndarray,
        weights: Sequence[Sequence[float]] | np.ndarray,
        outcomes: Sequence[float] | np.ndarray,
    ) -> None:
        """Initialize."""
        locations = np.asarray(locations, dtype=float)
        weights = np.clip(np.atleast_2d(np.asarray(weights, dtype=float)), 0.0, None)
        outcomes = np.asarray(outcomes, dtype=float).ravel()
        if weights.shape != (outcomes.size, locations.size):
            raise InvalidInputError(
                f"weights of shape {weights.shape} do not match {outcomes.size} outcomes "
                f"and {locations.size} locations"
            )
        if outcomes.size == 0:
            raise EmptySampleError("empty sample")
        if not np.all(np.isfinite(outcomes)):
            raise InvalidInputError("outcomes must be finite")
        totals = weights.sum(axis=1)
        if np.any(totals <= 0):
            raise InvalidInputError("every forecast needs positive total mass")

        used = np.any(weights > 0, axis=0)
        self.locations = locations[used]
        self.weights = weights[:, used] / totals[:, None]
        self.outcomes = outcomes
        self.offsets = self.locations[None, :] - outcomes[:, None]

    @cached_property
    def _squared_offsets(self) -> np.ndarray:
        return self.offsets * self.offsets

    @cached_property
    def _weight_logs(self) -> np.ndarray:
        return log_weights(self.weights)

    @cached_property
    def _step_crps(self) -> np.ndarray:
        order = np.argsort(self.locations)
        return _step_crps(self.locations[order], self.weights[:, order], self.outcomes)

    @cached_property
    def _gaps(self) -> np.ndarray:
        return np.abs(self.locations[:, None] - self.locations[None, :])

    def logs(self, spec: KernelSpec) -> np.ndarray:
        """-log f_i(y_i); +inf where the density underflows."""
        log_terms = log_kernel_from_squares(spec, self._squared_offsets / (spec.h * spec.h)) - math.log(spec.h)
        scores = -weighted_logsumexp(log_terms, self._weight_logs)
        n_infinite = int(np.count_nonzero(np.isposinf(scores)))
        if n_infinite:
            _LOGGER.debug("Density underflow in %d of %d cases, scoring +inf", n_infinite, scores.size)
        return scores

    def crps(self, spec: KernelSpec) -> np.ndarray:
        """Energy form E|X - y| - E|X - X'|/2 with X a draw from the mixture.

        It splits into the step-distribution CRPS plus h times the kernel
        excess over single components minus half the excess over pairs.
        """
        h = spec.h
        single = np.sum(self.weights * kernel_excess(spec, self.offsets / h), axis=1)
        pairs = np.sum((self.weights @ pair_excess(spec, self._gaps / h)) * self.weights, axis=1)
        return np.maximum(self._step_crps + h * (single - 0.5 * pairs), 0.0)

    def __call__(self, spec: KernelSpec, score: str = SCORE_LOGS) -> np.ndarray:
        if score == SCORE_LOGS:
            return self.logs(spec)
        if score == SCORE_CRPS:
            return self.crps(spec)
        raise InvalidInputError(f"unknown score {score!r}")


def crps_mixture(mix: MixtureDistribution, y: float) -> float:
    """CRPS of a kernel mixture in closed form over its components."""
    if not math.isfinite(y):
        raise InvalidInputError(f"outcome must be finite, got {y!r}")
    return float(CaseScorer(mix.locations, mix.weights[None, :], [y]).crps(mix.kernel)[0])


def logs_mixture(mix: MixtureDistribution, y: float) -> float:
    """Logarithmic score -log f(y); an exactly zero density scores +inf."""
    log_density = float(mixture_logpdf(mix, y))
    if log_density == -math.inf:
        _LOGGER.debug("Density underflow at y=%s, scoring +inf", y)
        return math.inf
    return -log_density


def score_mixture(mix: MixtureDistribution, y: float, score: str = SCORE_LOGS) -> float:
    if score == SCORE_LOGS:
        return logs_mixture(mix, y)
    if score == SCORE_CRPS:
        return crps_mixture(mix, y)
    raise InvalidInputError(f"unknown score {score!r}")


def mae(point_forecasts: Sequence[float] | np.ndarray, outcomes: Sequence[float] | np.ndarray) -> float:
    """Mean absolute error of single-valued forecasts, the CRPS of point masses."""
    forecasts = np.asarray(point_forecasts, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if forecasts.size == 0:
        raise EmptySampleError("empty sample")
    if forecasts.shape != outcomes.shape:
        raise InvalidInputError("forecasts and outcomes differ in length")
    return float(np.mean(np.abs(forecasts - outcomes)))


def pit_step(cdf: StepCDF, y: float, rng: np.random.Generator) -> float:
    """Randomized probability integral transform, uniform on [F(y-), F(y)]."""
    upper = float(cdf.evaluate(y))
    position = int(np.searchsorted(cdf.support, y, side="left"))
    lower = 0.0 if position == 0 else float(cdf.cumulative[position - 1])
    return lower + rng.uniform() * (upper - lower)


def pit_values(
    forecasts: Sequence[StepCDF | MixtureDistribution],
    outcomes: Sequence[float] | np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """PIT values of the outcomes; uniform for calibrated forecasts."""
    if len(forecasts) != len(outcomes):
        raise InvalidInputError("forecasts and outcomes differ in length")
    rng = rng if rng is not None else np.random.default_rng()
    values = []
    for forecast, y in zip(forecasts, outcomes):
        if isinstance(forecast, StepCDF):
            values.append(pit_step(forecast, float(y), rng))
        else:
            values.append(float(mixture_cdf(forecast, float(y))))
    return np.asarray(values)


def interval_coverage(
    lower: Sequence[float] | np.ndarray,
    upper: Sequence[float] | np.ndarray,
    outcomes: Sequence[float] | np.ndarray,
) -> tuple[float, float]:
    """Empirical coverage and mean width of prediction intervals [lower, upper]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if outcomes.size == 0:
        raise EmptySampleError("empty sample")
    if np.any(upper < lower):
        raise InvalidInputError("interval bounds are crossed")
    covered = (outcomes >= lower) & (outcomes <= upper)
    return float(np.mean(covered)), float(np.mean(upper - lower))


def mixture_scores(
    locations: np.ndarray,
    weights: np.ndarray,
    outcomes: np.ndarray,
    spec: KernelSpec,
    score: str = SCORE_LOGS,
) -> np.ndarray:
    """Score row i of `weights`, smoothed over `locations` with `spec`, at outcomes[i]."""
    return CaseScorer(locations, weights, outcomes)(spec, score)
