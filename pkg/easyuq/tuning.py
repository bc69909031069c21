"""Kernel parameter selection for Smooth EasyUQ.

The one-fit criterion fits EasyUQ once and scores each training case against
its own predictive distribution with the mass at the observed outcome removed.
Bandwidths are searched with Brent's method on log(h) inside a bracket derived
from the outcome range.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import idr
from .const import (
    BRENT_LOG_TOL,
    BRENT_MAXITER,
    BRENT_PENALTY,
    DEGENERATION_FACTOR,
    H_CEIL_FRACTION,
    H_FLOOR_FRACTION,
    NU_GRID,
    NU_INF,
    SCORE_LOGS,
    SCORES,
)
from .coordinator import TaskCoordinator
from .core import (
    DegenerateSampleError,
    EmptySampleError,
    IdrModel,
    InvalidInputError,
    KernelSpec,
    NumericalError,
    StepCDF,
    TrainingData,
)
from .scoring import CaseScorer, score_mixture
from .smoothing import smooth

_LOGGER = logging.getLogger(__name__)

# Remaining mass at or below this counts as "nothing left" after removal
_EMPTY_MASS = 1e-12


@dataclass(frozen=True)
class TuningRow:
    """Best bandwidth found for one degrees-of-freedom value."""

    nu: float
    h: float
    criterion: float

    def as_dict(self) -> dict:
        return {"nu": "inf" if math.isinf(self.nu) else self.nu, "h": self.h, "criterion": self.criterion}


@dataclass(frozen=True)
class TuningResult:
    """Selected kernel and the per-nu table it was chosen from."""

    best: KernelSpec
    criterion_value: float
    per_nu: tuple[TuningRow, ...]
    fallback_used: bool = False
    h_bracket: tuple[float, float] = (math.nan, math.nan)
    n_skipped: int = 0

    def as_dict(self) -> dict:
        return {
            "best": self.best.as_dict(),
            "criterion_value": self.criterion_value,
            "per_nu": [row.as_dict() for row in self.per_nu],
            "fallback_used": self.fallback_used,
            "h_bracket": list(self.h_bracket),
            "n_skipped": self.n_skipped,
        }


def bandwidth_bracket(outcomes: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """[h_floor, h_ceil] = [1e-4, 1] times the range of the outcomes."""
    outcomes = np.asarray(outcomes, dtype=float)
    spread = float(np.ptp(outcomes)) if outcomes.size else 0.0
    if spread <= 0:
        raise DegenerateSampleError("degenerate sample: outcomes have zero range")
    return H_FLOOR_FRACTION * spread, H_CEIL_FRACTION * spread


def _score_name(score: str) -> str:
    if score not in SCORES:
        raise InvalidInputError(f"unknown score {score!r}, expected one of {', '.join(SCORES)}")
    return score


class OneFitObjective:
    """One-fit criterion for a fixed model and data, reusable across kernels.

    The rescaled leave-one-value-out weights and the outcome distances do not
    depend on the kernel, so they are computed once.
    """

    def __init__(self, model: IdrModel, data: TrainingData, score: str = SCORE_LOGS) -> None:
        """Initialize."""
        self.score = _score_name(score)
        rows = np.searchsorted(model.unique_x, data.x)
        columns = np.searchsorted(model.thresholds.values, data.y)
        rows = np.clip(rows, 0, model.k - 1)
        columns = np.clip(columns, 0, model.m - 1)
        if not (np.array_equal(model.unique_x[rows], data.x)
                and np.array_equal(model.thresholds.values[columns], data.y)):
            raise InvalidInputError("model was not fitted on these data")

        weights = model.mass_matrix()[rows]
        cases = np.arange(data.n)
        weights[cases, columns] = 0.0
        remaining = weights.sum(axis=1)
        usable = remaining > _EMPTY_MASS

        self.n_cases = data.n
        self.n_skipped = int(np.count_nonzero(~usable))
        if not np.any(usable):
            raise DegenerateSampleError("one-fit criterion undefined")
        if self.n_skipped:
            _LOGGER.warning(
                "One-fit criterion skips %d of %d cases whose predictive mass sits on the outcome",
                self.n_skipped, data.n,
            )
        self.scorer = CaseScorer(model.thresholds.values, weights[usable], data.y[usable])

    def case_scores(self, spec: KernelSpec) -> np.ndarray:
        return self.scorer(spec, self.score)

    def __call__(self, spec: KernelSpec) -> float:
        return float(np.mean(self.case_scores(spec)))


def one_fit_criterion(
    model: IdrModel, data: TrainingData, spec: KernelSpec, score: str = SCORE_LOGS
) -> float:
    """Mean score of the one-fit predictive distributions at the training cases."""
    return OneFitObjective(model, data, score=score)(spec)


class ValidationObjective:
    """Mean out-of-sample score of Smooth EasyUQ on a validation set."""

    def __init__(self, model: IdrModel, validation: TrainingData, score: str = SCORE_LOGS) -> None:
        """Initialize."""
        self.score = _score_name(score)
        weights = np.diff(idr.predict_many(model, validation.x), axis=1, prepend=0.0)
        self.scorer = CaseScorer(model.thresholds.values, weights, validation.y)
        self.n_skipped = 0

    def __call__(self, spec: KernelSpec) -> float:
        return float(np.mean(self.scorer(spec, self.score)))


class StepForecastObjective:
    """Mean score of smoothed step forecasts that did not see their outcomes.

    Suits raw ensembles: every forecast is placed on the union of all supports.
    """

    def __init__(
        self, forecasts: Sequence[StepCDF], outcomes: Sequence[float] | np.ndarray, score: str = SCORE_LOGS
    ) -> None:
        """Initialize."""
        self.score = _score_name(score)
        outcomes = np.asarray(outcomes, dtype=float)
        if len(forecasts) != outcomes.size:
            raise InvalidInputError("forecasts and outcomes differ in length")
        if not forecasts:
            raise EmptySampleError("empty sample")
        locations = np.unique(np.concatenate([cdf.support for cdf in forecasts]))
        weights = np.zeros((len(forecasts), locations.size))
        for i, cdf in enumerate(forecasts):
            weights[i, np.searchsorted(locations, cdf.support)] = cdf.masses
        self.scorer = CaseScorer(locations, weights, outcomes)
        self.n_skipped = 0

    def __call__(self, spec: KernelSpec) -> float:
        return float(np.mean(self.scorer(spec, self.score)))


def brent_minimize(
    f: Callable[[float], float], lo: float, hi: float, tol: float
) -> tuple[float, float]:
    """Bounded Brent minimization (golden section with parabolic steps).

    Non-finite function values are treated as a large penalty. Both bracket
    ends are compared with the interior optimum, so a monotone function yields
    the better boundary.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise NumericalError(f"non-finite bracket [{lo}, {hi}]")
    if not lo < hi:
        raise InvalidInputError(f"bracket must satisfy lo < hi, got [{lo}, {hi}]")

    def penalized(t: float) -> float:
        value = f(t)
        return value if math.isfinite(value) else BRENT_PENALTY

    result = optimize.minimize_scalar(
        penalized, bounds=(lo, hi), method="bounded",
        options={"xatol": tol, "maxiter": BRENT_MAXITER},
    )
    candidates = [(float(result.x), float(result.fun)), (lo, penalized(lo)), (hi, penalized(hi))]
    argmin, value = min(candidates, key=lambda item: item[1])
    return argmin, f(argmin) if value >= BRENT_PENALTY else value


def _search_bandwidth(
    objective: Callable[[KernelSpec], float], nu: float, h_floor: float, h_ceil: float
) -> TuningRow:
    def criterion(log_h: float) -> float:
        return objective(KernelSpec(nu=nu, h=math.exp(log_h)))

    log_h, value = brent_minimize(criterion, math.log(h_floor), math.log(h_ceil), BRENT_LOG_TOL)
    row = TuningRow(nu=nu, h=math.exp(log_h), criterion=value)
    _LOGGER.debug("nu=%s: best h=%.6g, criterion=%.6g", nu, row.h, row.criterion)
    return row


def _grid_rows(
    objective: Callable[[KernelSpec], float],
    nu_grid: Sequence[float],
    h_floor: float,
    h_ceil: float,
    threads: int | None,
) -> list[TuningRow]:
    coordinator = TaskCoordinator("bandwidth search", threads=threads)
    jobs = [
        (lambda nu=nu: _search_bandwidth(objective, nu, h_floor, h_ceil))
        for nu in nu_grid
    ]
    return coordinator.run_or_raise(jobs)


def _select(rows: Sequence[TuningRow], **kwargs) -> TuningResult:
    best = min(rows, key=lambda row: row.criterion)
    return TuningResult(
        best=KernelSpec(nu=best.nu, h=best.h),
        criterion_value=best.criterion,
        per_nu=tuple(rows),
        **kwargs,
    )


def search_kernel(
    objective: Callable[[KernelSpec], float],
    outcomes: Sequence[float] | np.ndarray,
    nu_grid: Sequence[float] = NU_GRID,
    threads: int | None = 1,
) -> TuningResult:
    """Bandwidth search for every nu in the grid; keep the overall best pair.

    The bandwidth bracket is derived from the range of `outcomes`.
    """
    if not nu_grid:
        raise InvalidInputError("nu grid is empty")
    h_floor, h_ceil = bandwidth_bracket(outcomes)
    rows = _grid_rows(objective, nu_grid, h_floor, h_ceil, threads)
    result = _select(rows, h_bracket=(h_floor, h_ceil), n_skipped=getattr(objective, "n_skipped", 0))
    _LOGGER.info("Selected kernel nu=%s, h=%.6g (criterion %.6g)", result.best.nu, result.best.h, result.criterion_value)
    return result


def multiple_one_fit_grid_search(
    model: IdrModel,
    data: TrainingData,
    nu_grid: Sequence[float] = NU_GRID,
    score: str = SCORE_LOGS,
    threads: int | None = 1,
) -> TuningResult:
    """One-fit bandwidth search for every nu in the grid; keep the overall best pair."""
    return search_kernel(OneFitObjective(model, data, score=score), data.y, nu_grid, threads)


def validation_grid_search(
    model: IdrModel,
    validation: TrainingData,
    nu_grid: Sequence[float] = NU_GRID,
    score: str = SCORE_LOGS,
    threads: int | None = 1,
) -> TuningResult:
    """Per-nu bandwidth search minimizing the mean score on held-out validation cases."""
    objective = ValidationObjective(model, validation, score=score)
    return search_kernel(objective, model.thresholds.values, nu_grid, threads)


def loo_cv_criterion(data: TrainingData, spec: KernelSpec, score: str = SCORE_LOGS) -> float:
    """Leave-one-out cross-validation: refit without each case and score it.

    Needs n full refits, so it is meant for small samples.
    """
    score = _score_name(score)
    if data.n < 2:
        raise InvalidInputError("leave-one-out cross-validation needs at least 2 cases")
    scores = []
    for i in range(data.n):
        model = idr.fit(data.without(i))
        mix = smooth(idr.predict(model, float(data.x[i])), spec)
        y = float(data.y[i])
        scores.append(score_mixture(mix, y, score))
    return float(np.mean(scores))


def silverman_bandwidth(sample: Sequence[float] | np.ndarray) -> float:
    """Silverman's rule of thumb, 0.9 * min(sd, IQR / 1.34) * n^(-1/5).

    When the IQR vanishes but the standard deviation does not, the standard
    deviation alone is used.
    """
    sample = np.asarray(sample, dtype=float).ravel()
    n = sample.size
    if n < 2:
        raise InvalidInputError("Silverman's rule needs at least 2 observations")
    sd = float(np.std(sample, ddof=1))
    iqr = float(np.subtract(*np.percentile(sample, [75, 25])))
    if sd <= 0:
        raise DegenerateSampleError("degenerate sample")
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-1 / 5)


def moderated_grid_search(
    model: IdrModel,
    data: TrainingData,
    nu_grid: Sequence[float] = NU_GRID,
    score: str = SCORE_LOGS,
    threads: int | None = 1,
    validation: TrainingData | None = None,
) -> TuningResult:
    """One-fit search with a Gaussian/Silverman fallback for degenerate bandwidths.

    The nu=2 and Gaussian searches run first. If either optimum falls below the
    degeneration floor, a Gaussian kernel with Silverman's bandwidth is returned.
    Otherwise the remaining nu values are searched as in
    multiple_one_fit_grid_search. With `validation`, the criterion is the mean
    out-of-sample score on those cases instead of the one-fit criterion.
    """
    if validation is not None:
        objective = ValidationObjective(model, validation, score=score)
    else:
        objective = OneFitObjective(model, data, score=score)
    h_floor, h_ceil = bandwidth_bracket(data.y)
    pilot_grid = (2.0, NU_INF)
    pilots = dict(zip(pilot_grid, _grid_rows(objective, pilot_grid, h_floor, h_ceil, threads)))

    if any(row.h < DEGENERATION_FACTOR * h_floor for row in pilots.values()):
        spec = KernelSpec(nu=NU_INF, h=silverman_bandwidth(data.y))
        _LOGGER.warning(
            "Optimal bandwidth degenerates (nu=2: h=%.3g, Gaussian: h=%.3g); "
            "falling back to Gaussian kernel with Silverman bandwidth %.6g",
            pilots[2.0].h, pilots[NU_INF].h, spec.h,
        )
        return TuningResult(
            best=spec,
            criterion_value=objective(spec),
            per_nu=tuple(pilots.values()),
            fallback_used=True,
            h_bracket=(h_floor, h_ceil),
            n_skipped=objective.n_skipped,
        )

    remaining = [nu for nu in nu_grid if nu not in pilots]
    searched = dict(zip(remaining, _grid_rows(objective, remaining, h_floor, h_ceil, threads)))
    rows = [pilots[nu] if nu in pilots else searched[nu] for nu in nu_grid]
    result = _select(rows, h_bracket=(h_floor, h_ceil), n_skipped=objective.n_skipped)
    _LOGGER.info("Selected kernel nu=%s, h=%.6g (criterion %.6g)", result.best.nu, result.best.h, result.criterion_value)
    return result
