"""Reference methods: Single Gaussian, climatology and smoothed ensembles."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .const import NU_GRID, NU_INF, SCORE_LOGS
from .core import (
    DegenerateSampleError,
    EmptySampleError,
    InvalidInputError,
    KernelSpec,
    MixtureDistribution,
    StepCDF,
    TrainingData,
    unique_thresholds,
)
from .smoothing import smooth

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SingleGaussianModel:
    """Gaussian predictive distribution centred on the model output."""

    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.sigma) or self.sigma <= 0:
            raise InvalidInputError(f"sigma must be positive, got {self.sigma!r}")

    def as_dict(self) -> dict[str, float]:
        return {"sigma": self.sigma}


def fit_single_gaussian(data: TrainingData) -> SingleGaussianModel:
    """Constant variance minimizing the mean Gaussian LogS: the mean squared residual."""
    residuals = data.y - data.x
    variance = float(np.mean(residuals ** 2))
    if variance <= 0:
        raise DegenerateSampleError("degenerate sample: all residuals are zero")
    model = SingleGaussianModel(sigma=math.sqrt(variance))
    _LOGGER.debug("Fitted Single Gaussian on %d cases: sigma=%.6g", data.n, model.sigma)
    return model


def predict_single_gaussian(model: SingleGaussianModel, x: float) -> MixtureDistribution:
    """One Gaussian component at x with scale sigma."""
    if not math.isfinite(x):
        raise InvalidInputError(f"model output must be finite, got {x!r}")
    return MixtureDistribution(
        locations=[x], weights=[1.0], kernel=KernelSpec(nu=NU_INF, h=model.sigma)
    )


def ensemble_step_cdf(members: Sequence[float] | np.ndarray) -> StepCDF:
    """Step CDF of ensemble members; tied members pool their weight 1/k each."""
    members = np.asarray(members, dtype=float).ravel()
    if members.size == 0:
        raise EmptySampleError("empty sample")
    thresholds = unique_thresholds(members)
    counts = np.bincount(np.searchsorted(thresholds.values, members), minlength=len(thresholds))
    return StepCDF.from_masses(thresholds, counts / members.size)


def climatology_step_cdf(outcomes: Sequence[float] | np.ndarray) -> StepCDF:
    """Unconditional empirical CDF of the training outcomes."""
    return ensemble_step_cdf(outcomes)


def smooth_ensemble(
    ensembles: Sequence[Sequence[float]],
    outcomes: Sequence[float] | np.ndarray,
    nu_grid: Sequence[float] = NU_GRID,
    score: str = SCORE_LOGS,
    threads: int | None = 1,
) -> tuple[list[MixtureDistribution], KernelSpec]:
    """Smooth ensemble forecasts with a kernel chosen by a per-nu bandwidth search.

    The criterion is the mean score of each ensemble step CDF, smoothed, at its
    own outcome. Ensembles never saw their outcomes, so no mass is removed.
    """
    from .tuning import StepForecastObjective, search_kernel

    cdfs = [ensemble_step_cdf(members) for members in ensembles]
    outcomes = np.asarray(outcomes, dtype=float)
    if len(cdfs) != outcomes.size:
        raise InvalidInputError("ensembles and outcomes differ in length")
    objective = StepForecastObjective(cdfs, outcomes, score=score)
    result = search_kernel(objective, outcomes, nu_grid=nu_grid, threads=threads)
    return [smooth(cdf, result.best) for cdf in cdfs], result.best
