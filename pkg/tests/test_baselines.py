"""Tests for the reference methods."""
import math

import numpy as np
import pytest

from easyuq.baselines import (
    SingleGaussianModel,
    climatology_step_cdf,
    ensemble_step_cdf,
    fit_single_gaussian,
    predict_single_gaussian,
    smooth_ensemble,
)
from easyuq.core import DegenerateSampleError, EmptySampleError, InvalidInputError, KernelSpec, TrainingData
from easyuq.scoring import logs_mixture
from easyuq.smoothing import smooth


@pytest.mark.parametrize(
    ("residuals", "sigma"),
    [((1.0, -1.0), 1.0), ((2.0, -2.0, 2.0, -2.0), 2.0)],
)
def test_fit_single_gaussian(residuals, sigma):
    x = np.arange(len(residuals), dtype=float)
    model = fit_single_gaussian(TrainingData(x=x, y=x + np.asarray(residuals)))
    assert model.sigma == pytest.approx(sigma)


def test_perfect_forecasts_are_degenerate():
    with pytest.raises(DegenerateSampleError):
        fit_single_gaussian(TrainingData(x=[1.0, 2.0], y=[1.0, 2.0]))


def test_predict_single_gaussian():
    mix = predict_single_gaussian(SingleGaussianModel(sigma=1.0), 3.0)
    assert mix.kernel.is_gaussian and mix.kernel.h == 1.0
    assert logs_mixture(mix, 3.0) == pytest.approx(0.5 * math.log(2.0 * math.pi))
    with pytest.raises(InvalidInputError):
        predict_single_gaussian(SingleGaussianModel(sigma=1.0), math.nan)
    with pytest.raises(InvalidInputError):
        SingleGaussianModel(sigma=0.0)


def test_ensemble_step_cdf():
    cdf = ensemble_step_cdf([3.0, 1.0, 3.0, 2.0])
    assert cdf.support.tolist() == [1.0, 2.0, 3.0]
    assert cdf.masses == pytest.approx([0.25, 0.25, 0.5])
    point = ensemble_step_cdf([4.0, 4.0, 4.0])
    assert point.support.tolist() == [4.0] and point.cumulative.tolist() == [1.0]
    assert ensemble_step_cdf([1.0, 2.0, 3.0, 4.0, 5.0]).masses == pytest.approx([0.2] * 5)
    with pytest.raises(EmptySampleError):
        ensemble_step_cdf([])


def test_climatology_ignores_the_covariate(gamma_data):
    cdf = climatology_step_cdf(gamma_data.y)
    assert len(cdf.support) == np.unique(gamma_data.y).size
    assert cdf.evaluate(np.median(gamma_data.y)) == pytest.approx(0.5, abs=0.01)


def test_smooth_ensemble(rng):
    centers = rng.normal(0.0, 3.0, size=60)
    ensembles = centers[:, None] + rng.normal(0.0, 1.0, size=(60, 11))
    outcomes = centers + rng.normal(0.0, 1.0, size=60)
    mixtures, spec = smooth_ensemble(ensembles, outcomes, nu_grid=(5.0, math.inf))
    assert len(mixtures) == 60
    assert all(mix.kernel == spec for mix in mixtures)
    assert spec.h > 0
    with pytest.raises(InvalidInputError):
        smooth_ensemble(ensembles, outcomes[:-1])


def test_smooth_ensemble_scores_every_member(rng):
    centers = rng.normal(0.0, 3.0, size=40)
    ensembles = centers[:, None] + rng.normal(0.0, 1.0, size=(40, 7))
    outcomes = centers + rng.normal(0.0, 1.0, size=40)
    mixtures, spec = smooth_ensemble(ensembles, outcomes, nu_grid=(math.inf,))
    assert mixtures[0].locations.tolist() == np.unique(ensembles[0]).tolist()

    def criterion(h: float) -> float:
        kernel = KernelSpec(nu=math.inf, h=h)
        return float(np.mean([
            logs_mixture(smooth(ensemble_step_cdf(members), kernel), y) for members, y in zip(ensembles, outcomes)
        ]))

    best = criterion(spec.h)
    assert best <= criterion(0.8 * spec.h) and best <= criterion(1.25 * spec.h)


def test_sigma_minimizes_mean_gaussian_logs(rng):
    for _ in range(100):
        n = int(rng.integers(2, 40))
        x = rng.normal(size=n)
        data = TrainingData(x=x, y=x + rng.normal(0.0, rng.uniform(0.1, 3.0), size=n))
        model = fit_single_gaussian(data)
        assert abs(model.sigma ** 2 - np.mean((data.y - data.x) ** 2)) <= 1e-12

    residuals = data.y - data.x
    grid = model.sigma * np.linspace(0.5, 2.0, 1501)
    mean_logs = [np.mean(0.5 * np.log(2 * np.pi * s ** 2) + residuals ** 2 / (2 * s ** 2)) for s in grid]
    assert abs(grid[int(np.argmin(mean_logs))] - model.sigma) <= grid[1] - grid[0]
