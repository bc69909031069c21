"""Gamma simulation testbed and the empirical consistency experiment.

Covariates are uniform on (0, 10); given X, the outcome is Gamma distributed
with shape sqrt(X) and scale min(max(X, 2), 8).

Random numbers come from numpy's PCG64 bit generator. Gamma variates use
numpy's Generator sampler: Marsaglia and Tsang's squeeze method for shape
>= 1 and a rejection sampler for shape < 1, so a given seed yields the same
sample on every platform numpy supports.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import pandas as pd
from scipy import special, stats

from . import idr
from .const import (
    CONSISTENCY_BASE_H,
    CONSISTENCY_BASE_N,
    CONSISTENCY_GRID_X,
    CONSISTENCY_GRID_Y,
    CONSISTENCY_X_WINDOW,
    CONSISTENCY_Y_LEVELS,
    DEFAULT_SEED,
    DEFAULT_SIM_N,
    NU_INF,
    SIM_SCALE_HIGH,
    SIM_SCALE_LOW,
    SIM_X_HIGH,
    SIM_X_LOW,
)
from .coordinator import TaskCoordinator
from .core import IdrModel, InvalidInputError, KernelSpec, StepCDF, TrainingData
from .smoothing import kernel_cdf

_LOGGER = logging.getLogger(__name__)

ERROR_COLUMNS = ("n", "seed", "sup_error_basic", "sup_error_smooth")


@dataclass(frozen=True)
class SimConfig:
    """Sample size and seed of one simulated dataset."""

    n: int = DEFAULT_SIM_N
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInputError(f"sample size must be at least 1, got {self.n}")


def gamma_parameters(x: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shape sqrt(x) and scale clamp(x, 2, 8) of the conditional distribution."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(x), np.clip(x, SIM_SCALE_LOW, SIM_SCALE_HIGH)


def _check_covariate(x: np.ndarray) -> None:
    if np.any((x <= SIM_X_LOW) | (x >= SIM_X_HIGH)) or not np.all(np.isfinite(x)):
        raise InvalidInputError(f"covariate must lie in ({SIM_X_LOW:g}, {SIM_X_HIGH:g})")


def simulate(config: SimConfig) -> TrainingData:
    """Draw n (X, Y) pairs; the same seed always yields the same sample."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    x = rng.uniform(SIM_X_LOW, SIM_X_HIGH, size=config.n)
    shape, scale = gamma_parameters(x)
    y = rng.gamma(shape, scale)
    _LOGGER.debug("Simulated %d pairs with seed %d", config.n, config.seed)
    return TrainingData(x=x, y=y)


def true_cdf(x: float | np.ndarray, y: float | np.ndarray) -> float | np.ndarray:
    """Conditional CDF P(Y <= y | X = x), the regularized lower incomplete gamma function."""
    x_arr, y_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    _check_covariate(x_arr)
    shape, scale = gamma_parameters(x_arr)
    values = np.where(y_arr > 0, special.gammainc(shape, np.maximum(y_arr, 0.0) / scale), 0.0)
    return float(values) if values.ndim == 0 else values


def true_quantile(x: float | np.ndarray, alpha: float | np.ndarray) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_covariate(x)
    shape, scale = gamma_parameters(x)
    values = stats.gamma.ppf(alpha, a=shape, scale=scale)
    return float(values) if np.ndim(values) == 0 else values


def save_dataset(data: TrainingData, path: str | Path | TextIO) -> None:
    """Write the pairs as CSV with columns x, y."""
    pd.DataFrame({"x": data.x, "y": data.y}).to_csv(path, index=False)


@dataclass(frozen=True)
class EvaluationGrid:
    """Interior covariates and, per covariate, outcomes between two true quantiles."""

    xs: np.ndarray
    ys: np.ndarray  # shape (len(xs), n_y)

    @classmethod
    def interior(
        cls,
        n_x: int = CONSISTENCY_GRID_X,
        n_y: int = CONSISTENCY_GRID_Y,
        window: tuple[float, float] = CONSISTENCY_X_WINDOW,
        levels: tuple[float, float] = CONSISTENCY_Y_LEVELS,
    ) -> EvaluationGrid:
        xs = np.linspace(window[0], window[1], n_x)
        lower = np.asarray(true_quantile(xs, levels[0]))
        upper = np.asarray(true_quantile(xs, levels[1]))
        ys = lower[:, None] + (upper - lower)[:, None] * np.linspace(0.0, 1.0, n_y)[None, :]
        return cls(xs=xs, ys=ys)

    def truth(self) -> np.ndarray:
        return np.asarray(true_cdf(self.xs[:, None], self.ys))


def consistency_bandwidth(n: int, base_h: float = CONSISTENCY_BASE_H) -> float:
    """Bandwidth shrinking like n^(-1/3) from base_h at the base sample size."""
    return base_h * (n / CONSISTENCY_BASE_N) ** (-1.0 / 3.0)


def sup_errors(model: IdrModel, grid: EvaluationGrid, spec: KernelSpec) -> tuple[float, float]:
    """Sup distance to the truth over the grid for basic and smoothed EasyUQ."""
    cumulative = idr.predict_many(model, grid.xs)
    thresholds = model.thresholds.values
    truth = grid.truth()

    basic = np.asarray([
        idr.evaluate_step_cdf(StepCDF(thresholds=model.thresholds, cumulative=row), ys)
        for row, ys in zip(cumulative, grid.ys)
    ])

    masses = np.diff(cumulative, axis=1, prepend=0.0)
    kernel = np.asarray(kernel_cdf(spec, grid.ys[:, :, None] - thresholds[None, None, :]))
    smooth = np.einsum("ijm,im->ij", kernel, masses)
    return float(np.max(np.abs(basic - truth))), float(np.max(np.abs(smooth - truth)))


def _consistency_run(n: int, seed: int, grid: EvaluationGrid, base_h: float) -> dict:
    data = simulate(SimConfig(n=n, seed=seed))
    model = idr.fit(data)
    spec = KernelSpec(nu=NU_INF, h=consistency_bandwidth(n, base_h))
    basic, smooth = sup_errors(model, grid, spec)
    _LOGGER.debug("n=%d seed=%d: sup error basic %.4f, smooth %.4f (h=%.4g)", n, seed, basic, smooth, spec.h)
    return {"n": n, "seed": seed, "sup_error_basic": basic, "sup_error_smooth": smooth}


def consistency_experiment(
    sizes: Sequence[int],
    seeds: Sequence[int],
    grid: EvaluationGrid | None = None,
    base_h: float = CONSISTENCY_BASE_H,
    threads: int | None = None,
) -> pd.DataFrame:
    """Sup errors of basic and smoothed EasyUQ against the true conditional CDFs.

    One row per (n, seed) with columns n, seed, sup_error_basic and
    sup_error_smooth.
    """
    sizes = [int(n) for n in sizes]
    if not sizes or not seeds:
        raise InvalidInputError("sizes and seeds must be non-empty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidInputError("sizes must be strictly increasing")
    grid = grid if grid is not None else EvaluationGrid.interior()
    coordinator = TaskCoordinator("consistency", threads=threads)
    jobs = [
        (lambda n=n, seed=seed: _consistency_run(n, int(seed), grid, base_h))
        for n in sizes
        for seed in seeds
    ]
    table = pd.DataFrame(coordinator.run_or_raise(jobs), columns=list(ERROR_COLUMNS))
    _LOGGER.info("Consistency experiment finished: %d runs", len(table))
    return table


def median_errors(table: pd.DataFrame) -> pd.DataFrame:
    """Median sup errors per sample size."""
    return table.groupby("n")[["sup_error_basic", "sup_error_smooth"]].median()


def save_error_table(table: pd.DataFrame, path: str | Path | TextIO) -> None:
    table.to_csv(path, index=False, columns=list(ERROR_COLUMNS))


def is_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:])) and not any(math.isnan(v) for v in values)
