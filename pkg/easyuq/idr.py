"""Basic EasyUQ: isotonic distributional regression on a single real covariate."""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .const import CDF_TOL, JSON_DIGITS
from .core import (
    EmptySampleError,
    IdrModel,
    InvalidInputError,
    StepCDF,
    TrainingData,
    unique_thresholds,
)
from .pav import TiePooling, antitonic_fit

_LOGGER = logging.getLogger(__name__)

MODEL_KEYS = ("unique_x", "thresholds", "cdf")


def fit(data: TrainingData) -> IdrModel:
    """Fit EasyUQ: one antitonic PAV pass per unique outcome threshold.

    Cases with tied covariates are pooled into a single point weighted by the tie
    count, so column j is the weighted antitonic fit of the pooled indicators
    1{y_i <= y_j} ordered by x.
    """
    if data is None or data.n == 0:
        raise EmptySampleError("empty sample")

    thresholds = unique_thresholds(data.y)
    ties = TiePooling.of(data.x)
    cdf_matrix = np.empty((ties.unique_x.size, len(thresholds)))
    for j, threshold in enumerate(thresholds.values):
        cdf_matrix[:, j] = antitonic_fit(ties.sequence(data.y <= threshold))

    # Remove rounding noise so every row is a valid CDF ending at exactly one
    np.clip(cdf_matrix, 0.0, 1.0, out=cdf_matrix)
    np.maximum.accumulate(cdf_matrix, axis=1, out=cdf_matrix)
    cdf_matrix[:, -1] = 1.0

    _LOGGER.debug(
        "Fitted EasyUQ on %d cases: %d covariate values, %d thresholds",
        data.n, *cdf_matrix.shape,
    )
    return IdrModel(unique_x=ties.unique_x, thresholds=thresholds, cdf_matrix=cdf_matrix)


def _interpolation(model: IdrModel, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows below/above each query and the weight on the lower row."""
    unique_x = model.unique_x
    upper = np.searchsorted(unique_x, xs, side="left")
    upper = np.clip(upper, 0, model.k - 1)
    lower = np.clip(upper - 1, 0, model.k - 1)
    weight = np.zeros(xs.size)

    exact = unique_x[upper] == xs
    inside = (xs > unique_x[0]) & (xs < unique_x[-1]) & ~exact
    span = unique_x[upper[inside]] - unique_x[lower[inside]]
    weight[inside] = (unique_x[upper[inside]] - xs[inside]) / span

    # Exact hits and clamped queries use a single stored row
    below = xs <= unique_x[0]
    lower[below] = 0
    weight[below] = 1.0
    upper[below] = 0
    above = xs >= unique_x[-1]
    lower[above] = model.k - 1
    upper[above] = model.k - 1
    weight[above] = 1.0
    lower[exact] = upper[exact]
    weight[exact] = 1.0
    return lower, upper, weight


def predict_many(model: IdrModel, xs: Sequence[float] | np.ndarray) -> np.ndarray:
    """Cumulative values of the predictive CDFs at each covariate, shape (len(xs), m)."""
    xs = np.asarray(xs, dtype=float).ravel()
    if not np.all(np.isfinite(xs)):
        raise InvalidInputError("covariate values must be finite")
    lower, upper, weight = _interpolation(model, xs)
    rows = model.cdf_matrix
    return weight[:, None] * rows[lower] + (1.0 - weight)[:, None] * rows[upper]


def predict(model: IdrModel, x: float) -> StepCDF:
    """Predictive step CDF at x, linearly interpolated between neighbouring rows.

    Queries outside the covariate range are clamped to the first or last row.
    """
    if not math.isfinite(x):
        raise InvalidInputError(f"covariate value must be finite, got {x!r}")
    cumulative = predict_many(model, [x])[0]
    return StepCDF(thresholds=model.thresholds, cumulative=cumulative)


def predictions(model: IdrModel, xs: Sequence[float] | np.ndarray) -> list[StepCDF]:
    """predict() for every covariate value in xs."""
    return [
        StepCDF(thresholds=model.thresholds, cumulative=row)
        for row in predict_many(model, xs)
    ]


def quantile(cdf: StepCDF, alpha: float) -> float:
    """Lower alpha-quantile: the smallest threshold with F >= alpha."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"quantile level must lie in (0, 1), got {alpha!r}")
    index = int(np.searchsorted(cdf.cumulative, alpha, side="left"))
    return float(cdf.thresholds.values[min(index, len(cdf.thresholds) - 1)])


def quantiles(cdf: StepCDF, levels: Sequence[float]) -> list[float]:
    return [quantile(cdf, alpha) for alpha in levels]


def evaluate_step_cdf(cdf: StepCDF, y: float | np.ndarray) -> float | np.ndarray:
    """F(y) of a step CDF, right-continuous and 0 below the first threshold."""
    return cdf.evaluate(y)


def model_from_dict(payload: dict[str, Any]) -> IdrModel:
    missing = [key for key in MODEL_KEYS if key not in payload]
    if missing:
        raise InvalidInputError(f"model is missing {', '.join(missing)}")
    return IdrModel(
        unique_x=np.asarray(payload["unique_x"], dtype=float),
        thresholds=unique_thresholds(payload["thresholds"]),
        cdf_matrix=np.asarray(payload["cdf"], dtype=float),
    )


def _number_array(values: np.ndarray) -> str:
    """JSON array text with every number written to JSON_DIGITS significant digits."""
    if values.ndim > 1:
        return "[" + ", ".join(_number_array(row) for row in values) + "]"
    return "[" + ", ".join(f"{value:.{JSON_DIGITS}g}" for value in values.tolist()) + "]"


def save_model(model: IdrModel, path: str | Path) -> None:
    """Write the model as JSON.

    Every number carries 17 significant digits, enough to read back the same
    double, so predictions from a loaded model are bit-reproducible.
    """
    arrays = dict(zip(MODEL_KEYS, (model.unique_x, model.thresholds.values, model.cdf_matrix)))
    fields = ", ".join(f"{json.dumps(key)}: {_number_array(np.asarray(values))}" for key, values in arrays.items())
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("{" + fields + "}\n")
    _LOGGER.debug("Saved model with k=%d, m=%d to %s", model.k, model.m, path)


def load_model(path: str | Path) -> IdrModel:
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as err:
            raise InvalidInputError(f"model file {path} is not valid JSON: {err}") from err
    if not isinstance(payload, dict):
        raise InvalidInputError(f"model file {path} does not hold a JSON object")
    return model_from_dict(payload)


def is_antitonic(model: IdrModel, tol: float = CDF_TOL) -> bool:
    """True when the rows decrease pointwise as the covariate increases."""
    if model.k == 1:
        return True
    return bool(np.all(np.diff(model.cdf_matrix, axis=0) <= tol))
