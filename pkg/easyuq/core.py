"""Domain types shared by the EasyUQ modules.

All types are frozen dataclasses over read-only numpy arrays, so fitted models and
predictive distributions can be shared between threads without copying.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .const import CDF_TOL

_LOGGER = logging.getLogger(__name__)


class EasyUQError(Exception):
    """Base class for EasyUQ errors."""


class EmptySampleError(EasyUQError, ValueError):
    """The sample has no observations."""


class InvalidInputError(EasyUQError, ValueError):
    """An argument violates a precondition."""


class DegenerateSampleError(EasyUQError, ValueError):
    """The sample carries no usable spread."""


class NumericalError(EasyUQError, ArithmeticError):
    """A numerical routine failed to produce a value."""


def _frozen(values: Iterable[float] | np.ndarray, ndim: int = 1) -> np.ndarray:
    """Return a read-only float64 copy of values."""
    array = np.array(values, dtype=float, ndmin=ndim)
    array.setflags(write=False)
    return array


def _require_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{what} must be finite")


@dataclass(frozen=True)
class TrainingData:
    """Paired single-valued model outputs x and real outcomes y."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = _frozen(self.x)
        y = _frozen(self.y)
        if x.ndim != 1 or y.ndim != 1:
            raise InvalidInputError("x and y must be one-dimensional")
        if x.size != y.size:
            raise InvalidInputError(
                f"x and y differ in length ({x.size} != {y.size})"
            )
        if x.size == 0:
            raise EmptySampleError("empty sample")
        _require_finite(x, "model outputs")
        _require_finite(y, "outcomes")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> TrainingData:
        """Build training data from (x, y) pairs."""
        pairs = list(pairs)
        if not pairs:
            raise EmptySampleError("empty sample")
        x, y = zip(*pairs)
        return cls(x=np.asarray(x, dtype=float), y=np.asarray(y, dtype=float))

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __len__(self) -> int:
        return self.n

    def subset(self, indices: Sequence[int] | np.ndarray) -> TrainingData:
        """Return the cases at the given indices, in that order."""
        indices = np.asarray(indices, dtype=int)
        return TrainingData(x=self.x[indices], y=self.y[indices])

    def without(self, index: int) -> TrainingData:
        """Return the data with case `index` removed."""
        keep = np.ones(self.n, dtype=bool)
        keep[index] = False
        return TrainingData(x=self.x[keep], y=self.y[keep])


@dataclass(frozen=True)
class ThresholdSet:
    """Sorted unique outcome values."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim != 1:
            raise InvalidInputError("thresholds must be one-dimensional")
        if values.size == 0:
            raise EmptySampleError("empty sample")
        _require_finite(values, "thresholds")
        if values.size > 1 and not np.all(np.diff(values) > 0):
            raise InvalidInputError("thresholds must be strictly increasing")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


def unique_thresholds(values: Iterable[float] | np.ndarray) -> ThresholdSet:
    """Sort and deduplicate values; exact floating point equality defines ties."""
    array = np.asarray(values, dtype=float).ravel()
    if array.size == 0:
        raise EmptySampleError("empty sample")
    _require_finite(array, "values")
    return ThresholdSet(values=np.unique(array))


@dataclass(frozen=True)
class StepCDF:
    """A discrete predictive distribution given by cumulative probabilities."""

    thresholds: ThresholdSet
    cumulative: np.ndarray

    def __post_init__(self) -> None:
        cumulative = _frozen(self.cumulative)
        if cumulative.shape != (len(self.thresholds),):
            raise InvalidInputError(
                f"expected {len(self.thresholds)} cumulative values, got {cumulative.shape}"
            )
        if np.any(cumulative < -CDF_TOL) or np.any(cumulative > 1 + CDF_TOL):
            raise InvalidInputError("cumulative probabilities must lie in [0, 1]")
        if cumulative.size > 1 and np.any(np.diff(cumulative) < -CDF_TOL):
            raise InvalidInputError("cumulative probabilities must be nondecreasing")
        if abs(cumulative[-1] - 1.0) > CDF_TOL:
            raise InvalidInputError(
                f"last cumulative probability must be 1, got {cumulative[-1]!r}"
            )
        object.__setattr__(self, "cumulative", cumulative)

    @classmethod
    def from_masses(cls, thresholds: ThresholdSet, masses: Sequence[float] | np.ndarray) -> StepCDF:
        """Build a step CDF from point masses at the thresholds."""
        masses = np.asarray(masses, dtype=float)
        if np.any(masses < -CDF_TOL):
            raise InvalidInputError("point masses must be nonnegative")
        total = masses.sum()
        if abs(total - 1.0) > 1e-9:
            raise InvalidInputError(f"point masses must sum to 1, got {total!r}")
        cumulative = np.minimum(np.cumsum(masses), 1.0)
        cumulative[-1] = 1.0
        return cls(thresholds=thresholds, cumulative=cumulative)

    @classmethod
    def point_mass(cls, location: float) -> StepCDF:
        return cls(thresholds=ThresholdSet(values=[location]), cumulative=[1.0])

    @property
    def masses(self) -> np.ndarray:
        """Point masses w_j = F(y_j) - F(y_{j-1})."""
        return np.diff(self.cumulative, prepend=0.0)

    @property
    def support(self) -> np.ndarray:
        return self.thresholds.values

    def evaluate(self, y: float | np.ndarray) -> float | np.ndarray:
        """Right-continuous CDF value(s) at y; 0 below the first threshold."""
        positions = np.searchsorted(self.thresholds.values, y, side="right")
        padded = np.concatenate(([0.0], self.cumulative))
        values = padded[positions]
        return float(values) if np.ndim(values) == 0 else values

    def mean(self) -> float:
        return float(np.dot(self.masses, self.thresholds.values))


@dataclass(frozen=True)
class IdrModel:
    """Fitted EasyUQ model: one CDF row per distinct covariate value."""

    unique_x: np.ndarray
    thresholds: ThresholdSet
    cdf_matrix: np.ndarray

    def __post_init__(self) -> None:
        unique_x = _frozen(self.unique_x)
        cdf_matrix = _frozen(self.cdf_matrix, ndim=2)
        k, m = unique_x.size, len(self.thresholds)
        if k == 0:
            raise EmptySampleError("empty sample")
        if cdf_matrix.shape != (k, m):
            raise InvalidInputError(
                f"cdf matrix has shape {cdf_matrix.shape}, expected {(k, m)}"
            )
        _require_finite(unique_x, "covariate values")
        if k > 1 and not np.all(np.diff(unique_x) > 0):
            raise InvalidInputError("covariate values must be strictly increasing")
        if np.any(cdf_matrix < -CDF_TOL) or np.any(cdf_matrix > 1 + CDF_TOL):
            raise InvalidInputError("cdf values must lie in [0, 1]")
        if m > 1 and np.any(np.diff(cdf_matrix, axis=1) < -CDF_TOL):
            raise InvalidInputError("cdf rows must be nondecreasing")
        if np.any(np.abs(cdf_matrix[:, -1] - 1.0) > CDF_TOL):
            raise InvalidInputError("cdf rows must end at 1")
        if k > 1 and np.any(np.diff(cdf_matrix, axis=0) > CDF_TOL):
            raise InvalidInputError("cdf matrix must be antitonic in the covariate")
        object.__setattr__(self, "unique_x", unique_x)
        object.__setattr__(self, "cdf_matrix", cdf_matrix)

    @property
    def k(self) -> int:
        return int(self.unique_x.size)

    @property
    def m(self) -> int:
        return len(self.thresholds)

    def row(self, r: int) -> StepCDF:
        return StepCDF(thresholds=self.thresholds, cumulative=self.cdf_matrix[r])

    def mass_matrix(self) -> np.ndarray:
        """Point masses of every row, shape (k, m)."""
        return np.diff(self.cdf_matrix, axis=1, prepend=0.0)


@dataclass(frozen=True)
class KernelSpec:
    """Student-t kernel with `nu` degrees of freedom (inf is Gaussian) and bandwidth h."""

    nu: float
    h: float

    def __post_init__(self) -> None:
        nu = float(self.nu)
        h = float(self.h)
        if math.isnan(nu) or nu <= 0:
            raise InvalidInputError(f"degrees of freedom must be positive, got {self.nu!r}")
        if not math.isfinite(h) or h <= 0:
            raise InvalidInputError(f"bandwidth must be positive and finite, got {self.h!r}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "h", h)

    @property
    def is_gaussian(self) -> bool:
        return math.isinf(self.nu)

    @classmethod
    def parse(cls, text: str) -> KernelSpec:
        """Parse "nu,h"; nu may be "inf"."""
        try:
            nu_text, h_text = (part.strip() for part in text.split(","))
            return cls(nu=float(nu_text), h=float(h_text))
        except ValueError as err:
            if isinstance(err, InvalidInputError):
                raise
            raise InvalidInputError(f"kernel must look like 'nu,h', got {text!r}") from err

    def __str__(self) -> str:
        nu = "inf" if self.is_gaussian else f"{self.nu:g}"
        return f"{nu},{self.h:.17g}"

    def as_dict(self) -> dict[str, float | str]:
        return {"nu": "inf" if self.is_gaussian else self.nu, "h": self.h}

    @classmethod
    def from_dict(cls, payload: dict) -> KernelSpec:
        try:
            return cls(nu=float(payload["nu"]), h=float(payload["h"]))
        except (KeyError, TypeError, ValueError) as err:
            if isinstance(err, InvalidInputError):
                raise
            raise InvalidInputError(f"kernel entry must hold nu and h, got {payload!r}") from err


@dataclass(frozen=True)
class MixtureDistribution:
    """Location-scale kernel mixture sum_j w_j K_h(y - y_j)."""

    locations: np.ndarray
    weights: np.ndarray
    kernel: KernelSpec

    def __post_init__(self) -> None:
        locations = _frozen(self.locations)
        weights = _frozen(self.weights)
        if locations.shape != weights.shape or locations.ndim != 1:
            raise InvalidInputError("locations and weights must be matching vectors")
        if locations.size == 0:
            raise EmptySampleError("empty sample")
        _require_finite(locations, "locations")
        if np.any(weights < -CDF_TOL):
            raise InvalidInputError("mixture weights must be nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > 1e-9:
            raise InvalidInputError(f"mixture weights must sum to 1, got {total!r}")
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "weights", np.clip(weights, 0.0, None))
        self.weights.setflags(write=False)

    @property
    def n_components(self) -> int:
        return int(self.locations.size)


def json_ready(value: Any) -> Any:
    """Recursively convert numpy values for json; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(key): json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(item) for item in value]
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value
