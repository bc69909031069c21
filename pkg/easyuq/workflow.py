"""Split-based training, validation and test harness for Smooth EasyUQ.

For every random split the point predictor is learned on the training part
for each hyperparameter setting, EasyUQ is fitted to its training output and
the kernel is tuned; the setting with the best validation score is re-learned
on training plus validation data and scored on the test part.
"""
from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression, Ridge
from sklearn.neighbors import KNeighborsRegressor

from . import idr
from .const import (
    DEFAULT_N_SPLITS,
    DEFAULT_SEED,
    DEFAULT_SPLIT_FRACTIONS,
    MODE_MODERATED,
    MODE_MULTIPLE,
    NU_GRID,
    PREDICTOR_IDENTITY,
    PREDICTOR_KNN,
    PREDICTOR_LINEAR,
    SCORE_CRPS,
    SCORE_LOGS,
    WORKFLOW_MODES,
)
from .coordinator import TaskCoordinator
from .core import (
    EmptySampleError,
    IdrModel,
    InvalidInputError,
    KernelSpec,
    TrainingData,
    json_ready,
)
from .scoring import CaseScorer, crps_step_many
from .tuning import (
    TuningResult,
    ValidationObjective,
    moderated_grid_search,
    multiple_one_fit_grid_search,
    validation_grid_search,
)

_LOGGER = logging.getLogger(__name__)

METHOD_SMOOTH = "smooth_easyuq"
METHOD_BASIC = "easyuq"


def load_table(path: str | Path, columns: Sequence[str] | None = None) -> pd.DataFrame:
    """Read a numeric CSV with a header row.

    Problems are reported with the offending line number, counting the header
    as line 1.
    """
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except pd.errors.EmptyDataError as err:
        raise EmptySampleError("empty sample") from err
    except (pd.errors.ParserError, UnicodeDecodeError) as err:
        raise InvalidInputError(f"malformed CSV {path}: {err}") from err
    if frame.empty:
        raise EmptySampleError("empty sample")

    columns = list(columns) if columns is not None else list(frame.columns)
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise InvalidInputError(f"{path}: missing column(s) {', '.join(missing)}")

    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=float))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise InvalidInputError(
                f"{path}, line {row + 2}: column {column!r} holds {frame[column].iloc[row]!r}, "
                "expected a finite number"
            )
        frame[column] = values.astype(float)
    return frame[columns]


def load_pairs(path: str | Path, x: str = "x", y: str = "y") -> TrainingData:
    """Read model output/outcome pairs from a CSV with columns x, y."""
    frame = load_table(path, [x, y])
    return TrainingData(x=frame[x].to_numpy(), y=frame[y].to_numpy())


@dataclass(frozen=True)
class Dataset:
    """Feature matrix and outcome vector."""

    features: np.ndarray
    outcomes: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=float, ndmin=2)
        if features.shape[0] == 1 and np.ndim(self.features) == 1:
            features = features.T
        outcomes = np.array(self.outcomes, dtype=float).ravel()
        if outcomes.size == 0:
            raise EmptySampleError("empty sample")
        if features.shape[0] != outcomes.size:
            raise InvalidInputError("features and outcomes differ in length")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(outcomes))):
            raise InvalidInputError("features and outcomes must be finite")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(features.shape[1]))
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return int(self.outcomes.size)

    def subset(self, indices: np.ndarray) -> Dataset:
        return Dataset(self.features[indices], self.outcomes[indices], self.feature_names)

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, outcome: str = "y", features: Sequence[str] | None = None
    ) -> Dataset:
        if outcome not in frame.columns:
            raise InvalidInputError(f"outcome column {outcome!r} not found")
        names = list(features) if features else [c for c in frame.columns if c != outcome]
        if not names:
            raise InvalidInputError("dataset has no feature columns")
        return cls(frame[names].to_numpy(dtype=float), frame[outcome].to_numpy(dtype=float), tuple(names))


def load_dataset(path: str | Path, outcome: str = "y", features: Sequence[str] | None = None) -> Dataset:
    frame = load_table(path)
    return Dataset.from_frame(frame, outcome=outcome, features=features)


class PointPredictor(Protocol):
    """Single-valued model: learned on features and outcomes, then queried."""

    def learn(self, features: np.ndarray, outcomes: np.ndarray, hyperparameters: Mapping[str, Any]) -> None:
        ...

    def predict(self, features: np.ndarray) -> np.ndarray:
        ...


class IdentityPredictor:
    """Model output is the single feature itself."""

    def learn(self, features: np.ndarray, outcomes: np.ndarray, hyperparameters: Mapping[str, Any]) -> None:
        if features.shape[1] != 1:
            raise InvalidInputError(
                f"identity predictor needs exactly one feature, got {features.shape[1]}"
            )

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features[:, 0], dtype=float)


class LinearPredictor:
    """Least squares with intercept; hyperparameter `alpha` > 0 adds a ridge penalty."""

    def __init__(self) -> None:
        """Initialize."""
        self._model: LinearRegression | Ridge | None = None

    def learn(self, features: np.ndarray, outcomes: np.ndarray, hyperparameters: Mapping[str, Any]) -> None:
        alpha = float(hyperparameters.get("alpha", 0.0))
        if alpha < 0:
            raise InvalidInputError(f"alpha must be nonnegative, got {alpha}")
        self._model = Ridge(alpha=alpha) if alpha > 0 else LinearRegression()
        self._model.fit(features, outcomes)

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self._model is None:
            raise InvalidInputError("predictor has not been learned")
        return np.asarray(self._model.predict(features), dtype=float)


class KNeighborsPredictor:
    """Mean outcome of the k nearest training cases; hyperparameter `k`."""

    def __init__(self) -> None:
        """Initialize."""
        self._model: KNeighborsRegressor | None = None

    def learn(self, features: np.ndarray, outcomes: np.ndarray, hyperparameters: Mapping[str, Any]) -> None:
        k = int(hyperparameters.get("k", 5))
        if not 1 <= k <= outcomes.size:
            raise InvalidInputError(f"k must lie in [1, {outcomes.size}], got {k}")
        self._model = KNeighborsRegressor(n_neighbors=k)
        self._model.fit(features, outcomes)

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self._model is None:
            raise InvalidInputError("predictor has not been learned")
        return np.asarray(self._model.predict(features), dtype=float)


PREDICTORS: dict[str, Callable[[], PointPredictor]] = {
    PREDICTOR_IDENTITY: IdentityPredictor,
    PREDICTOR_LINEAR: LinearPredictor,
    PREDICTOR_KNN: KNeighborsPredictor,
}


def predictor_factory(predictor: str | PointPredictor | Callable[[], PointPredictor]) -> Callable[[], PointPredictor]:
    """Factory producing a fresh predictor for every unit of work."""
    if isinstance(predictor, str):
        try:
            return PREDICTORS[predictor]
        except KeyError as err:
            raise InvalidInputError(
                f"unknown predictor {predictor!r}, expected one of {', '.join(PREDICTORS)}"
            ) from err
    if isinstance(predictor, type):
        return predictor
    if hasattr(predictor, "learn") and hasattr(predictor, "predict"):
        return lambda: copy.deepcopy(predictor)
    if callable(predictor):
        return predictor
    raise InvalidInputError(f"not a point predictor: {predictor!r}")


@dataclass(frozen=True)
class SplitIndices:
    split: int
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def as_dict(self) -> dict:
        return {
            "train": self.train.tolist(),
            "validation": self.validation.tolist(),
            "test": self.test.tolist(),
        }


@dataclass(frozen=True)
class SplitPlan:
    """Random training/validation/test splits by seeded shuffling and contiguous slicing."""

    n_splits: int = DEFAULT_N_SPLITS
    fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.n_splits < 1:
            raise InvalidInputError(f"need at least one split, got {self.n_splits}")
        fractions = tuple(float(f) for f in self.fractions)
        if len(fractions) != 3 or any(f <= 0 for f in fractions):
            raise InvalidInputError("fractions must be three positive numbers")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise InvalidInputError(f"fractions must sum to 1, got {sum(fractions)!r}")
        object.__setattr__(self, "fractions", fractions)

    def sizes(self, n: int) -> tuple[int, int, int]:
        n_train = int(round(self.fractions[0] * n))
        n_validation = int(round(self.fractions[1] * n))
        n_test = n - n_train - n_validation
        if min(n_train, n_validation, n_test) < 1:
            raise InvalidInputError(f"{n} cases are too few for fractions {self.fractions}")
        return n_train, n_validation, n_test

    def split(self, n: int) -> list[SplitIndices]:
        n_train, n_validation, _ = self.sizes(n)
        splits = []
        for index in range(self.n_splits):
            order = np.random.default_rng([self.seed, index]).permutation(n)
            splits.append(
                SplitIndices(
                    split=index,
                    train=np.sort(order[:n_train]),
                    validation=np.sort(order[n_train:n_train + n_validation]),
                    test=np.sort(order[n_train + n_validation:]),
                )
            )
        return splits

    def as_dict(self) -> dict:
        return {"n_splits": self.n_splits, "fractions": list(self.fractions), "seed": self.seed}


@dataclass(frozen=True)
class HyperEvaluation:
    """Validation result of one hyperparameter setting."""

    hyperparameters: dict
    validation_score: float
    kernel: KernelSpec | None = None
    fallback_used: bool = False

    def as_dict(self) -> dict:
        return {
            "hyperparameters": dict(self.hyperparameters),
            "validation_score": self.validation_score,
            "kernel": self.kernel.as_dict() if self.kernel else None,
            "fallback_used": self.fallback_used,
        }


@dataclass(frozen=True)
class SplitRecord:
    """Outcome of one split; `error` is set when the split was aborted."""

    split: int
    indices: SplitIndices
    evaluations: tuple[HyperEvaluation, ...] = ()
    selected: HyperEvaluation | None = None
    test_scores: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_dict(self) -> dict:
        return {
            "split": self.split,
            "selected": self.selected.as_dict() if self.selected else None,
            "validation_table": [evaluation.as_dict() for evaluation in self.evaluations],
            "test_scores": dict(self.test_scores),
            "error": self.error,
            "indices": self.indices.as_dict(),
        }


@dataclass(frozen=True)
class WorkflowReport:
    """Per-split records and grand means of the test scores."""

    method: str
    plan: SplitPlan
    records: tuple[SplitRecord, ...]

    @property
    def completed(self) -> list[SplitRecord]:
        return [record for record in self.records if record.ok]

    def split_means(self, score: str) -> list[float]:
        return [record.test_scores[score] for record in self.completed if score in record.test_scores]

    def grand_mean(self, score: str) -> float:
        """Mean over splits of the per-split test means."""
        means = self.split_means(score)
        return float(np.mean(means)) if means else math.nan

    @property
    def scores(self) -> tuple[str, ...]:
        return (SCORE_LOGS, SCORE_CRPS) if self.method == METHOD_SMOOTH else (SCORE_CRPS,)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "plan": self.plan.as_dict(),
            "n_completed": len(self.completed),
            "grand_mean": {score: self.grand_mean(score) for score in self.scores},
            "splits": [record.as_dict() for record in self.records],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(json_ready(self.as_dict()), handle, indent=2)


def _tune(
    mode: str, model: IdrModel, data: TrainingData, validation: TrainingData, nu_grid: Sequence[float]
) -> TuningResult:
    if mode == MODE_MODERATED:
        return moderated_grid_search(model, data, nu_grid, SCORE_LOGS, validation=validation)
    if mode == MODE_MULTIPLE:
        return multiple_one_fit_grid_search(model, data, nu_grid, SCORE_LOGS)
    return validation_grid_search(model, validation, nu_grid, SCORE_LOGS)


def _step_crps(model: IdrModel, data: TrainingData) -> np.ndarray:
    return crps_step_many(model.thresholds.values, idr.predict_many(model, data.x), data.y)


class _SplitRunner:
    """Runs one split for a fixed predictor, grid and method."""

    def __init__(
        self,
        dataset: Dataset,
        factory: Callable[[], PointPredictor],
        hypergrid: Sequence[Mapping[str, Any]],
        smooth: bool,
        nu_grid: Sequence[float],
        tuning_mode: str,
    ) -> None:
        """Initialize."""
        self.dataset = dataset
        self.factory = factory
        self.hypergrid = hypergrid
        self.smooth = smooth
        self.nu_grid = nu_grid
        self.tuning_mode = tuning_mode

    def _learn(self, part: Dataset, hyperparameters: Mapping[str, Any]) -> PointPredictor:
        predictor = self.factory()
        predictor.learn(part.features, part.outcomes, hyperparameters)
        return predictor

    def _evaluate(self, train: Dataset, validation: Dataset, hyperparameters: Mapping[str, Any]) -> HyperEvaluation:
        predictor = self._learn(train, hyperparameters)
        data = TrainingData(predictor.predict(train.features), train.outcomes)
        held_out = TrainingData(predictor.predict(validation.features), validation.outcomes)
        model = idr.fit(data)
        if not self.smooth:
            return HyperEvaluation(dict(hyperparameters), float(np.mean(_step_crps(model, held_out))))
        tuning = _tune(self.tuning_mode, model, data, held_out, self.nu_grid)
        score = ValidationObjective(model, held_out, SCORE_LOGS)(tuning.best)
        return HyperEvaluation(dict(hyperparameters), score, tuning.best, tuning.fallback_used)

    def __call__(self, indices: SplitIndices) -> SplitRecord:
        train = self.dataset.subset(indices.train)
        validation = self.dataset.subset(indices.validation)
        test = self.dataset.subset(indices.test)
        _LOGGER.debug(
            "Split %d: %d train, %d validation, %d test cases",
            indices.split, train.n, validation.n, test.n,
        )

        evaluations = tuple(self._evaluate(train, validation, hp) for hp in self.hypergrid)
        selected = min(
            evaluations,
            key=lambda e: e.validation_score if not math.isnan(e.validation_score) else math.inf,
        )

        combined = self.dataset.subset(np.concatenate([indices.train, indices.validation]))
        predictor = self._learn(combined, selected.hyperparameters)
        model = idr.fit(TrainingData(predictor.predict(combined.features), combined.outcomes))
        test_data = TrainingData(predictor.predict(test.features), test.outcomes)

        if self.smooth:
            weights = np.diff(idr.predict_many(model, test_data.x), axis=1, prepend=0.0)
            scorer = CaseScorer(model.thresholds.values, weights, test_data.y)
            test_scores = {
                score: float(np.mean(scorer(selected.kernel, score)))
                for score in (SCORE_LOGS, SCORE_CRPS)
            }
        else:
            test_scores = {SCORE_CRPS: float(np.mean(_step_crps(model, test_data)))}
        _LOGGER.debug("Split %d: selected %s, test scores %s", indices.split, selected.hyperparameters, test_scores)
        return SplitRecord(
            split=indices.split,
            indices=indices,
            evaluations=evaluations,
            selected=selected,
            test_scores=test_scores,
        )


def _run(
    dataset: Dataset,
    predictor: str | PointPredictor | Callable[[], PointPredictor],
    hypergrid: Sequence[Mapping[str, Any]],
    plan: SplitPlan,
    smooth: bool,
    nu_grid: Sequence[float],
    tuning_mode: str,
    threads: int | None,
) -> WorkflowReport:
    if not hypergrid:
        raise InvalidInputError("hyperparameter grid is empty")
    if tuning_mode not in WORKFLOW_MODES:
        raise InvalidInputError(f"unknown tuning mode {tuning_mode!r}, expected one of {', '.join(WORKFLOW_MODES)}")
    runner = _SplitRunner(dataset, predictor_factory(predictor), list(hypergrid), smooth, nu_grid, tuning_mode)
    splits = plan.split(dataset.n)
    coordinator = TaskCoordinator("workflow", threads=threads)
    results = coordinator.run([(lambda indices=indices: runner(indices)) for indices in splits])

    records = []
    for indices, result in zip(splits, results):
        if isinstance(result, Exception):
            records.append(SplitRecord(split=indices.split, indices=indices, error=f"{type(result).__name__}: {result}"))
        else:
            records.append(result)
    report = WorkflowReport(method=METHOD_SMOOTH if smooth else METHOD_BASIC, plan=plan, records=tuple(records))
    _LOGGER.info(
        "%s workflow: %d of %d splits completed, grand means %s",
        report.method, len(report.completed), len(records),
        {score: report.grand_mean(score) for score in report.scores},
    )
    return report


def run_algorithm1(
    dataset: Dataset,
    predictor: str | PointPredictor | Callable[[], PointPredictor],
    hypergrid: Sequence[Mapping[str, Any]],
    plan: SplitPlan | None = None,
    nu_grid: Sequence[float] = NU_GRID,
    tuning_mode: str = MODE_MODERATED,
    threads: int | None = None,
) -> WorkflowReport:
    """Smooth EasyUQ over random splits with hyperparameter selection on validation LogS.

    The (nu, h) chosen on the training fit of the selected setting is reused
    unchanged after re-fitting on training plus validation data.
    """
    plan = plan if plan is not None else SplitPlan()
    return _run(dataset, predictor, hypergrid, plan, True, nu_grid, tuning_mode, threads)


def evaluate_basic_easyuq(
    dataset: Dataset,
    predictor: str | PointPredictor | Callable[[], PointPredictor],
    hypergrid: Sequence[Mapping[str, Any]],
    plan: SplitPlan | None = None,
    threads: int | None = None,
) -> WorkflowReport:
    """Same pipeline without smoothing; CRPS selects and evaluates."""
    plan = plan if plan is not None else SplitPlan()
    return _run(dataset, predictor, hypergrid, plan, False, NU_GRID, MODE_MODERATED, threads)
