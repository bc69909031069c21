"""EasyUQ: predictive distributions from single-valued model output."""
from __future__ import annotations

import json
from pathlib import Path

from .core import (
    DegenerateSampleError,
    EasyUQError,
    EmptySampleError,
    IdrModel,
    InvalidInputError,
    KernelSpec,
    MixtureDistribution,
    NumericalError,
    StepCDF,
    ThresholdSet,
    TrainingData,
)
from .idr import fit, predict, predict_many, quantile
from .smoothing import smooth
from .tuning import moderated_grid_search, multiple_one_fit_grid_search

MANIFEST = json.loads((Path(__file__).parent / "manifest.json").read_text(encoding="utf-8"))
__version__: str = MANIFEST["version"]

__all__ = [
    "DegenerateSampleError",
    "EasyUQError",
    "EmptySampleError",
    "IdrModel",
    "InvalidInputError",
    "KernelSpec",
    "MixtureDistribution",
    "NumericalError",
    "StepCDF",
    "ThresholdSet",
    "TrainingData",
    "fit",
    "moderated_grid_search",
    "multiple_one_fit_grid_search",
    "predict",
    "predict_many",
    "quantile",
    "smooth",
]
