"""Validation of command-line input into a CliConfig."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import voluptuous as vol
from dotenv import load_dotenv

from .const import (
    BASELINES,
    CONF_BASELINE,
    CONF_BASIC,
    CONF_COMMAND,
    CONF_HYPERGRID,
    CONF_INPUT,
    CONF_KERNEL,
    CONF_LEVELS,
    CONF_MODE,
    CONF_MODEL,
    CONF_N,
    CONF_NU_GRID,
    CONF_OUTCOME,
    CONF_OUTPUT,
    CONF_PREDICTOR,
    CONF_SCORE,
    CONF_SEED,
    CONF_SEEDS,
    CONF_SIZES,
    CONF_SPLITS,
    CONF_THREADS,
    CONF_TRAIN,
    CONF_VALIDATION,
    CONF_VERBOSE,
    DEFAULT_CONSISTENCY_SEEDS,
    DEFAULT_CONSISTENCY_SIZES,
    DEFAULT_LEVELS,
    DEFAULT_MODE,
    DEFAULT_N_SPLITS,
    DEFAULT_PREDICTOR,
    DEFAULT_SCORE,
    DEFAULT_SEED,
    DEFAULT_SIM_N,
    ENV_LOG_LEVEL,
    ENV_SEED,
    ENV_THREADS,
    MODES,
    NU_GRID,
    SCORES,
    WORKFLOW_MODES,
)
from .core import InvalidInputError, KernelSpec

_LOGGER = logging.getLogger(__name__)

COMMANDS = ("fit", "predict", "score", "tune", "simulate", "consistency", "workflow")


def _split_list(value: Any) -> list[str]:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return [str(part) for part in value]


def kernel_spec(value: Any) -> KernelSpec:
    """Validate a "nu,h" kernel string."""
    if isinstance(value, KernelSpec):
        return value
    try:
        return KernelSpec.parse(str(value))
    except InvalidInputError as err:
        raise vol.Invalid(str(err)) from err


def nu_grid(value: Any) -> tuple[float, ...]:
    """Validate a comma separated list of degrees of freedom; "inf" is Gaussian."""
    try:
        grid = tuple(float(part) for part in _split_list(value))
    except ValueError as err:
        raise vol.Invalid(f"degrees of freedom must be numbers or 'inf': {value!r}") from err
    if not grid or any(math.isnan(nu) or nu <= 0 for nu in grid):
        raise vol.Invalid(f"degrees of freedom must be positive: {value!r}")
    return grid


def quantile_levels(value: Any) -> tuple[float, ...]:
    """Validate quantile levels, each strictly between 0 and 1."""
    try:
        levels = tuple(float(part) for part in _split_list(value))
    except ValueError as err:
        raise vol.Invalid(f"levels must be numbers: {value!r}") from err
    if not levels or any(not 0.0 < alpha < 1.0 for alpha in levels):
        raise vol.Invalid(f"levels must lie in (0, 1): {value!r}")
    return levels


def sample_sizes(value: Any) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in _split_list(value))
    except ValueError as err:
        raise vol.Invalid(f"sizes must be integers: {value!r}") from err
    if not sizes or sizes[0] < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise vol.Invalid(f"sizes must be increasing integers of at least 2: {value!r}")
    return sizes


def hypergrid(value: Any) -> tuple[dict, ...]:
    """Hyperparameter grid as a JSON list of objects, inline or in a file."""
    if isinstance(value, (list, tuple)):
        grid = list(value)
    else:
        text = str(value)
        path = Path(text)
        if not text.lstrip().startswith("[") and path.is_file():
            text = path.read_text(encoding="utf-8")
        try:
            grid = json.loads(text)
        except json.JSONDecodeError as err:
            raise vol.Invalid(f"hyperparameter grid is not valid JSON: {err}") from err
    if not isinstance(grid, list) or not grid or not all(isinstance(item, dict) for item in grid):
        raise vol.Invalid("hyperparameter grid must be a non-empty JSON list of objects")
    return tuple(grid)


def output_path(value: Any) -> Path:
    """An output file whose directory exists."""
    path = Path(str(value))
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise vol.Invalid(f"output directory {parent} does not exist")
    return path


def input_file(value: Any) -> Path:
    path = Path(str(value))
    if not path.is_file():
        raise vol.Invalid(f"file not found: {path}")
    return path


_COMMON = {
    vol.Required(CONF_COMMAND): vol.In(COMMANDS),
    vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.All(vol.Coerce(int), vol.Range(min=0)),
    vol.Optional(CONF_THREADS, default=None): vol.Any(None, vol.All(vol.Coerce(int), vol.Range(min=1))),
    vol.Optional(CONF_VERBOSE, default=False): bool,
}

SCHEMAS: dict[str, vol.Schema] = {
    "fit": vol.Schema(
        {
            **_COMMON,
            vol.Required(CONF_INPUT): input_file,
            vol.Required(CONF_OUTPUT): output_path,
        },
        extra=vol.REMOVE_EXTRA,
    ),
    "predict": vol.Schema(
        {
            **_COMMON,
            vol.Required(CONF_MODEL): input_file,
            vol.Required(CONF_INPUT): input_file,
            vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, output_path),
            vol.Optional(CONF_LEVELS, default=DEFAULT_LEVELS): quantile_levels,
            vol.Optional(CONF_KERNEL, default=None): vol.Any(None, kernel_spec),
        },
        extra=vol.REMOVE_EXTRA,
    ),
    "score": vol.Schema(
        {
            **_COMMON,
            vol.Optional(CONF_MODEL, default=None): vol.Any(None, input_file),
            vol.Required(CONF_INPUT): input_file,
            vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, output_path),
            vol.Optional(CONF_SCORE, default=None): vol.Any(None, vol.In(SCORES)),
            vol.Optional(CONF_KERNEL, default=None): vol.Any(None, kernel_spec),
            vol.Optional(CONF_BASELINE, default=None): vol.Any(None, vol.In(BASELINES)),
            vol.Optional(CONF_TRAIN, default=None): vol.Any(None, input_file),
        },
        extra=vol.REMOVE_EXTRA,
    ),
    "tune": vol.Schema(
        {
            **_COMMON,
            vol.Required(CONF_MODEL): input_file,
            vol.Required(CONF_INPUT): input_file,
            vol.Optional(CONF_MODE, default=DEFAULT_MODE): vol.In(MODES),
            vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, output_path),
            vol.Optional(CONF_SCORE, default=DEFAULT_SCORE): vol.In(SCORES),
            vol.Optional(CONF_VALIDATION, default=None): vol.Any(None, input_file),
            vol.Optional(CONF_NU_GRID, default=NU_GRID): nu_grid,
        },
        extra=vol.REMOVE_EXTRA,
    ),
    "simulate": vol.Schema(
        {
            **_COMMON,
            vol.Optional(CONF_N, default=DEFAULT_SIM_N): vol.All(vol.Coerce(int), vol.Range(min=1)),
            vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, output_path),
        },
        extra=vol.REMOVE_EXTRA,
    ),
    "consistency": vol.Schema(
        {
            **_COMMON,
            vol.Optional(CONF_SIZES, default=DEFAULT_CONSISTENCY_SIZES): sample_sizes,
            vol.Optional(CONF_SEEDS, default=DEFAULT_CONSISTENCY_SEEDS): vol.All(vol.Coerce(int), vol.Range(min=1)),
            vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, output_path),
        },
        extra=vol.REMOVE_EXTRA,
    ),
    "workflow": vol.Schema(
        {
            **_COMMON,
            vol.Required(CONF_INPUT): input_file,
            vol.Optional(CONF_PREDICTOR, default=DEFAULT_PREDICTOR): str,
            vol.Optional(CONF_HYPERGRID, default=({},)): hypergrid,
            vol.Optional(CONF_SPLITS, default=DEFAULT_N_SPLITS): vol.All(vol.Coerce(int), vol.Range(min=1)),
            vol.Optional(CONF_OUTCOME, default="y"): str,
            vol.Optional(CONF_MODE, default=DEFAULT_MODE): vol.In(WORKFLOW_MODES),
            vol.Optional(CONF_NU_GRID, default=NU_GRID): nu_grid,
            vol.Optional(CONF_BASIC, default=False): bool,
            vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, output_path),
        },
        extra=vol.REMOVE_EXTRA,
    ),
}


@dataclass(frozen=True)
class CliConfig:
    """Validated settings of one command invocation."""

    command: str
    seed: int = DEFAULT_SEED
    threads: int | None = None
    input: Path | None = None
    output: Path | None = None
    model: Path | None = None
    train: Path | None = None
    validation: Path | None = None
    score: str | None = DEFAULT_SCORE
    kernel: KernelSpec | None = None
    nu_grid: tuple[float, ...] = NU_GRID
    levels: tuple[float, ...] = DEFAULT_LEVELS
    mode: str = DEFAULT_MODE
    baseline: str | None = None
    n: int = DEFAULT_SIM_N
    sizes: tuple[int, ...] = DEFAULT_CONSISTENCY_SIZES
    seeds: int = DEFAULT_CONSISTENCY_SEEDS
    predictor: str = DEFAULT_PREDICTOR
    hypergrid: tuple[dict, ...] = ({},)
    splits: int = DEFAULT_N_SPLITS
    outcome: str = "y"
    basic: bool = False
    verbose: bool = False


def environment_defaults(dotenv_path: str | Path | None = None) -> dict[str, Any]:
    """Seed and thread defaults from the environment, after loading a .env file."""
    load_dotenv(dotenv_path=dotenv_path, override=False)
    defaults: dict[str, Any] = {}
    if os.environ.get(ENV_SEED):
        defaults[CONF_SEED] = os.environ[ENV_SEED]
    if os.environ.get(ENV_THREADS):
        defaults[CONF_THREADS] = os.environ[ENV_THREADS]
    return defaults


def environment_log_level() -> str | None:
    return os.environ.get(ENV_LOG_LEVEL) or None


def build_config(options: Mapping[str, Any], defaults: Mapping[str, Any] | None = None) -> CliConfig:
    """Validate parsed options; explicit values win over environment defaults.

    Raises voluptuous.Invalid (or MultipleInvalid) on bad input.
    """
    command = options.get(CONF_COMMAND)
    if command not in SCHEMAS:
        raise vol.Invalid(f"unknown command {command!r}", path=[CONF_COMMAND])
    merged = {key: value for key, value in (defaults or {}).items()}
    merged.update({key: value for key, value in options.items() if value is not None})
    validated = SCHEMAS[command](merged)
    _LOGGER.debug("Validated %s configuration: %s", command, validated)
    return CliConfig(**validated)
