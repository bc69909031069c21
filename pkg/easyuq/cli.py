"""Command-line entry point: fit, predict, score, tune, simulate, consistency, workflow."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd
import voluptuous as vol

from . import __version__, idr
from .baselines import climatology_step_cdf, fit_single_gaussian, predict_single_gaussian
from .config import (
    CliConfig,
    build_config,
    environment_defaults,
    environment_log_level,
)
from .const import (
    BASELINE_SINGLE_GAUSSIAN,
    BASELINES,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    MODE_MULTIPLE,
    MODES,
    SCORE_CRPS,
    SCORE_LOGS,
    SCORES,
    WORKFLOW_MODES,
)
from .core import (
    DegenerateSampleError,
    EmptySampleError,
    InvalidInputError,
    NumericalError,
    StepCDF,
    json_ready,
)
from .scoring import crps_step_many, mean_score, mixture_scores, score_mixture
from .simulation import (
    SimConfig,
    consistency_experiment,
    median_errors,
    save_dataset,
    save_error_table,
    simulate,
)
from .smoothing import mixture_quantiles, smooth
from .tuning import moderated_grid_search, multiple_one_fit_grid_search, validation_grid_search
from .workflow import (
    PREDICTORS,
    SplitPlan,
    evaluate_basic_easyuq,
    load_dataset,
    load_pairs,
    load_table,
    run_algorithm1,
)

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class UsageError(InvalidInputError):
    """Flags that do not fit together."""


@lru_cache(maxsize=1)
def strings() -> dict:
    """User-facing texts from strings.json."""
    return json.loads((Path(__file__).parent / "strings.json").read_text(encoding="utf-8"))


def _error_text(key: str, **kwargs: Any) -> str:
    return strings()["error"][key].format(**kwargs)


def build_parser() -> argparse.ArgumentParser:
    texts = strings()["cli"]
    option = texts["option"]

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=option["seed"])
    common.add_argument("--threads", type=int, default=None, help=option["threads"])
    common.add_argument("-v", "--verbose", action="store_true", help=option["verbose"])

    parser = argparse.ArgumentParser(prog="easyuq", description=texts["description"])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def command(name: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=texts["command"][name])

    fit = command("fit")
    fit.add_argument("--input", required=True, help=option["input"])
    fit.add_argument("--output", required=True, help=option["model"])

    predict = command("predict")
    predict.add_argument("--model", required=True, help=option["model"])
    predict.add_argument("--input", required=True, help=option["input"])
    predict.add_argument("--output", help=option["output"])
    predict.add_argument("--levels", help=option["levels"])
    predict.add_argument("--kernel", help=option["kernel"])

    score = command("score")
    score.add_argument("--model", help=option["model"])
    score.add_argument("--input", required=True, help=option["input"])
    score.add_argument("--output", help=option["output"])
    score.add_argument("--score", choices=SCORES, help=option["score"])
    score.add_argument("--kernel", help=option["kernel"])
    score.add_argument("--baseline", choices=BASELINES, help=option["baseline"])
    score.add_argument("--train", help=option["train"])

    tune = command("tune")
    tune.add_argument("--model", required=True, help=option["model"])
    tune.add_argument("--input", required=True, help=option["input"])
    tune.add_argument("--output", help=option["output"])
    tune.add_argument("--mode", choices=MODES, help=option["mode"])
    tune.add_argument("--score", choices=SCORES, help=option["score"])
    tune.add_argument("--nu-grid", dest="nu_grid", help=option["nu_grid"])
    tune.add_argument("--validation", help=option["validation"])

    simulate_cmd = command("simulate")
    simulate_cmd.add_argument("--n", type=int, help=option["n"])
    simulate_cmd.add_argument("--output", help=option["output"])

    consistency = command("consistency")
    consistency.add_argument("--sizes", help=option["sizes"])
    consistency.add_argument("--seeds", type=int, help=option["seeds"])
    consistency.add_argument("--output", help=option["output"])

    workflow = command("workflow")
    workflow.add_argument("--input", required=True, help=option["input"])
    workflow.add_argument("--output", help=option["output"])
    workflow.add_argument("--predictor", choices=sorted(PREDICTORS), help=option["predictor"])
    workflow.add_argument("--hypergrid", help=option["hypergrid"])
    workflow.add_argument("--splits", type=int, help=option["splits"])
    workflow.add_argument("--outcome", help=option["outcome"])
    workflow.add_argument("--mode", choices=WORKFLOW_MODES, help=option["mode"])
    workflow.add_argument("--nu-grid", dest="nu_grid", help=option["nu_grid"])
    workflow.add_argument("--basic", action="store_true", help=option["basic"])
    return parser


def _write_json(payload: Any, path: Path | None) -> None:
    text = json.dumps(json_ready(payload), indent=2)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n", encoding="utf-8")


def _write_frame(frame: pd.DataFrame, path: Path | None) -> None:
    frame.to_csv(path if path is not None else sys.stdout, index=False)


def cmd_fit(config: CliConfig) -> int:
    data = load_pairs(config.input)
    model = idr.fit(data)
    idr.save_model(model, config.output)
    _write_json({"n": data.n, "k": model.k, "m": model.m, "model": str(config.output)}, None)
    return EXIT_OK


def cmd_predict(config: CliConfig) -> int:
    model = idr.load_model(config.model)
    xs = load_table(config.input, ["x"])["x"].to_numpy()
    rows = []
    for x, cumulative in zip(xs, idr.predict_many(model, xs)):
        cdf = StepCDF(thresholds=model.thresholds, cumulative=cumulative)
        if config.kernel is not None:
            values = mixture_quantiles(smooth(cdf, config.kernel), config.levels)
        else:
            values = idr.quantiles(cdf, config.levels)
        rows.append([x, *values])
    columns = ["x", *(f"q{alpha:g}" for alpha in config.levels)]
    _write_frame(pd.DataFrame(rows, columns=columns), config.output)
    return EXIT_OK


def _baseline_scores(config: CliConfig, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    if config.model is not None:
        raise UsageError(_error_text("model_or_baseline"))
    if config.train is None:
        raise UsageError(_error_text("baseline_needs_train"))
    train = load_pairs(config.train)
    if config.baseline == BASELINE_SINGLE_GAUSSIAN:
        model = fit_single_gaussian(train)
        return np.asarray(
            [score_mixture(predict_single_gaussian(model, float(x)), float(y), config.score) for x, y in zip(xs, ys)]
        )
    # climatology: the same unconditional forecast for every case
    cdf = climatology_step_cdf(train.y)
    weights = np.tile(cdf.masses, (ys.size, 1))
    if config.kernel is not None:
        return mixture_scores(cdf.support, weights, ys, config.kernel, config.score)
    if config.score == SCORE_LOGS:
        raise UsageError(_error_text("logs_needs_kernel"))
    return crps_step_many(cdf.support, np.cumsum(weights, axis=1), ys)


def _default_score(config: CliConfig) -> str:
    """LogS for smooth forecasts, CRPS for step forecasts, unless --score is given."""
    if config.score is not None:
        return config.score
    if config.kernel is not None or config.baseline == BASELINE_SINGLE_GAUSSIAN:
        return SCORE_LOGS
    return SCORE_CRPS


def cmd_score(config: CliConfig) -> int:
    config = replace(config, score=_default_score(config))
    data = load_pairs(config.input)
    if config.baseline is not None:
        scores = _baseline_scores(config, data.x, data.y)
        method = config.baseline
    else:
        if config.model is None:
            raise UsageError(_error_text("model_or_baseline"))
        model = idr.load_model(config.model)
        cumulative = idr.predict_many(model, data.x)
        if config.kernel is not None:
            weights = np.clip(np.diff(cumulative, axis=1, prepend=0.0), 0.0, None)
            scores = mixture_scores(model.thresholds.values, weights, data.y, config.kernel, config.score)
            method = "smooth_easyuq"
        elif config.score == SCORE_LOGS:
            raise UsageError(_error_text("logs_needs_kernel"))
        else:
            scores = crps_step_many(model.thresholds.values, cumulative, data.y)
            method = "easyuq"

    report = mean_score(scores)
    if config.output is not None:
        _write_frame(pd.DataFrame({"x": data.x, "y": data.y, config.score: scores}), config.output)
    payload = {"method": method, "score": config.score, **report.as_dict(include_cases=config.output is None)}
    if config.kernel is not None:
        payload["kernel"] = config.kernel.as_dict()
    _write_json(payload, None)
    return EXIT_OK


def cmd_tune(config: CliConfig) -> int:
    model = idr.load_model(config.model)
    data = load_pairs(config.input)
    validation = load_pairs(config.validation) if config.validation is not None else None
    if config.mode != MODE_MULTIPLE:
        result = moderated_grid_search(
            model, data, config.nu_grid, config.score, threads=config.threads, validation=validation
        )
    elif validation is not None:
        result = validation_grid_search(model, validation, config.nu_grid, config.score, threads=config.threads)
    else:
        result = multiple_one_fit_grid_search(model, data, config.nu_grid, config.score, threads=config.threads)
    for row in result.per_nu:
        _LOGGER.info("nu=%s h=%.6g criterion=%.6g", row.nu, row.h, row.criterion)
    _write_json({"mode": config.mode, "score": config.score, **result.as_dict()}, config.output)
    return EXIT_OK


def cmd_simulate(config: CliConfig) -> int:
    data = simulate(SimConfig(n=config.n, seed=config.seed))
    save_dataset(data, config.output if config.output is not None else sys.stdout)
    return EXIT_OK


def cmd_consistency(config: CliConfig) -> int:
    seeds = range(config.seed, config.seed + config.seeds)
    table = consistency_experiment(config.sizes, seeds, threads=config.threads)
    medians = median_errors(table).reset_index()
    if config.output is not None:
        save_error_table(table, config.output)
        _write_frame(medians, None)
    else:
        save_error_table(table, sys.stdout)
        print(medians.to_string(index=False), file=sys.stderr)
    return EXIT_OK


def cmd_workflow(config: CliConfig) -> int:
    dataset = load_dataset(config.input, outcome=config.outcome)
    plan = SplitPlan(n_splits=config.splits, seed=config.seed)
    if config.basic:
        report = evaluate_basic_easyuq(dataset, config.predictor, config.hypergrid, plan, threads=config.threads)
    else:
        report = run_algorithm1(
            dataset, config.predictor, config.hypergrid, plan,
            nu_grid=config.nu_grid, tuning_mode=config.mode, threads=config.threads,
        )
    _write_json(report.as_dict(), config.output)
    if not report.completed:
        _LOGGER.error("No split completed; see the recorded errors")
        return EXIT_NUMERIC
    return EXIT_OK


HANDLERS: dict[str, Callable[[CliConfig], int]] = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "score": cmd_score,
    "tune": cmd_tune,
    "simulate": cmd_simulate,
    "consistency": cmd_consistency,
    "workflow": cmd_workflow,
}


def _configure_logging(verbose: bool) -> None:
    level: int | str = logging.DEBUG if verbose else (environment_log_level() or logging.WARNING)
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    defaults = environment_defaults()
    _configure_logging(args.verbose)

    try:
        config = build_config(vars(args), defaults)
        return HANDLERS[config.command](config)
    except (vol.Invalid, InvalidInputError, EmptySampleError, DegenerateSampleError, FileNotFoundError) as err:
        print(_error_text("invalid_input", detail=err), file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as err:
        print(_error_text("numeric", detail=err), file=sys.stderr)
        return EXIT_NUMERIC

