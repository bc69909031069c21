"""Tests for the kernel parameter searches."""
import math

import numpy as np
import pytest

from easyuq import idr
from easyuq.core import (
    DegenerateSampleError,
    InvalidInputError,
    KernelSpec,
    NumericalError,
    TrainingData,
)
from easyuq.simulation import SimConfig, simulate
from easyuq.smoothing import kernel_logpdf
from easyuq.tuning import (
    OneFitObjective,
    ValidationObjective,
    bandwidth_bracket,
    brent_minimize,
    loo_cv_criterion,
    moderated_grid_search,
    multiple_one_fit_grid_search,
    one_fit_criterion,
    silverman_bandwidth,
    validation_grid_search,
)

ARGMIN_TOL = 1e-6


def test_brent_minimize_examples():
    argmin, value = brent_minimize(lambda h: (h - 2.0) ** 2, 0.1, 10.0, 1e-9)
    assert argmin == pytest.approx(2.0, abs=ARGMIN_TOL)
    assert value == pytest.approx(0.0, abs=1e-10)
    argmin, _ = brent_minimize(lambda h: abs(h - 1.0), 0.1, 10.0, 1e-9)
    assert argmin == pytest.approx(1.0, abs=ARGMIN_TOL)
    argmin, value = brent_minimize(lambda h: h, 0.1, 10.0, 1e-9)
    assert argmin == pytest.approx(0.1, abs=1e-6) and value == pytest.approx(0.1, abs=1e-6)


def test_brent_minimize_treats_infinity_as_penalty():
    argmin, value = brent_minimize(lambda h: math.inf if h < 3.0 else h, 0.1, 10.0, 1e-9)
    assert argmin == pytest.approx(3.0, abs=1e-4) and math.isfinite(value)


def test_brent_minimize_rejects_bad_brackets():
    with pytest.raises(NumericalError):
        brent_minimize(abs, -math.inf, 1.0, 1e-6)
    with pytest.raises(InvalidInputError):
        brent_minimize(abs, 2.0, 1.0, 1e-6)


def test_bandwidth_bracket():
    assert bandwidth_bracket([0.0, 5.0, 10.0]) == pytest.approx((1e-3, 10.0))
    with pytest.raises(DegenerateSampleError):
        bandwidth_bracket([2.0, 2.0])


def test_one_fit_two_cases():
    # both rows put mass 1/2 on each outcome; removing the own outcome leaves the other
    data = TrainingData(x=[1.0, 2.0], y=[2.0, 1.0])
    model = idr.fit(data)
    spec = KernelSpec(nu=3.0, h=0.5)
    expected = -kernel_logpdf(spec, 1.0)
    assert one_fit_criterion(model, data, spec) == pytest.approx(expected)


def test_one_fit_single_case_is_undefined():
    data = TrainingData(x=[1.0], y=[2.0])
    with pytest.raises(DegenerateSampleError, match="one-fit criterion undefined"):
        one_fit_criterion(idr.fit(data), data, KernelSpec(nu=math.inf, h=1.0))


def test_one_fit_requires_matching_data(gamma_data):
    model = idr.fit(gamma_data)
    other = TrainingData(x=gamma_data.x + 0.5, y=gamma_data.y)
    with pytest.raises(InvalidInputError):
        one_fit_criterion(model, other, KernelSpec(nu=math.inf, h=1.0))


def test_one_fit_prefers_moderate_bandwidth(gamma_data):
    model = idr.fit(gamma_data)
    _, h_ceil = bandwidth_bracket(gamma_data.y)
    moderate = one_fit_criterion(model, gamma_data, KernelSpec(nu=5.0, h=1.0))
    assert moderate < one_fit_criterion(model, gamma_data, KernelSpec(nu=5.0, h=h_ceil * 10))


def test_multiple_search_finds_interior_bandwidth(gamma_data):
    model = idr.fit(gamma_data)
    result = multiple_one_fit_grid_search(model, gamma_data)
    h_floor, h_ceil = result.h_bracket
    assert h_floor < result.best.h < h_ceil
    assert [row.nu for row in result.per_nu] == [2.0, 3.0, 4.0, 5.0, 10.0, 20.0, math.inf]
    assert result.criterion_value == min(row.criterion for row in result.per_nu)
    for h in (h_floor, h_ceil):
        edge = one_fit_criterion(model, gamma_data, KernelSpec(nu=result.best.nu, h=h))
        assert result.criterion_value <= edge
    assert not result.fallback_used


def test_multiple_search_is_thread_independent(gamma_data):
    model = idr.fit(gamma_data)
    grid = (3.0, math.inf)
    serial = multiple_one_fit_grid_search(model, gamma_data, grid, threads=1)
    parallel = multiple_one_fit_grid_search(model, gamma_data, grid, threads=2)
    assert serial.best == parallel.best
    assert serial.per_nu == parallel.per_nu


def test_moderated_equals_multiple_on_continuous_data(gamma_data):
    model = idr.fit(gamma_data)
    moderated = moderated_grid_search(model, gamma_data)
    multiple = multiple_one_fit_grid_search(model, gamma_data)
    assert not moderated.fallback_used
    assert moderated.best == multiple.best
    assert moderated.criterion_value == multiple.criterion_value


def test_bandwidth_collapses_on_jittered_ties(jittered_discrete_data):
    model = idr.fit(jittered_discrete_data)
    result = multiple_one_fit_grid_search(model, jittered_discrete_data, nu_grid=(2.0,))
    h_floor, _ = result.h_bracket
    assert result.best.h < 10.0 * h_floor


def test_moderated_falls_back_on_jittered_ties(jittered_discrete_data):
    model = idr.fit(jittered_discrete_data)
    result = moderated_grid_search(model, jittered_discrete_data)
    assert result.fallback_used
    assert result.best.is_gaussian
    assert result.best.h == pytest.approx(silverman_bandwidth(jittered_discrete_data.y))
    assert len(result.per_nu) == 2


def test_one_fit_keeps_bandwidth_on_exact_ties(discrete_data):
    # removing the mass at y_i removes every tied outcome, so no component sits on y_i
    result = moderated_grid_search(idr.fit(discrete_data), discrete_data)
    assert not result.fallback_used


def test_moderated_falls_back_on_discrete_validation_data(discrete_data):
    train, validation = discrete_data.subset(np.arange(240)), discrete_data.subset(np.arange(240, 300))
    result = moderated_grid_search(idr.fit(train), train, validation=validation)
    assert result.fallback_used
    assert result.best.is_gaussian
    assert result.best.h == pytest.approx(silverman_bandwidth(train.y))
    assert [row.nu for row in result.per_nu] == [2.0, math.inf]
    assert result.criterion_value == pytest.approx(ValidationObjective(idr.fit(train), validation)(result.best))


def test_validation_search(gamma_data):
    train, validation = gamma_data.subset(np.arange(400)), gamma_data.subset(np.arange(400, 500))
    result = validation_grid_search(idr.fit(train), validation, nu_grid=(4.0, math.inf))
    assert result.h_bracket[0] < result.best.h < result.h_bracket[1]


def test_unknown_score(gamma_data):
    with pytest.raises(InvalidInputError):
        multiple_one_fit_grid_search(idr.fit(gamma_data), gamma_data, score="brier")


def test_loo_two_cases():
    data = TrainingData(x=[1.0, 2.0], y=[2.0, 5.0])
    spec = KernelSpec(nu=math.inf, h=1.5)
    assert loo_cv_criterion(data, spec) == pytest.approx(-kernel_logpdf(spec, 3.0))
    with pytest.raises(InvalidInputError):
        loo_cv_criterion(data.subset([0]), spec)


def test_loo_diverges_for_huge_bandwidth(gamma_data):
    data = gamma_data.subset(np.arange(40))
    moderate = loo_cv_criterion(data, KernelSpec(nu=math.inf, h=2.0))
    assert loo_cv_criterion(data, KernelSpec(nu=math.inf, h=1e6)) > moderate + 5.0


def test_silverman_bandwidth():
    sample = np.random.default_rng(0).standard_normal(1000)
    assert silverman_bandwidth(sample) == pytest.approx(0.226, rel=0.1)
    assert silverman_bandwidth(3.0 * sample + 7.0) == pytest.approx(3.0 * silverman_bandwidth(sample))
    with pytest.raises(DegenerateSampleError, match="degenerate sample"):
        silverman_bandwidth([4.0, 4.0, 4.0])
    # IQR of zero with spread in the tails uses the standard deviation
    assert silverman_bandwidth([0.0] * 8 + [1.0, -1.0]) > 0


def test_one_fit_is_invariant_to_case_order(gamma_data, rng):
    data = gamma_data.subset(np.arange(200))
    shuffled = data.subset(rng.permutation(data.n))
    model, shuffled_model = idr.fit(data), idr.fit(shuffled)
    for spec in (KernelSpec(nu=2.0, h=0.5), KernelSpec(nu=math.inf, h=1.2)):
        for score in ("logs", "crps"):
            expected = one_fit_criterion(model, data, spec, score)
            assert one_fit_criterion(shuffled_model, shuffled, spec, score) == pytest.approx(expected, abs=1e-12)


def test_loo_and_one_fit_bandwidths_agree():
    data = simulate(SimConfig(n=50, seed=11))
    h_floor, h_ceil = bandwidth_bracket(data.y)
    bounds = (math.log(h_floor), math.log(h_ceil))
    objective = OneFitObjective(idr.fit(data), data)

    def gaussian(log_h: float) -> KernelSpec:
        return KernelSpec(nu=math.inf, h=math.exp(log_h))

    one_fit, _ = brent_minimize(lambda t: objective(gaussian(t)), *bounds, 1e-3)
    cross_validated, _ = brent_minimize(lambda t: loo_cv_criterion(data, gaussian(t)), *bounds, 1e-3)
    assert abs(one_fit - cross_validated) <= math.log(2.0)


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    while b - a > tol:
        if f(c) < f(d):
            b, d = d, c
            c = b - ratio * (b - a)
        else:
            a, c = c, d
            d = a + ratio * (b - a)
    return 0.5 * (a + b)


@pytest.mark.parametrize(
    ("f", "lo", "hi"),
    [
        (lambda t: (t - 2.0) ** 2, 0.1, 10.0),
        (lambda t: math.exp(t) - 3.0 * t, -5.0, 5.0),
        (lambda t: t ** 4 + t, -3.0, 2.0),
        (lambda t: math.cosh(t - 0.3), -4.0, 7.0),
    ],
)
def test_brent_minimize_matches_golden_section(f, lo, hi):
    tol = 1e-6
    argmin, value = brent_minimize(f, lo, hi, tol)
    assert argmin == pytest.approx(_golden_section(f, lo, hi, tol), abs=2.0 * tol)
    assert value == pytest.approx(f(argmin))
