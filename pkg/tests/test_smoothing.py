"""Tests for kernel smoothing of step CDFs."""
import math

import numpy as np
import pytest
from scipy import integrate, stats

from easyuq import idr
from easyuq.const import QUANTILE_TAIL
from easyuq.core import (
    InvalidInputError,
    KernelSpec,
    MixtureDistribution,
    NumericalError,
    StepCDF,
    ThresholdSet,
    TrainingData,
)
from easyuq.smoothing import (
    bracket,
    kernel_cdf,
    kernel_density,
    kernel_excess,
    kernel_logpdf,
    mixture_cdf,
    mixture_density,
    mixture_logpdf,
    mixture_mean,
    mixture_quantile,
    mixture_quantiles,
    pair_excess,
    smooth,
)

GAUSS = KernelSpec(nu=math.inf, h=1.0)
TOL = 1e-9


def _two_point(spec: KernelSpec = GAUSS) -> MixtureDistribution:
    cdf = StepCDF(thresholds=ThresholdSet(values=[0.0, 2.0]), cumulative=[0.5, 1.0])
    return smooth(cdf, spec)


def test_kernel_density_values():
    assert kernel_density(GAUSS, 0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-6)
    assert kernel_density(KernelSpec(nu=1.0, h=1.0), 0.0) == pytest.approx(1.0 / math.pi, abs=1e-6)
    for nu in (1.0, 3.0, 20.0, math.inf):
        wide = kernel_density(KernelSpec(nu=nu, h=2.0), 0.0)
        assert wide == pytest.approx(0.5 * kernel_density(KernelSpec(nu=nu, h=1.0), 0.0))


def test_kernel_log_density_and_cdf_agree_with_scipy():
    u = np.linspace(-5.0, 5.0, 11)
    spec = KernelSpec(nu=3.0, h=0.5)
    assert kernel_logpdf(spec, u) == pytest.approx(stats.t.logpdf(u, df=3.0, scale=0.5))
    assert kernel_cdf(spec, u) == pytest.approx(stats.t.cdf(u, df=3.0, scale=0.5))
    assert kernel_cdf(GAUSS, 0.0) == 0.5


def test_smooth_point_mass():
    mix = smooth(StepCDF.point_mass(3.0), GAUSS)
    assert mix.n_components == 1
    assert mix.locations.tolist() == [3.0] and mix.weights.tolist() == [1.0]
    assert mixture_cdf(mix, 3.0) == pytest.approx(0.5)


def test_two_component_mixture():
    mix = _two_point()
    assert mixture_density(mix, 1.0) == pytest.approx(stats.norm.pdf(1.0))
    assert mixture_cdf(mix, 1.0) == pytest.approx(0.5)
    assert mixture_logpdf(mix, 1.0) == pytest.approx(math.log(stats.norm.pdf(1.0)))
    assert mixture_cdf(mix, -1e6) == 0.0 and mixture_cdf(mix, 1e6) == 1.0


def test_mixture_cdf_is_nondecreasing():
    mix = _two_point(KernelSpec(nu=2.0, h=0.3))
    values = mixture_cdf(mix, np.linspace(-20.0, 20.0, 401))
    assert np.all(np.diff(values) >= 0)


def test_mixture_quantile():
    mix = smooth(StepCDF.point_mass(0.0), GAUSS)
    assert abs(mixture_quantile(mix, 0.5)) <= 1e-8
    assert mixture_quantile(mix, stats.norm.cdf(1.0)) == pytest.approx(1.0, abs=1e-8)
    heavy = _two_point(KernelSpec(nu=2.0, h=1.0))
    levels = [0.001, 0.1, 0.5, 0.9, 0.999]
    values = mixture_quantiles(heavy, levels)
    assert np.all(np.diff(values) > 0)
    assert mixture_cdf(heavy, values) == pytest.approx(levels, abs=1e-8)
    with pytest.raises(InvalidInputError):
        mixture_quantile(mix, 1.0)


def test_smoothing_preserves_stochastic_order(gamma_data):
    model = idr.fit(gamma_data)
    spec = KernelSpec(nu=5.0, h=0.8)
    ys = np.linspace(-5.0, 60.0, 131)
    previous = None
    for cdf in idr.predictions(model, np.linspace(0.5, 9.5, 10)):
        current = mixture_cdf(smooth(cdf, spec), ys)
        if previous is not None:
            assert np.all(current <= previous + TOL)
        previous = current


def test_mixture_mean():
    assert mixture_mean(_two_point()) == pytest.approx(1.0)
    with pytest.raises(NumericalError):
        mixture_mean(_two_point(KernelSpec(nu=1.0, h=1.0)))


def test_smoothing_preserves_stochastic_order_on_random_data(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        x = rng.integers(0, 10, size=n).astype(float)
        model = idr.fit(TrainingData(x=x, y=np.round(rng.normal(x, 2.0), 1)))
        spec = KernelSpec(nu=float(rng.choice([2.0, 5.0, math.inf])), h=float(rng.uniform(0.1, 3.0)))
        queries = np.sort(rng.uniform(-2.0, 12.0, size=(100, 2)), axis=1)
        ys = rng.uniform(-10.0, 20.0, size=50)
        kernel = np.asarray(kernel_cdf(spec, ys[:, None] - model.thresholds.values[None, :]))
        lower = np.diff(idr.predict_many(model, queries[:, 0]), axis=1, prepend=0.0) @ kernel.T
        upper = np.diff(idr.predict_many(model, queries[:, 1]), axis=1, prepend=0.0) @ kernel.T
        assert np.all(upper <= lower + TOL)


def _excess_by_quadrature(spec: KernelSpec, c: float) -> float:
    def integrand(t):
        return abs(t + c) * kernel_density(spec, t)

    value = sum(
        integrate.quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=500)[0]
        for lo, hi in ((-np.inf, -c), (-c, np.inf))
    )
    return value - abs(c)


@pytest.mark.parametrize("nu", [2.5, 3.0, 20.0, math.inf])
def test_kernel_excess_matches_quadrature(nu):
    spec = KernelSpec(nu=nu, h=1.0)
    for c in (0.0, 0.7, -2.5, 9.0):
        assert kernel_excess(spec, c) == pytest.approx(_excess_by_quadrature(spec, c), abs=1e-8)


@pytest.mark.parametrize("nu", [2.0, 4.0, math.inf])
def test_pair_excess_matches_quadrature(nu):
    spec = KernelSpec(nu=nu, h=1.0)
    for d in (0.0, 0.3, 1.3, 7.5, 150.0):
        def integrand(s):
            return float(kernel_excess(spec, d - s)) * float(kernel_density(spec, s))

        convolved = sum(
            integrate.quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=500)[0]
            for lo, hi in ((-np.inf, 0.0), (0.0, d), (d, np.inf))
        )
        expected = float(kernel_excess(spec, d)) + convolved
        assert pair_excess(spec, d) == pytest.approx(expected, abs=1e-8)
        assert pair_excess(spec, -d) == pair_excess(spec, d)


def test_pair_excess_decays_beyond_the_table():
    spec = KernelSpec(nu=3.0, h=1.0)
    values = np.asarray(pair_excess(spec, np.geomspace(1e-3, 1e3, 200)))
    assert np.all(values > 0)
    assert np.all(np.diff(values) < 0)
    far = np.asarray(pair_excess(spec, [1e5, 1e7, 1e8]))
    assert np.all(far >= 0)
    assert far[2] == pytest.approx(far[1] * 1e-2, rel=1e-9)


def test_excess_needs_finite_first_moment():
    with pytest.raises(NumericalError):
        kernel_excess(KernelSpec(nu=1.0, h=1.0), 0.0)
    with pytest.raises(NumericalError):
        pair_excess(KernelSpec(nu=0.5, h=1.0), 0.0)


@pytest.mark.parametrize("nu", [1.0, 2.0, 5.0, 10.0, 20.0, math.inf])
def test_bracket_leaves_tail_mass_outside(nu):
    mix = _two_point(KernelSpec(nu=nu, h=0.7))
    lo, hi = bracket(mix)
    assert kernel_cdf(mix.kernel, lo - mix.locations.min()) == pytest.approx(QUANTILE_TAIL, rel=1e-6)
    assert mixture_cdf(mix, lo) <= QUANTILE_TAIL
    assert 1.0 - mixture_cdf(mix, hi) <= 1.001 * QUANTILE_TAIL
