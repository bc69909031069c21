"""Smooth EasyUQ: kernel smoothing of step CDFs into Student-t/Gaussian mixtures."""
from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, interpolate, optimize, special

from .const import (
    PAIR_TABLE_GEOMETRIC,
    PAIR_TABLE_LINEAR,
    PAIR_TABLE_TOL,
    QUANTILE_MAX_EXPANSIONS,
    QUANTILE_TAIL,
    QUANTILE_TOL,
)
from .core import (
    InvalidInputError,
    KernelSpec,
    MixtureDistribution,
    NumericalError,
    StepCDF,
)

_LOGGER = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _standardized(spec: KernelSpec, u: float | np.ndarray) -> np.ndarray:
    return np.asarray(u, dtype=float) / spec.h


def _scalar_or_array(values: np.ndarray) -> float | np.ndarray:
    return float(values) if np.ndim(values) == 0 else values


def log_kernel_from_squares(spec: KernelSpec, squares: np.ndarray) -> np.ndarray:
    """log kappa_nu(z) of the standardized kernel, given z^2."""
    squares = np.asarray(squares, dtype=float)
    if spec.is_gaussian:
        return -0.5 * squares - _HALF_LOG_2PI
    nu = spec.nu
    constant = special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    return constant - 0.5 * (nu + 1.0) * np.log1p(squares / nu)


def kernel_logpdf(spec: KernelSpec, u: float | np.ndarray) -> float | np.ndarray:
    """log K_h(u) = log(kappa_nu(u / h) / h)."""
    z = _standardized(spec, u)
    return _scalar_or_array(log_kernel_from_squares(spec, z * z) - math.log(spec.h))


def kernel_density(spec: KernelSpec, u: float | np.ndarray) -> float | np.ndarray:
    """K_h(u) = kappa_nu(u / h) / h; nu = inf is the standard normal density."""
    return _scalar_or_array(np.exp(kernel_logpdf(spec, u)))


def kernel_cdf(spec: KernelSpec, u: float | np.ndarray) -> float | np.ndarray:
    """Standardized kernel CDF at u / h.

    Student-t via the regularized incomplete beta function (stdtr), Gaussian via
    the error function (ndtr).
    """
    z = _standardized(spec, u)
    if spec.is_gaussian:
        values = special.ndtr(z)
    else:
        values = special.stdtr(spec.nu, z)
    return _scalar_or_array(values)


def kernel_ppf(spec: KernelSpec, p: float | np.ndarray) -> float | np.ndarray:
    """Quantile of the standardized kernel (bandwidth not applied)."""
    if spec.is_gaussian:
        values = special.ndtri(p)
    else:
        values = special.stdtrit(spec.nu, p)
    return _scalar_or_array(np.asarray(values, dtype=float))


def _require_finite_mean(spec: KernelSpec) -> None:
    if not spec.is_gaussian and spec.nu <= 1:
        raise NumericalError("CRPS undefined: infinite first moment")


def _student_excess(nu: float, c: np.ndarray) -> np.ndarray:
    a = np.abs(c)
    density = np.exp(log_kernel_from_squares(KernelSpec(nu=nu, h=1.0), a * a))
    return 2.0 * density * (nu + a * a) / (nu - 1.0) - 2.0 * a * special.stdtr(nu, -a)


def _gaussian_excess(c: np.ndarray) -> np.ndarray:
    a = np.abs(c)
    return 2.0 * np.exp(-0.5 * a * a - _HALF_LOG_2PI) - 2.0 * a * special.ndtr(-a)


def kernel_excess(spec: KernelSpec, c: float | np.ndarray) -> float | np.ndarray:
    """E|T + c| - |c| for T drawn from the standardized kernel.

    Finite for nu > 1; decays like |c|^(1 - nu), or faster than any power for
    the Gaussian kernel.
    """
    _require_finite_mean(spec)
    c = np.asarray(c, dtype=float)
    values = _gaussian_excess(c) if spec.is_gaussian else _student_excess(spec.nu, c)
    return _scalar_or_array(np.maximum(values, 0.0))


def _pair_knots() -> np.ndarray:
    linear_end, linear_count = PAIR_TABLE_LINEAR
    geometric_end, geometric_count = PAIR_TABLE_GEOMETRIC
    return np.unique(np.concatenate([
        np.linspace(0.0, linear_end, linear_count),
        np.geomspace(linear_end, geometric_end, geometric_count),
    ]))


@lru_cache(maxsize=None)
def _pair_excess_table(nu: float) -> tuple[interpolate.CubicSpline, float, float]:
    """Spline of E|d + T - T'| - d over log1p(d), T and T' independent t_nu.

    E|d + T - T'| - d = ex(d) + int ex(r) f(d - r) dr with ex = kernel_excess.
    ex is even with a kink at 0 only, so the integral is folded onto r > 0
    and broken at the knots, where the folded density peaks.
    """
    unit = KernelSpec(nu=nu, h=1.0)
    knots = _pair_knots()

    def integrand(r: float) -> np.ndarray:
        below, above = knots - r, knots + r
        folded = np.exp(log_kernel_from_squares(unit, below * below))
        folded += np.exp(log_kernel_from_squares(unit, above * above))
        return float(_student_excess(nu, np.asarray(r))) * folded

    convolved, error = integrate.quad_vec(
        integrand, 0.0, 2.0 * knots[-1], points=knots[1:],
        epsabs=PAIR_TABLE_TOL, epsrel=PAIR_TABLE_TOL, norm="max", limit=50_000,
    )
    tail, _ = integrate.quad_vec(integrand, 2.0 * knots[-1], np.inf, epsabs=PAIR_TABLE_TOL, norm="max")
    values = _student_excess(nu, knots) + convolved + tail
    _LOGGER.debug("Tabulated pair excess for nu=%s (quadrature error %.2g)", nu, error)
    return interpolate.CubicSpline(np.log1p(knots), values), float(knots[-1]), float(values[-1])


def pair_excess(spec: KernelSpec, d: float | np.ndarray) -> float | np.ndarray:
    """E|d + T - T'| - |d| for independent T, T' drawn from the standardized kernel.

    Closed form for the Gaussian kernel (T - T' is normal with variance 2).
    Student-t kernels use a table computed once per nu; beyond its last knot
    the power-law decay |d|^(1 - nu) is extrapolated.
    """
    _require_finite_mean(spec)
    d = np.abs(np.asarray(d, dtype=float))
    if spec.is_gaussian:
        return _scalar_or_array(math.sqrt(2.0) * _gaussian_excess(d / math.sqrt(2.0)))
    spline, last_knot, last_value = _pair_excess_table(float(spec.nu))
    tabulated = spline(np.log1p(np.minimum(d, last_knot)))
    extrapolated = last_value * (last_knot / np.maximum(d, last_knot)) ** (spec.nu - 1.0)
    values = np.where(d <= last_knot, tabulated, extrapolated)
    return _scalar_or_array(np.maximum(values, 0.0))


def smooth(cdf: StepCDF, spec: KernelSpec) -> MixtureDistribution:
    """Place a kernel translate with weight w_j at every threshold of the step CDF."""
    return MixtureDistribution(locations=cdf.support, weights=cdf.masses, kernel=spec)


def mixture_cdf(mix: MixtureDistribution, y: float | np.ndarray) -> float | np.ndarray:
    """sum_j w_j * Kappa((y - y_j) / h), the convolution of the step CDF with K_h."""
    ys = np.asarray(y, dtype=float)
    terms = kernel_cdf(mix.kernel, ys[..., None] - mix.locations)
    values = np.clip(np.asarray(terms) @ mix.weights, 0.0, 1.0)
    return _scalar_or_array(values)


def weighted_logsumexp(log_terms: np.ndarray, weight_logs: np.ndarray) -> np.ndarray:
    """log sum_j exp(log_terms_j + weight_logs_j) along the last axis."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return special.logsumexp(log_terms + weight_logs, axis=-1)


def log_weights(weights: np.ndarray) -> np.ndarray:
    """Logs of mixture weights; zero weights become -inf and never set the offset."""
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(weights, dtype=float))


def mixture_logpdf(mix: MixtureDistribution, y: float | np.ndarray) -> float | np.ndarray:
    """Log density via log-sum-exp over the component log densities."""
    ys = np.asarray(y, dtype=float)
    log_terms = np.asarray(kernel_logpdf(mix.kernel, ys[..., None] - mix.locations))
    return _scalar_or_array(weighted_logsumexp(log_terms, log_weights(mix.weights)))


def mixture_density(mix: MixtureDistribution, y: float | np.ndarray) -> float | np.ndarray:
    ys = np.asarray(y, dtype=float)
    terms = np.asarray(kernel_density(mix.kernel, ys[..., None] - mix.locations))
    return _scalar_or_array(terms @ mix.weights)


def bracket(mix: MixtureDistribution) -> tuple[float, float]:
    """Interval outside of which every component keeps at most QUANTILE_TAIL mass per side."""
    span = -mix.kernel.h * float(kernel_ppf(mix.kernel, QUANTILE_TAIL))
    return float(mix.locations.min() - span), float(mix.locations.max() + span)


def mixture_quantile(mix: MixtureDistribution, alpha: float) -> float:
    """Root of mixture_cdf(y) = alpha, bracketed and refined with Brent's method.

    The bracket grows geometrically until it encloses the root.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"quantile level must lie in (0, 1), got {alpha!r}")
    lo, hi = bracket(mix)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    for expansion in range(QUANTILE_MAX_EXPANSIONS + 1):
        if mixture_cdf(mix, lo) < alpha <= mixture_cdf(mix, hi):
            break
        half *= 2.0
        lo, hi = center - half, center + half
        _LOGGER.debug("Expanding quantile bracket to [%s, %s] (attempt %d)", lo, hi, expansion + 1)
    else:
        raise NumericalError(f"could not bracket the {alpha} quantile")

    xtol = QUANTILE_TOL * min(1.0, mix.kernel.h)
    root = optimize.brentq(lambda y: mixture_cdf(mix, y) - alpha, lo, hi, xtol=xtol, maxiter=500)
    return float(root)


def mixture_quantiles(mix: MixtureDistribution, levels: Sequence[float]) -> list[float]:
    return [mixture_quantile(mix, alpha) for alpha in levels]


def mixture_mean(mix: MixtureDistribution) -> float:
    """Mean of the mixture; defined for nu > 1."""
    if not mix.kernel.is_gaussian and mix.kernel.nu <= 1:
        raise NumericalError("mean undefined: infinite first moment")
    return float(np.dot(mix.weights, mix.locations))
