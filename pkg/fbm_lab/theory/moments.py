"""Moments of local times and intersection local times.

Local-time moments are integrals of products of inverse conditional standard
deviations over the ordered simplex. They are evaluated by importance
sampling: the spacings between consecutive times are drawn from the law
matching the Brownian envelope ``prod gap^{-Hd}``, so that the remaining
weight is the bounded ratio of conditional variances of normalized
increments.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from numba import njit, prange
from scipy import special

from ..errors import DomainError, NonPSDError, SizeLimitError
from ..estimators.intersection import estimate_alpha
from ..estimators.local_time import KernelParams, default_kernel
from ..simulator.covariance import (
    CovKind,
    CovModel,
    ModelParams,
    compute_c_H,
    conditional_variance,
)
from ..simulator.sampling import process_sampler
from ..utils.callbacks import ConvergenceCallback
from ..utils.random_streams import Stream, replica_generator
from ..utils.statistics import InequalityReport, inequality_verdict, mean_and_stderr
from .constants import L_bounds, RateBounds, theta_bounds, theta_from_L

LOGGER = logging.getLogger(__name__)

QUADRATURE = "quadrature"
IMPORTANCE = "importance-MC"
PATH = "path-MC"

MAX_ORDER = 8
CHUNK = 1 << 16
MIN_GAP = 1e-12


@dataclass
class MomentEstimate:
    """Moment of order ``m`` with its Monte Carlo standard error."""

    m: int
    value: float
    stderr: float
    samples: int
    method: str
    details: dict = field(default_factory=dict)

    def scaled(self, factor: float, method: Optional[str] = None):
        return MomentEstimate(
            m=self.m,
            value=self.value * factor,
            stderr=self.stderr * abs(factor),
            samples=self.samples,
            method=self.method if method is None else method,
            details=dict(self.details),
        )

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "value": self.value,
            "stderr": self.stderr,
            "samples": self.samples,
            "method": self.method,
            **self.details,
        }


def _check_order(m: int, limit: int = MAX_ORDER) -> None:
    if int(m) != m or m < 0:
        msg = f"Moment order must be a nonnegative integer, got {m}"
        raise DomainError(msg)
    if m > limit:
        msg = f"Moment order {m} exceeds the limit {limit}"
        raise SizeLimitError(msg)


def phi_m(times, params: ModelParams) -> float:
    """Product of ``Var(B(s_k) | B(s_1), ..., B(s_{k-1}))^{-d/2}``."""
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        return 1.0
    if times[0] <= 0.0 or np.any(np.diff(times) <= 0.0):
        msg = "Times must be positive and strictly increasing"
        raise DomainError(msg)
    if np.min(np.diff(np.concatenate([[0.0], times]))) < MIN_GAP:
        msg = "Time gaps below 1e-12 make the conditional variances degenerate"
        raise NonPSDError(msg)
    model = CovModel(CovKind.FBM, params)
    log_value = 0.0
    for k, target in enumerate(times):
        variance = conditional_variance(model, target, times[:k])
        if not variance > 0.0:
            msg = f"Conditional variance vanished at s = {target}"
            raise NonPSDError(msg)
        log_value -= 0.5 * params.d * math.log(variance)
    return math.exp(log_value)


def phi_m_bound(times, params: ModelParams) -> float:
    """Envelope ``(2H / c_H^2)^{md/2} prod gap^{-Hd}`` of ``phi_m``."""
    times = np.asarray(times, dtype=float).ravel()
    gaps = np.diff(np.concatenate([[0.0], times]))
    H, d = params.H, params.d
    ratio = 2.0 * H / compute_c_H(H) ** 2
    return float(ratio ** (0.5 * times.size * d) * np.prod(gaps ** (-H * d)))


@njit(cache=True)
def _increment_growth(x, g, two_h):
    if x <= 0.0:
        return g**two_h
    return x**two_h * np.expm1(two_h * np.log1p(g / x))


@njit(cache=True)
def _weight_one(gaps, two_h, half_d, lower):
    m = gaps.shape[0]
    times = np.empty(m)
    acc = 0.0
    for k in range(m):
        acc += gaps[k]
        times[k] = acc
    scale = np.empty(m)
    for k in range(m):
        scale[k] = gaps[k] ** (0.5 * two_h)
    corr = np.empty((m, m))
    for i in range(m):
        corr[i, i] = 1.0
        for j in range(i + 1, m):
            near = times[j] - times[i]
            far = times[j - 1] - times[i]
            cov = 0.5 * (
                _increment_growth(near, gaps[i], two_h)
                - _increment_growth(far, gaps[i], two_h)
            )
            corr[i, j] = cov / (scale[i] * scale[j])
            corr[j, i] = corr[i, j]
    factor = np.zeros((m, m))
    log_weight = 0.0
    for j in range(m):
        schur = corr[j, j]
        for k in range(j):
            schur -= factor[j, k] * factor[j, k]
        ratio = schur
        if not ratio >= lower:
            ratio = lower
        if ratio > 1.0:
            ratio = 1.0
        log_weight -= half_d * np.log(ratio)
        pivot = np.sqrt(max(schur, lower))
        factor[j, j] = pivot
        for i in range(j + 1, m):
            value = corr[i, j]
            for k in range(j):
                value -= factor[i, k] * factor[j, k]
            factor[i, j] = value / pivot
    return np.exp(log_weight)


@njit(cache=True, parallel=True)
def _importance_weights(gaps, two_h, half_d, lower):
    weights = np.empty(gaps.shape[0])
    for n in prange(gaps.shape[0]):
        weights[n] = _weight_one(gaps[n], two_h, half_d, lower)
    return weights


def importance_weights(gaps, params: ModelParams) -> np.ndarray:
    """
    Ratio ``phi_m / prod gap^{-Hd}`` for each row of ``gaps``.

    The conditional variance ratios of normalized fBm increments lie in
    ``[c_H^2 / (2H), 1]``; rounding excursions are clamped back into it, so
    every weight lies in ``[1, (2H / c_H^2)^{md/2}]``.
    """
    gaps = np.ascontiguousarray(np.atleast_2d(gaps), dtype=float)
    gaps = np.maximum(gaps, np.finfo(float).tiny)
    H = params.H
    lower = compute_c_H(H) ** 2 / (2.0 * H)
    if params.is_brownian or gaps.shape[1] <= 1:
        return np.ones(gaps.shape[0])
    return _importance_weights(gaps, 2.0 * H, 0.5 * params.d, lower)


def _unit_prefactor(m: int, params: ModelParams) -> float:
    alpha = 1.0 - params.kappa
    return math.exp(
        special.gammaln(m + 1.0)
        - 0.5 * m * params.d * math.log(2.0 * math.pi)
        + m * special.gammaln(alpha)
        - special.gammaln(1.0 + m * alpha),
    )


def _exp_prefactor(m: int, params: ModelParams) -> float:
    alpha = 1.0 - params.kappa
    return math.exp(
        special.gammaln(m + 1.0)
        - 0.5 * m * params.d * math.log(2.0 * math.pi)
        + m * special.gammaln(alpha),
    )


def _draw_gaps(rng, m: int, count: int, alpha: float, simplex: bool):
    # column by column, so a prefix of spacings does not depend on m
    gaps = np.column_stack([rng.standard_gamma(alpha, count) for _ in range(m)])
    if simplex:
        total = gaps.sum(axis=1) + rng.standard_exponential(count)
        gaps = gaps / total[:, None]
    return gaps


def _weighted_mean(
    m: int,
    params: ModelParams,
    budget: int,
    seed: int,
    simplex: bool,
    verbose: int = 0,
):
    alpha = 1.0 - params.kappa
    callback = ConvergenceCallback(log_interval=16, verbose=verbose)
    callback.on_run_start(f"moment m={m}")
    total = 0.0
    total_sq = 0.0
    count = 0
    for chunk, start in enumerate(range(0, budget, CHUNK)):
        size = min(CHUNK, budget - start)
        rng = replica_generator(seed, chunk, Stream.IMPORTANCE)
        weights = importance_weights(_draw_gaps(rng, m, size, alpha, simplex), params)
        total += float(np.sum(weights))
        total_sq += float(np.sum(weights * weights))
        count += size
        callback.on_batch(weights)
    callback.on_run_end()
    mean = total / count
    variance = max(total_sq / count - mean * mean, 0.0)
    stderr = math.sqrt(variance / max(count - 1, 1))
    return mean, stderr


def moment_unit_time(
    m: int,
    params: ModelParams,
    budget: int = 1_000_000,
    seed: int = 0,
    verbose: int = 0,
) -> MomentEstimate:
    """
    ``E[L_1^0(B^H)^m]`` by importance sampling of the ordered simplex.

    The spacings follow the Dirichlet law ``(1 - Hd, ..., 1 - Hd, 1)``. For
    ``m = 1`` or ``H = 1/2`` the weight is identically one and the closed
    form is returned.
    """
    params.check_fbm()
    params.check_local_time_regime()
    _check_order(m)
    prefactor = _unit_prefactor(m, params)
    if m <= 1 or params.is_brownian:
        return MomentEstimate(m, prefactor, 0.0, 0, QUADRATURE)
    mean, stderr = _weighted_mean(m, params, budget, seed, True, verbose)
    return MomentEstimate(m, prefactor * mean, prefactor * stderr, budget, IMPORTANCE)


def exp_moment(
    m: int,
    params: ModelParams,
    budget: int = 1_000_000,
    seed: int = 0,
    verbose: int = 0,
) -> MomentEstimate:
    """``E[L_tau^0(B^H)^m]`` for an independent unit exponential time ``tau``,
    with i.i.d. ``Gamma(1 - Hd)`` spacings as the importance law."""
    params.check_fbm()
    params.check_local_time_regime()
    _check_order(m)
    prefactor = _exp_prefactor(m, params)
    if m <= 1 or params.is_brownian:
        return MomentEstimate(m, prefactor, 0.0, 0, QUADRATURE)
    mean, stderr = _weighted_mean(m, params, budget, seed, False, verbose)
    return MomentEstimate(m, prefactor * mean, prefactor * stderr, budget, IMPORTANCE)


def exp_moment_bracket(m: int, params: ModelParams) -> RateBounds:
    """``m! ((2 pi)^{-d/2} Gamma(1-Hd))^m`` and ``(pi c_H^2 / H)^{-md/2} m!
    Gamma(1-Hd)^m``."""
    bounds = L_bounds(params)
    factorial = math.factorial(m)
    return RateBounds(
        "moment",
        factorial * bounds.lower**m,
        factorial * bounds.upper**m,
    )


def exp_from_unit_moment(estimate: MomentEstimate, params: ModelParams):
    """``E L_tau^m = Gamma(1 + (1 - Hd) m) E L_1^m``."""
    factor = math.exp(special.gammaln(1.0 + (1.0 - params.kappa) * estimate.m))
    return estimate.scaled(factor)


def unit_from_exp_moment(estimate: MomentEstimate, params: ModelParams):
    factor = math.exp(-special.gammaln(1.0 + (1.0 - params.kappa) * estimate.m))
    return estimate.scaled(factor)


def superadditivity_check(
    m: int,
    n: int,
    params: ModelParams,
    budget: int = 1_000_000,
    seed: int = 0,
) -> InequalityReport:
    """
    Paired check of ``E L_tau^{m+n} >= binom(m+n, m) E L_tau^m E L_tau^n``.

    One draw of ``m + n`` gamma spacings feeds the three estimates: the first
    ``m`` spacings for the order-``m`` weight, the last ``n`` for the order-``n``
    weight. The difference of the two sides is then a single sample mean.
    """
    params.check_fbm()
    params.check_local_time_regime()
    if m < 1 or n < 1 or m + n > 6:
        msg = f"Superadditivity is checked for m, n >= 1 and m + n <= 6, got {m}, {n}"
        raise DomainError(msg)
    alpha = 1.0 - params.kappa
    base = math.exp(
        -0.5 * params.d * math.log(2.0 * math.pi) + special.gammaln(alpha),
    )
    scale = math.factorial(m + n) * base ** (m + n)
    sums = np.zeros(3)
    differences = []
    for chunk, start in enumerate(range(0, budget, CHUNK)):
        size = min(CHUNK, budget - start)
        rng = replica_generator(seed, chunk, Stream.IMPORTANCE)
        gaps = _draw_gaps(rng, m + n, size, alpha, simplex=False)
        joint = importance_weights(gaps, params)
        first = importance_weights(gaps[:, :m], params)
        second = importance_weights(gaps[:, m:], params)
        sums += [joint.sum(), first.sum(), second.sum()]
        differences.append(joint - first * second)
    differences = scale * np.concatenate(differences)
    slack, stderr = mean_and_stderr(differences)
    means = sums / budget
    estimates = [
        {"m": m + n, "value": math.factorial(m + n) * base ** (m + n) * means[0]},
        {"m": m, "value": math.factorial(m) * base**m * means[1]},
        {"m": n, "value": math.factorial(n) * base**n * means[2]},
    ]
    verdict = inequality_verdict(slack, stderr, estimates[0]["value"])
    LOGGER.info("Superadditivity (%d, %d): slack %g +/- %g", m, n, slack, stderr)
    return InequalityReport(
        operation="superadditivity_check",
        params=params.to_dict(),
        inequality="E L^(m+n) >= binom(m+n, m) E L^m E L^n",
        estimates=estimates,
        slack=slack,
        stderr=stderr,
        verdict=verdict,
        details={"m": m, "n": n, "budget": budget},
    )


@dataclass
class LThetaEstimate:
    """Finite-order estimate of ``L`` with the induced estimate of theta."""

    L: RateBounds
    theta: RateBounds
    per_order: list
    L_stderr: float
    best_order: int

    def to_dict(self) -> dict:
        return {
            "L": self.L.to_dict(),
            "theta": self.theta.to_dict(),
            "per_order": self.per_order,
            "L_stderr": self.L_stderr,
            "best_order": self.best_order,
        }


def estimate_L_theta(
    params: ModelParams,
    m_max: int = 6,
    budget: int = 1_000_000,
    seed: int = 0,
) -> LThetaEstimate:
    """
    ``max_m ((1/m!) E L_tau^m)^{1/m}``, a lower estimate of ``L`` by
    superadditivity, and the matching upper estimate of theta.

    All orders reuse one array of gamma spacings (prefixes of length m), so
    the estimate is nondecreasing in ``m_max``.
    """
    params.check_fbm()
    params.check_local_time_regime()
    _check_order(m_max)
    if m_max < 1:
        msg = "m_max must be at least 1"
        raise DomainError(msg)
    alpha = 1.0 - params.kappa
    bracket = L_bounds(params)
    base = bracket.lower
    if params.is_brownian:
        means = np.ones(m_max)
        stderrs = np.zeros(m_max)
    else:
        sums = np.zeros(m_max)
        sums_sq = np.zeros(m_max)
        for chunk, start in enumerate(range(0, budget, CHUNK)):
            size = min(CHUNK, budget - start)
            rng = replica_generator(seed, chunk, Stream.IMPORTANCE)
            gaps = _draw_gaps(rng, m_max, size, alpha, simplex=False)
            for order in range(1, m_max + 1):
                weights = importance_weights(gaps[:, :order], params)
                sums[order - 1] += weights.sum()
                sums_sq[order - 1] += (weights * weights).sum()
        means = sums / budget
        variances = np.maximum(sums_sq / budget - means**2, 0.0)
        stderrs = np.sqrt(variances / max(budget - 1, 1))
    per_order = []
    for order in range(1, m_max + 1):
        mean = means[order - 1]
        value = base * mean ** (1.0 / order)
        stderr = base / order * mean ** (1.0 / order - 1.0) * stderrs[order - 1]
        per_order.append({"m": order, "L": value, "stderr": stderr})
    best = max(per_order, key=lambda record: record["L"])
    L_hat = best["L"]
    theta_hat = theta_from_L(L_hat, params)
    theta_range = theta_bounds(params)
    return LThetaEstimate(
        L=RateBounds("L", bracket.lower, bracket.upper, L_hat),
        theta=RateBounds("theta", theta_range.lower, theta_range.upper, theta_hat),
        per_order=per_order,
        L_stderr=best["stderr"],
        best_order=best["m"],
    )


@dataclass
class LogMomentGrowth:
    """Per-order values of ``(1/m) log((m!)^{-gamma} E[X^m])``."""

    gamma: float
    values: dict
    stderrs: dict
    bracket: Optional[RateBounds] = None
    verdicts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "values": self.values,
            "stderrs": self.stderrs,
            "bracket": None if self.bracket is None else self.bracket.to_dict(),
            "verdicts": self.verdicts,
        }


def log_moment_growth(estimates, gamma: float, bracket=None) -> LogMomentGrowth:
    """
    Normalized log moments and superadditivity verdicts for consecutive orders.

    ``a_m = log((m!)^{-gamma} E X^m)`` is checked against ``a_{m+1} >= a_m + a_1``
    with delta-method standard errors.
    """
    by_order = {estimate.m: estimate for estimate in estimates}
    logs, log_errors = {}, {}
    for order, estimate in sorted(by_order.items()):
        if not estimate.value > 0.0:
            msg = f"Moment of order {order} is not positive"
            raise DomainError(msg)
        logs[order] = math.log(estimate.value) - gamma * special.gammaln(order + 1.0)
        log_errors[order] = estimate.stderr / estimate.value
    values = {order: logs[order] / order for order in logs}
    stderrs = {order: log_errors[order] / order for order in logs}
    verdicts = []
    if 1 in logs:
        for order in sorted(logs):
            if order + 1 not in logs or order < 1:
                continue
            slack = logs[order + 1] - logs[order] - logs[1]
            stderr = math.sqrt(
                log_errors[order + 1] ** 2
                + log_errors[order] ** 2
                + log_errors[1] ** 2,
            )
            verdict = inequality_verdict(slack, stderr, 1.0, max_rel_stderr=1.0)
            verdicts.append(
                {"m": order, "slack": slack, "stderr": stderr, "verdict": verdict},
            )
    return LogMomentGrowth(gamma, values, stderrs, bracket, verdicts)


def intersection_exp_moment_bound(m: int, params: ModelParams) -> float:
    """``(m!)^p ((H/pi)^{d(p-1)/2} p^{-d/2} Gamma(1 - Hd/p*)^p)^m``."""
    params.check_intersection_regime()
    _check_order(m, limit=64)
    if m == 0:
        return 1.0
    H, d, p = params.H, params.d, params.p
    log_base = (
        0.5 * d * (p - 1) * math.log(H / math.pi)
        - 0.5 * d * math.log(p)
        + p * special.gammaln(1.0 - params.kappa / params.p_star)
    )
    return math.exp(p * special.gammaln(m + 1.0) + m * log_base)


def exp_time_intersection_bracket(
    m: int,
    params: ModelParams,
    unit_moment: float,
) -> RateBounds:
    """Bracket of ``E alpha(tau-box)^m`` from the unit-cube moment."""
    params.check_intersection_regime()
    beta = params.p - params.kappa * (params.p - 1)
    lower = math.exp(
        -beta * m * math.log(params.p) + special.gammaln(1.0 + beta * m),
    )
    upper = math.exp(
        params.p * special.gammaln(1.0 + m * (1.0 - params.kappa / params.p_star)),
    )
    return RateBounds("moment", lower * unit_moment, upper * unit_moment)


def region_lower_factor(m: int, params: ModelParams, delta: float) -> float:
    """``[1 - delta^{1 - Hd(p-1)/p}]^{mp}``."""
    if not 0.0 < delta < 1.0:
        msg = f"delta must lie in (0, 1), got {delta}"
        raise DomainError(msg)
    params.check_intersection_regime()
    exponent = 1.0 - params.kappa * (params.p - 1) / params.p
    return (1.0 - delta**exponent) ** (m * params.p)


def _exp_box_alphas(
    params: ModelParams,
    n_steps: int,
    replicas: int,
    seed: int,
    kernel: KernelParams,
    workers: int = 1,
) -> np.ndarray:
    sampler = process_sampler(CovKind.RL, params, n_steps, 1.0)
    values = np.empty(replicas)
    for start in range(0, replicas, 128):
        count = min(128, replicas - start)
        batches = [
            sampler.sample(
                seed,
                count,
                stream=Stream.INTERSECTION + j,
                first_replica=start,
                workers=workers,
            )
            for j in range(params.p)
        ]
        for index in range(count):
            replica = start + index
            rng = replica_generator(seed, replica, Stream.HORIZONS)
            horizons = rng.standard_exponential(params.p)
            paths = [
                batch[index].scaled(tau, tau**params.H)
                for batch, tau in zip(batches, horizons)
            ]
            values[replica] = estimate_alpha(paths, list(horizons), kernel)
    return values


def subadditivity_check_intersection(
    m: int,
    n: int,
    params: ModelParams,
    budget: int = 1000,
    seed: int = 0,
    n_steps: int = 256,
    kernel: Optional[KernelParams] = None,
    workers: int = 1,
) -> InequalityReport:
    """
    Path Monte Carlo check of
    ``E alpha^{m+n} <= binom(m+n, m)^p E alpha^m E alpha^n`` for the
    Riemann-Liouville intersection local time over independent exponential
    horizons.

    Each replica scales unit-grid paths to its horizons by self-similarity.
    The three moments share the replicas; the standard error of the slack
    comes from its delta-method influence function.
    """
    if params.p != 2:
        msg = "Intersection subadditivity is checked for p = 2"
        raise DomainError(msg)
    params.check_intersection_regime()
    if m < 1 or n < 1 or m + n > 4:
        msg = f"Subadditivity is checked for m, n >= 1 and m + n <= 4, got {m}, {n}"
        raise DomainError(msg)
    if kernel is None:
        kernel = default_kernel(1.0 / n_steps, params.H)
    alphas = _exp_box_alphas(params, n_steps, budget, seed, kernel, workers)
    joint = alphas ** (m + n)
    first = alphas**m
    second = alphas**n
    factor = math.comb(m + n, m) ** params.p
    x_bar, y_bar, z_bar = joint.mean(), first.mean(), second.mean()
    slack = factor * y_bar * z_bar - x_bar
    influence = factor * (z_bar * first + y_bar * second) - joint
    stderr = float(np.std(influence, ddof=1) / math.sqrt(budget)) if budget > 1 else 0.0
    verdict = inequality_verdict(slack, stderr, factor * y_bar * z_bar)
    return InequalityReport(
        operation="subadditivity_check_intersection",
        params=params.to_dict(),
        inequality="E a^(m+n) <= binom(m+n, m)^p E a^m E a^n",
        estimates=[
            {"m": m + n, "value": float(x_bar)},
            {"m": m, "value": float(y_bar)},
            {"m": n, "value": float(z_bar)},
            {"bound": intersection_exp_moment_bound(m + n, params)},
        ],
        slack=float(slack),
        stderr=stderr,
        verdict=verdict,
        details={"binomial_factor": factor, "epsilon": kernel.epsilon},
    )


def sample_exp_box_moments(
    params: ModelParams,
    orders,
    replicas: int,
    seed: int,
    n_steps: int = 256,
    kernel: Optional[KernelParams] = None,
) -> list:
    """Path Monte Carlo moments of the RL intersection local time over
    exponential horizons."""
    params.check_intersection_regime()
    if kernel is None:
        kernel = default_kernel(1.0 / n_steps, params.H)
    alphas = _exp_box_alphas(params, n_steps, replicas, seed, kernel)
    estimates = []
    for order in orders:
        mean, stderr = mean_and_stderr(alphas**order)
        estimates.append(MomentEstimate(order, mean, stderr, replicas, PATH))
    return estimates


class FieldKind(Enum):
    FBM = "fbm"
    RL = "rl"
    FBM_DIFFERENCE = "fbm_difference"
    RL_DIFFERENCE = "rl_difference"

    @property
    def process(self) -> CovKind:
        if self in (FieldKind.FBM, FieldKind.FBM_DIFFERENCE):
            return CovKind.FBM
        return CovKind.RL

    @property
    def is_difference(self) -> bool:
        return self in (FieldKind.FBM_DIFFERENCE, FieldKind.RL_DIFFERENCE)


def field_moment(
    field_kind: FieldKind,
    m: int,
    params: ModelParams,
    budget: int = 200_000,
    seed: int = 0,
) -> MomentEstimate:
    """
    ``m``-th moment of the local time at zero of a Gaussian field over the
    unit cube, from ``(2 pi)^{-mD/2} int det(Cov)^{-d/2}``.

    One-parameter fields (fBm, RL on ``[0,1]``) use Dirichlet importance
    sampling of the ordered times. Difference fields
    ``X_1(s_1) - X_2(s_2), ..., X_{p-1}(s_{p-1}) - X_p(s_p)`` on ``[0,1]^p``
    use uniform sampling of the ``m`` parameter points.
    """
    _check_order(m, limit=3)
    if m < 1:
        msg = "Field moments are computed for m >= 1"
        raise DomainError(msg)
    model = CovModel(field_kind.process, params)
    d = params.d
    if field_kind.is_difference:
        params.check_intersection_regime()
        if m > 2 or params.p > 3:
            msg = "Difference-field moments are computed for m <= 2 and p <= 3"
            raise SizeLimitError(msg)
        return _difference_field_moment(model, m, budget, seed)
    params.check_local_time_regime()
    alpha = 1.0 - params.kappa
    prefactor = _unit_prefactor(m, params)
    values = []
    for chunk, start in enumerate(range(0, budget, CHUNK)):
        size = min(CHUNK, budget - start)
        rng = replica_generator(seed, chunk, Stream.FIELD)
        gaps = _draw_gaps(rng, m, size, alpha, simplex=True)
        gaps = np.maximum(gaps, MIN_GAP)
        times = np.cumsum(gaps, axis=1)
        cov = np.asarray(model.kernel(times[:, :, None], times[:, None, :]))
        sign, logdet = np.linalg.slogdet(cov.reshape(size, m, m))
        log_weight = -0.5 * d * logdet + params.kappa * np.sum(np.log(gaps), axis=1)
        weights = np.where(sign > 0, np.exp(log_weight), 0.0)
        degenerate = int(np.sum(sign <= 0))
        if degenerate:
            LOGGER.warning("%d singular covariance draws set to zero", degenerate)
        values.append(weights)
    mean, stderr = mean_and_stderr(np.concatenate(values))
    return MomentEstimate(m, prefactor * mean, prefactor * stderr, budget, IMPORTANCE)


def _difference_field_moment(model: CovModel, m: int, budget: int, seed: int):
    params = model.params
    p, d = params.p, params.d
    dim = m * (p - 1)
    values = []
    for chunk, start in enumerate(range(0, budget, CHUNK)):
        size = min(CHUNK, budget - start)
        rng = replica_generator(seed, chunk, Stream.FIELD)
        times = rng.random((size, m, p))
        # difference (k, j) is X_j(s_kj) - X_{j+1}(s_k,j+1)
        terms = []
        for k in range(m):
            for j in range(p - 1):
                terms.append(
                    ((j, times[:, k, j], 1.0), (j + 1, times[:, k, j + 1], -1.0)),
                )
        cov = np.zeros((size, dim, dim))
        for a, left in enumerate(terms):
            for b in range(a, dim):
                right = terms[b]
                entry = np.zeros(size)
                for process, s, sign_s in left:
                    for other, t, sign_t in right:
                        if process == other:
                            entry += sign_s * sign_t * model.kernel(s, t)
                cov[:, a, b] = entry
                cov[:, b, a] = entry
        sign, logdet = np.linalg.slogdet(cov)
        log_weight = -0.5 * dim * d * math.log(2.0 * math.pi) - 0.5 * d * logdet
        weights = np.where(sign > 0, np.exp(np.where(sign > 0, log_weight, 0.0)), 0.0)
        values.append(weights)
    mean, stderr = mean_and_stderr(np.concatenate(values))
    return MomentEstimate(m, mean, stderr, budget, IMPORTANCE, {"uniform": True})
