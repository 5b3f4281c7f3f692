"""Kernel and occupation-window estimators of the local time at a point."""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, stats

from ..errors import DomainError
from ..simulator.covariance import CovModel
from ..simulator.sampling import GridPath, PathBatch, process_sampler
from ..utils.callbacks import MonteCarloCallback
from ..utils.statistics import (
    InequalityReport,
    inequality_verdict,
    ks_two_sample,
    linear_slope,
    mean_and_stderr,
    wilson_interval,
)

LOGGER = logging.getLogger(__name__)

MIN_EXCEEDANCES = 10


@dataclass(frozen=True)
class KernelParams:
    """Gaussian smoothing kernel of variance ``epsilon``."""

    epsilon: float
    kind: str = "gaussian"

    def __post_init__(self):
        if not self.epsilon > 0.0:
            msg = f"Kernel variance must be positive, got {self.epsilon}"
            raise DomainError(msg)
        if self.kind != "gaussian":
            msg = f"Unknown kernel kind {self.kind!r}"
            raise DomainError(msg)

    def rescaled(self, t: float, H: float) -> "KernelParams":
        """Kernel matching a path observed up to time ``t`` by self-similarity."""
        return KernelParams(t ** (2.0 * H) * self.epsilon, self.kind)

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "kind": self.kind}


def default_epsilon(step: float, H: float) -> float:
    """Kernel variance dominating the grid-scale oscillation step^H."""
    return max(10.0 * step ** (2.0 * H), 1e-4)


def default_kernel(step: float, H: float) -> KernelParams:
    return KernelParams(default_epsilon(step, H))


def _as_point(x, dimension: int) -> np.ndarray:
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.size == 1 and dimension > 1:
        point = np.full(dimension, float(point[0]))
    if point.size != dimension:
        msg = f"Point of size {point.size} for a {dimension}-dimensional path"
        raise DomainError(msg)
    return point


def gaussian_kernel(y, epsilon: float):
    """Centered Gaussian density of covariance ``epsilon * I`` at ``y``.

    The last axis of ``y`` holds the coordinates; a scalar is a 1-d point.
    """
    if not epsilon > 0.0:
        msg = f"Kernel variance must be positive, got {epsilon}"
        raise DomainError(msg)
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y[None]
    dimension = y.shape[-1]
    squared = np.sum(y * y, axis=-1)
    value = (2.0 * math.pi * epsilon) ** (-0.5 * dimension) * np.exp(
        -0.5 * squared / epsilon,
    )
    return float(value) if np.ndim(value) == 0 else value


def _smoothed_values(times, values, point, epsilon):
    """Smoothed local times of paths stored as ``(..., points, d)``."""
    density = gaussian_kernel(values - point, epsilon)
    return integrate.trapezoid(density, times, axis=-1)


def smoothed_local_time(path: GridPath, x, kernel: KernelParams) -> float:
    """Trapezoidal time integral of the Gaussian kernel along ``path``."""
    point = _as_point(x, path.dimension)
    return float(_smoothed_values(path.times, path.values, point, kernel.epsilon))


def occupation_local_time(path: GridPath, x: float, h: float) -> float:
    """Time spent in ``[x - h, x + h]`` divided by ``2h`` (one dimension only)."""
    if path.dimension != 1:
        msg = "The occupation-window estimator is only offered for d = 1"
        raise DomainError(msg)
    if not h > 0.0:
        msg = f"Bandwidth must be positive, got {h}"
        raise DomainError(msg)
    inside = (np.abs(path.values[:, 0] - float(x)) <= h).astype(float)
    return float(integrate.trapezoid(inside, path.times) / (2.0 * h))


def occupation_mass(
    path: GridPath,
    kernel: KernelParams,
    x_grid: Optional[np.ndarray] = None,
) -> float:
    """Integral over space of the smoothed local time (one dimension).

    Equals the time span of the path up to the quadrature error when the
    spatial grid covers the path range plus the kernel tails.
    """
    if path.dimension != 1:
        msg = "Occupation mass is computed on a one-dimensional space grid"
        raise DomainError(msg)
    width = math.sqrt(kernel.epsilon)
    if x_grid is None:
        low = float(path.values.min()) - 8.0 * width
        high = float(path.values.max()) + 8.0 * width
        x_grid = np.arange(low, high + width / 8.0, width / 8.0)
    x_grid = np.asarray(x_grid, dtype=float)
    field_values = np.array(
        [
            _smoothed_values(path.times, path.values, np.array([x]), kernel.epsilon)
            for x in x_grid
        ],
    )
    return float(integrate.trapezoid(field_values, x_grid))


@dataclass
class LocalTimeSample:
    """One smoothed local time per path replica."""

    values: np.ndarray
    model: CovModel
    horizon: float
    x: np.ndarray
    kernel: KernelParams
    step: float
    seed: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(np.size(self.values))

    def to_dict(self) -> dict:
        return {
            "model": self.model.kind.value,
            "params": self.model.params.to_dict(),
            "kernel": self.kernel.to_dict(),
            "horizon": self.horizon,
            "x": list(np.atleast_1d(self.x)),
            "step": self.step,
            "replicas": len(self),
            "values": list(self.values),
        }


def batch_local_times(batch: PathBatch, x, kernel: KernelParams) -> np.ndarray:
    """Smoothed local time of every replica of ``batch``."""
    point = _as_point(x, batch.dimension)
    if len(batch) == 0:
        return np.zeros(0)
    return _smoothed_values(batch.times, batch.values, point, kernel.epsilon)


def sample_local_time(
    model: CovModel,
    t: float,
    x,
    kernel: Optional[KernelParams],
    n_steps: int,
    seed: int,
    replicas: int,
    workers: int = 1,
    chunk_size: int = 512,
    callback: Optional[MonteCarloCallback] = None,
) -> LocalTimeSample:
    """
    Sample the smoothed local time of ``model`` at ``x`` over ``[0, t]``.

    Paths are drawn in chunks of replicas so only one chunk is held in memory;
    replica ``r`` always uses the same random stream.

    :param kernel: smoothing kernel, the default variance rule when None
    :return: the sample, deterministic in ``(seed, replicas)``
    """
    model.params.check_local_time_regime()
    step = t / n_steps
    if kernel is None:
        kernel = default_kernel(step, model.params.H)
    point = _as_point(x, model.params.d)
    values = []
    sampler = process_sampler(model.kind, model.params, n_steps, t)
    if callback is not None:
        callback.on_run_start(f"local time {model.kind.value}")
    for start in range(0, replicas, chunk_size):
        count = min(chunk_size, replicas - start)
        batch = sampler.sample(seed, count, first_replica=start, workers=workers)
        chunk_values = batch_local_times(batch, point, kernel)
        values.append(chunk_values)
        if callback is not None and not callback.on_batch(chunk_values):
            break
    if callback is not None:
        callback.on_run_end()
    values = np.concatenate(values) if values else np.zeros(0)
    LOGGER.info(
        "Sampled %d local times of %s, eps = %g",
        values.size,
        model.kind.value,
        kernel.epsilon,
    )
    return LocalTimeSample(
        values=values,
        model=model,
        horizon=float(t),
        x=point,
        kernel=kernel,
        step=step,
        seed=seed,
    )


def local_time_exponent(model: CovModel) -> float:
    return 1.0 - model.params.kappa


def scaling_check(
    model: CovModel,
    t: float,
    base_sample: LocalTimeSample,
    sample_at_t: LocalTimeSample,
) -> float:
    """KS distance between ``L_t`` and ``t^(1-Hd) L_1``.

    The sample at ``t`` must use the kernel ``base.kernel.rescaled(t, H)``.
    """
    expected = base_sample.kernel.rescaled(t, model.params.H).epsilon
    if not math.isclose(sample_at_t.kernel.epsilon, expected, rel_tol=1e-9):
        LOGGER.warning(
            "Kernel at t = %g is %g, self-similarity needs %g",
            t,
            sample_at_t.kernel.epsilon,
            expected,
        )
    scaled = t ** local_time_exponent(model) * np.asarray(base_sample.values)
    return ks_two_sample(sample_at_t.values, scaled)


@dataclass
class TailPoint:
    level: float
    exceedances: int
    probability: float
    log_probability: float
    ci_low: float
    ci_high: float
    normalized: float
    resolved: bool

    def to_dict(self) -> dict:
        return {
            "a": self.level,
            "exceedances": self.exceedances,
            "probability": self.probability,
            "log_probability": self.log_probability,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "normalized": self.normalized,
            "resolved": self.resolved,
        }


def tail_curve(sample, levels, kappa: Optional[float] = None, confidence=0.95):
    """
    Empirical log tail probabilities ``log P(L >= a)`` with Wilson intervals.

    The normalized column ``a^(-1/kappa) log P`` is the quantity compared with
    minus the rate constant; levels with fewer than ten exceedances are
    flagged as unresolved.

    :param sample: a LocalTimeSample or an array of values
    :param levels: tail levels ``a``
    :param kappa: normalization exponent, H*d of the sample model by default
    :return: a list of TailPoint
    """
    if isinstance(sample, LocalTimeSample):
        values = np.asarray(sample.values, dtype=float)
        if kappa is None:
            kappa = sample.model.params.kappa
    else:
        values = np.asarray(sample, dtype=float)
    if kappa is None:
        msg = "A normalization exponent is needed for raw samples"
        raise DomainError(msg)
    trials = values.size
    curve = []
    for level in np.asarray(levels, dtype=float):
        exceedances = int(np.sum(values >= level))
        probability = exceedances / trials if trials else float("nan")
        log_probability = math.log(probability) if probability > 0 else -math.inf
        low, high = wilson_interval(exceedances, trials, confidence)
        normalized = (
            level ** (-1.0 / kappa) * log_probability if level > 0 else float("nan")
        )
        resolved = exceedances >= MIN_EXCEEDANCES
        if not resolved:
            LOGGER.debug("Tail level %g has only %d exceedances", level, exceedances)
        curve.append(
            TailPoint(
                level=float(level),
                exceedances=exceedances,
                probability=probability,
                log_probability=log_probability,
                ci_low=low,
                ci_high=high,
                normalized=normalized,
                resolved=resolved,
            ),
        )
    return curve


def tail_slope(curve, power: float, a_min=-math.inf, a_max=math.inf):
    """Least-squares slope of ``log P`` against ``a^power`` on resolved levels.

    :return: ``(slope, stderr)``
    """
    points = [
        point
        for point in curve
        if point.resolved and a_min <= point.level <= a_max and point.probability > 0
    ]
    if len(points) < 3:
        msg = "A tail slope needs at least three resolved levels"
        raise DomainError(msg)
    x = [point.level**power for point in points]
    y = [point.log_probability for point in points]
    return linear_slope(x, y)


def half_normal_tail_slope(a_min: float, a_max: float, levels: int = 31) -> float:
    """Slope of ``log P(|N| >= a)`` against ``a^2`` fitted on ``[a_min, a_max]``."""
    grid = np.linspace(a_min, a_max, levels)
    log_tail = np.log(2.0) + stats.norm.logsf(grid)
    slope, _ = linear_slope(grid**2, log_tail)
    return slope


def eps_monotonicity_check(
    batch: PathBatch,
    x,
    eps_small: float,
    eps_large: float,
) -> InequalityReport:
    """Paired check that shrinking the kernel does not lower the mean estimate."""
    if not eps_small < eps_large:
        msg = "eps_small must be smaller than eps_large"
        raise DomainError(msg)
    small = batch_local_times(batch, x, KernelParams(eps_small))
    large = batch_local_times(batch, x, KernelParams(eps_large))
    slack, stderr = mean_and_stderr(small - large)
    scale = float(np.mean(large)) if large.size else 0.0
    verdict = inequality_verdict(slack, stderr, scale, sigmas=2.0)
    return InequalityReport(
        operation="eps_monotonicity_check",
        params={} if batch.model is None else batch.model.params.to_dict(),
        inequality="E L_eps_small >= E L_eps_large",
        estimates=[
            {"epsilon": eps_small, "mean": float(np.mean(small))},
            {"epsilon": eps_large, "mean": scale},
        ],
        slack=slack,
        stderr=stderr,
        verdict=verdict,
    )
