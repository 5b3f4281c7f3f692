import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

LOGGER = logging.getLogger(__name__)

HOLDS = "holds"
INCONCLUSIVE = "inconclusive"
VIOLATED = "violated"


@dataclass
class InequalityReport:
    """Outcome of a Monte Carlo check of an inequality ``lhs >= rhs``.

    ``slack`` is ``lhs - rhs`` and ``stderr`` its combined standard error.
    """

    operation: str
    params: dict
    inequality: str
    estimates: list
    slack: float
    stderr: float
    verdict: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hard_failure(self) -> bool:
        return self.verdict == VIOLATED


def inequality_verdict(
    slack: float,
    stderr: float,
    scale: float,
    sigmas: float = 3.0,
    max_rel_stderr: float = 0.05,
) -> str:
    """Classify a Monte Carlo inequality check.

    :param slack: estimated ``lhs - rhs``
    :param stderr: standard error of ``slack``
    :param scale: magnitude of the compared quantities
    :param sigmas: tolerance in standard errors
    :param max_rel_stderr: relative precision under which a check counts as
        conclusive
    :return: one of ``holds``, ``inconclusive`` or ``violated``
    """
    atol = 1e-12 * max(abs(scale), 1.0)
    if slack < -sigmas * stderr - atol:
        return VIOLATED
    if stderr > 0.0 and scale > 0.0 and stderr / scale > max_rel_stderr:
        return INCONCLUSIVE
    return HOLDS


def mean_and_stderr(values) -> tuple:
    """Sample mean and its standard error (zero for fewer than two values)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(values.size))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95):
    """Wilson score interval of a binomial proportion."""
    if trials == 0:
        return float("nan"), float("nan")
    result = stats.binomtest(int(successes), int(trials))
    interval = result.proportion_ci(confidence_level=confidence, method="wilson")
    return float(interval.low), float(interval.high)


def ks_two_sample(first, second) -> float:
    """Two-sample Kolmogorov-Smirnov distance."""
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    if first.size == 0 or second.size == 0:
        msg = "KS distance needs two nonempty samples"
        raise ValueError(msg)
    return float(stats.ks_2samp(first, second).statistic)


def ks_one_sample(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a reference cdf."""
    return float(stats.kstest(np.asarray(sample, dtype=float), cdf).statistic)


def linear_slope(x, y) -> tuple:
    """Least-squares slope of ``y`` on ``x`` and its standard error."""
    fit = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return float(fit.slope), float(fit.stderr)


def summarize(values, label: Optional[str] = None) -> dict:
    """Small summary record used in reports."""
    mean, stderr = mean_and_stderr(values)
    record = {"mean": mean, "stderr": stderr, "samples": int(np.size(values))}
    if label is not None:
        record["label"] = label
    return record
