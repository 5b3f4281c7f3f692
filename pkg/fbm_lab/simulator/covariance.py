"""Covariance kernels of fBm, the Riemann-Liouville process and the remainder.

The three processes are tied by the decomposition
``c_H^{-1} B^H = W^H + Z^H`` with ``W^H`` and ``Z^H`` independent, so that
``c_H^{-2} fbm_cov = rl_cov + remainder_cov``.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, linalg, special

from ..errors import DomainError, NonPSDError, RegimeError

LOGGER = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10)
_QUAD_OPTIONS = {"epsabs": 0.0, "epsrel": 1e-12, "limit": 200}


@dataclass(frozen=True)
class ModelParams:
    """Hurst index ``H``, space dimension ``d`` and number of processes ``p``."""

    H: float
    d: int = 1
    p: int = 2

    def __post_init__(self):
        if not self.H > 0.0:
            msg = f"Hurst index must be positive, got {self.H}"
            raise DomainError(msg)
        if int(self.d) != self.d or self.d < 1:
            msg = f"Dimension must be a positive integer, got {self.d}"
            raise DomainError(msg)
        if int(self.p) != self.p or self.p < 2:
            msg = f"Number of processes must be an integer >= 2, got {self.p}"
            raise DomainError(msg)

    @property
    def p_star(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def kappa(self) -> float:
        return self.H * self.d

    @property
    def is_brownian(self) -> bool:
        return self.H == 0.5

    def check_fbm(self) -> None:
        if not self.H < 1.0:
            msg = f"fBm needs H in (0, 1), got {self.H}"
            raise DomainError(msg)

    def check_local_time_regime(self) -> None:
        if not self.kappa < 1.0:
            msg = f"Local time needs H*d < 1, got H*d = {self.kappa}"
            raise RegimeError(msg)

    def check_intersection_regime(self) -> None:
        if not self.kappa < self.p_star:
            msg = (
                f"Intersection local time needs H*d < p* = {self.p_star}, "
                f"got H*d = {self.kappa}"
            )
            raise RegimeError(msg)

    def to_dict(self) -> dict:
        return {"H": self.H, "d": self.d, "p": self.p}


class CovKind(Enum):
    FBM = "fbm"
    RL = "rl"
    REMAINDER = "remainder"
    FBM_SCALED = "fbm_scaled"


def compute_c_H(H: float) -> float:
    """Constant of the moving-average representation of fBm.

    :param H: Hurst index in (0, 1)
    :return: sqrt(2H) 2^H B(1-H, H+1/2)^(-1/2)
    """
    if not 0.0 < H < 1.0:
        msg = f"c_H needs H in (0, 1), got {H}"
        raise DomainError(msg)
    if H == 0.5:
        return 1.0
    log_c = 0.5 * math.log(2.0 * H) + H * math.log(2.0) - 0.5 * special.betaln(
        1.0 - H,
        H + 0.5,
    )
    return math.exp(log_c)


def _power_gap(u, s, exponent):
    """(s+u)^e - u^e without cancellation for u > 0."""
    return u**exponent * np.expm1(exponent * np.log1p(s / u))


def c_H_from_integral(H: float) -> float:
    """c_H from its defining integral, used as an independent oracle.

    c_H^{-2} = int_0^inf ((1+x)^{H-1/2} - x^{H-1/2})^2 dx + 1/(2H)
    """
    if not 0.0 < H < 1.0:
        msg = f"c_H needs H in (0, 1), got {H}"
        raise DomainError(msg)
    a = H - 0.5
    q = 1.0 / (2.0 * H)

    def tail(x):
        return _power_gap(x, 1.0, a) ** 2

    if a < 0.0:
        # x = u^q on [0, 1] removes the x^(2H-1) endpoint singularity
        def head(u):
            x = u**q
            if x <= 0.0:
                return q
            return (np.expm1(a * np.log1p(1.0 / x))) ** 2 * q

        near, _ = integrate.quad(head, 0.0, 1.0, **_QUAD_OPTIONS)
    else:
        near, _ = integrate.quad(tail, 0.0, 1.0, **_QUAD_OPTIONS)
    far, _ = integrate.quad(tail, 1.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    return (near + far + 1.0 / (2.0 * H)) ** -0.5


def fbm_cov(s, t, params: ModelParams):
    """Covariance of one coordinate of fBm (two-sided for negative times)."""
    two_h = 2.0 * params.H
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    value = 0.5 * (np.abs(t) ** two_h + np.abs(s) ** two_h - np.abs(t - s) ** two_h)
    return float(value) if value.ndim == 0 else value


def rl_cov(s: float, t: float, params: ModelParams) -> float:
    """Covariance of the Riemann-Liouville process by adaptive quadrature.

    With v = min(s,t) - u and w = v^(H+1/2) the kernel becomes
    (H+1/2)^{-1} int_0^{min^(H+1/2)} (w^{1/(H+1/2)} + |t-s|)^{H-1/2} dw,
    whose integrand is bounded for every H.
    """
    low, high = min(s, t), max(s, t)
    if low <= 0.0:
        return 0.0
    H = params.H
    if high == low:
        return low ** (2.0 * H) / (2.0 * H)
    a = H - 0.5
    q = 1.0 / (H + 0.5)
    delta = high - low

    def integrand(w):
        return (w**q + delta) ** a

    value, _ = integrate.quad(integrand, 0.0, low ** (H + 0.5), **_QUAD_OPTIONS)
    return value / (H + 0.5)


def rl_cov_closed_form(s, t, params: ModelParams):
    """Vectorised hypergeometric form of the Riemann-Liouville covariance.

    m^{H+1/2} (m+delta)^{H-1/2} / (H+1/2) * 2F1(1/2-H, 1; H+3/2; m/(m+delta))
    with m = min(s,t), delta = |t-s|.
    """
    H = params.H
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    low = np.minimum(s, t)
    high = np.maximum(s, t)
    if H == 0.5:
        value = np.maximum(low, 0.0)
        return float(value) if value.ndim == 0 else value
    positive = low > 0.0
    safe_low = np.where(positive, low, 1.0)
    safe_high = np.where(positive, high, 1.0)
    ratio = safe_low / safe_high
    value = (
        safe_low ** (H + 0.5)
        * safe_high ** (H - 0.5)
        / (H + 0.5)
        * special.hyp2f1(0.5 - H, 1.0, H + 1.5, ratio)
    )
    value = np.where(positive, value, 0.0)
    return float(value) if value.ndim == 0 else value


def remainder_cov(s: float, t: float, params: ModelParams) -> float:
    """Covariance of the remainder process by quadrature on u = x/(1-x)."""
    if s <= 0.0 or t <= 0.0:
        return 0.0
    a = params.H - 0.5
    if a == 0.0:
        return 0.0

    def integrand(x):
        u = x / (1.0 - x)
        return _power_gap(u, s, a) * _power_gap(u, t, a) / (1.0 - x) ** 2

    value, _ = integrate.quad(integrand, 0.0, 1.0, points=(0.5,), **_QUAD_OPTIONS)
    return value


def remainder_cov_closed_form(s, t, params: ModelParams):
    """Remainder covariance through the decomposition identity."""
    c_h = compute_c_H(params.H)
    return fbm_cov(s, t, params) / c_h**2 - rl_cov_closed_form(s, t, params)


def _derivative_factor(a: float, order: int) -> float:
    factor = 1.0
    for i in range(order):
        factor *= a - i
    return factor


def moving_average_cov(
    s: float,
    t: float,
    j: int,
    k: int,
    H: float,
    upper: float = np.inf,
    subtract_origin: bool = True,
) -> float:
    """Covariance of derivatives of a moving-average process.

    The process is X(t) = int_0^upper ((t+u)^{H-1/2} - l u^{H-1/2}) dB(u) with
    l = 1 when ``subtract_origin`` (the remainder process) and l = 0 otherwise
    (the truncated kernel used for the G_n modification).

    :param s: first time, positive
    :param t: second time, positive
    :param j: derivative order at s (0, 1 or 2)
    :param k: derivative order at t (0, 1 or 2)
    :param H: Hurst index
    :param upper: upper end of the noise window
    :param subtract_origin: whether u^{H-1/2} is subtracted at order 0
    :return: Cov(X^{(j)}(s), X^{(k)}(t))
    """
    a = H - 0.5
    if not subtract_origin and not np.isfinite(upper):
        msg = "The untruncated kernel needs a finite noise window"
        raise DomainError(msg)

    def branch(x, u, order):
        if order == 0:
            if subtract_origin:
                return _power_gap(u, x, a)
            return (x + u) ** a
        return _derivative_factor(a, order) * (x + u) ** (a - order)

    if np.isfinite(upper):
        value, _ = integrate.quad(
            lambda u: branch(s, u, j) * branch(t, u, k),
            0.0,
            upper,
            **_QUAD_OPTIONS,
        )
        return value

    def integrand(x):
        u = x / (1.0 - x)
        return branch(s, u, j) * branch(t, u, k) / (1.0 - x) ** 2

    value, _ = integrate.quad(integrand, 0.0, 1.0, points=(0.5,), **_QUAD_OPTIONS)
    return value


@dataclass(frozen=True)
class CovModel:
    """A process kind together with its parameters."""

    kind: CovKind
    params: ModelParams

    def __post_init__(self):
        if self.kind != CovKind.RL:
            self.params.check_fbm()

    def kernel(self, s, t):
        """Vectorised covariance kernel of one coordinate."""
        if self.kind == CovKind.FBM:
            return fbm_cov(s, t, self.params)
        if self.kind == CovKind.FBM_SCALED:
            return fbm_cov(s, t, self.params) / compute_c_H(self.params.H) ** 2
        if self.kind == CovKind.RL:
            return rl_cov_closed_form(s, t, self.params)
        return remainder_cov_closed_form(s, t, self.params)

    def variance(self, t):
        return self.kernel(t, t)

    @property
    def allows_negative_times(self) -> bool:
        return self.kind in (CovKind.FBM, CovKind.FBM_SCALED)


@dataclass
class CovMatrix:
    """Covariance matrix on a time grid with a lazily computed factor."""

    grid: np.ndarray
    entries: np.ndarray
    factor: Optional[np.ndarray] = field(default=None, repr=False)
    jitter: Optional[float] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.shape != (self.grid.size, self.grid.size):
            msg = "Covariance entries do not match the grid size"
            raise DomainError(msg)
        scale = max(float(np.max(np.abs(self.entries), initial=0.0)), 1.0)
        if not np.allclose(self.entries, self.entries.T, rtol=0.0, atol=1e-12 * scale):
            msg = "Covariance matrix is not symmetric"
            raise NonPSDError(msg)

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor, escalating the diagonal jitter on failure."""
        if self.factor is not None:
            return self.factor
        if self.grid.size == 0:
            self.factor = np.zeros((0, 0))
            self.jitter = 0.0
            return self.factor
        symmetric = 0.5 * (self.entries + self.entries.T)
        max_diag = float(np.max(np.diag(symmetric)))
        for jitter in JITTER_LADDER:
            try:
                shifted = symmetric + jitter * max_diag * np.eye(self.grid.size)
                self.factor = linalg.cholesky(shifted, lower=True)
            except linalg.LinAlgError:
                LOGGER.debug("Cholesky failed with relative jitter %g", jitter)
                continue
            self.jitter = jitter
            if jitter > 0.0:
                LOGGER.info("Cholesky succeeded with relative jitter %g", jitter)
            return self.factor
        msg = (
            f"Covariance matrix of size {self.grid.size} is not positive "
            f"semidefinite, even with relative jitter {JITTER_LADDER[-1]}"
        )
        raise NonPSDError(msg)

    def sqrt_factor(self) -> np.ndarray:
        """A square root F with F F^T = entries.

        Falls back to a symmetric eigen-decomposition with clipped negative
        eigenvalues when the jitter ladder is exhausted; only smooth joint laws
        (derivative samples of the remainder) need this.
        """
        try:
            return self.cholesky()
        except NonPSDError:
            symmetric = 0.5 * (self.entries + self.entries.T)
            eigenvalues, eigenvectors = linalg.eigh(symmetric)
            LOGGER.warning(
                "Eigen square root used, smallest eigenvalue %g",
                eigenvalues[0],
            )
            self.factor = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
            return self.factor

    def log_determinant(self) -> float:
        factor = self.cholesky()
        return float(2.0 * np.sum(np.log(np.diag(factor))))


def build_cov_matrix(model: CovModel, grid) -> CovMatrix:
    """Covariance matrix of ``model`` on ``grid``."""
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
        msg = "Grid must be strictly increasing"
        raise DomainError(msg)
    if np.any(grid < 0.0) and not model.allows_negative_times:
        msg = f"{model.kind.value} covariance is defined for nonnegative times"
        raise DomainError(msg)
    entries = model.kernel(grid[:, None], grid[None, :])
    entries = 0.5 * (entries + entries.T)
    return CovMatrix(grid=grid, entries=np.atleast_2d(entries))


def conditional_variance(model: CovModel, target: float, conditioners=()) -> float:
    """Var(X(target) | X(s), s in conditioners) as a Schur complement.

    Conditioners with zero variance (X(0) = 0) carry no information and are
    dropped.
    """
    conditioners = np.asarray(conditioners, dtype=float).ravel()
    if np.any(conditioners == target):
        msg = "Target time must not be among the conditioners"
        raise DomainError(msg)
    variance = float(model.variance(target))
    if conditioners.size == 0:
        return variance
    conditioners = np.unique(conditioners)
    conditioners = conditioners[np.asarray(model.variance(conditioners)) > 0.0]
    if conditioners.size == 0:
        return variance
    matrix = build_cov_matrix(model, conditioners)
    cross = np.asarray(model.kernel(conditioners, target), dtype=float)
    projected = linalg.solve_triangular(matrix.cholesky(), cross, lower=True)
    return max(variance - float(projected @ projected), 0.0)


@lru_cache(maxsize=64)
def c_H_squared_over_2H(H: float) -> float:
    """Constant of the conditional-variance lower bound."""
    return compute_c_H(H) ** 2 / (2.0 * H)
