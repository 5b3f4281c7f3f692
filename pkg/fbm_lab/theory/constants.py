"""Large-deviation and LIL constants with their analytic brackets.

Every gamma function goes through ``gammaln`` so the formulas stay finite
close to the regime edges ``Hd -> 1`` and ``Hd -> p*``.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from ..errors import DomainError
from ..simulator.covariance import ModelParams, compute_c_H

LOGGER = logging.getLogger(__name__)

_ORDER_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RateBounds:
    """Bracket ``[lower, upper]`` of a constant, with an optional point value."""

    kind: str
    lower: Optional[float]
    upper: Optional[float]
    point: Optional[float] = None

    def __post_init__(self):
        if self.lower is not None and self.upper is not None:
            scale = max(abs(self.lower), abs(self.upper), 1.0)
            if self.lower > self.upper + _ORDER_TOLERANCE * scale:
                msg = f"{self.kind} bounds out of order: {self.lower} > {self.upper}"
                raise DomainError(msg)

    @property
    def collapsed(self) -> bool:
        return (
            self.lower is not None
            and self.upper is not None
            and math.isclose(self.lower, self.upper, rel_tol=1e-12, abs_tol=0.0)
        )

    def contains(self, value: float, tolerance: float = 0.0) -> bool:
        low = -math.inf if self.lower is None else self.lower
        high = math.inf if self.upper is None else self.upper
        return low - tolerance <= value <= high + tolerance

    def mapped(self, func: Callable, kind: str, decreasing: bool = False):
        """Image of the bracket under a monotone map."""
        lower = None if self.lower is None else func(self.lower)
        upper = None if self.upper is None else func(self.upper)
        point = None if self.point is None else func(self.point)
        if decreasing:
            lower, upper = upper, lower
        return RateBounds(kind, lower, upper, point)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lower": self.lower,
            "upper": self.upper,
            "point": self.point,
        }


def theta0(kappa: float) -> float:
    """kappa ((1 - kappa)^(1 - kappa) / Gamma(1 - kappa))^(1 / kappa)."""
    if not 0.0 < kappa < 1.0:
        msg = f"theta0 needs kappa in (0, 1), got {kappa}"
        raise DomainError(msg)
    log_value = math.log(kappa) + (
        (1.0 - kappa) * math.log1p(-kappa) - special.gammaln(1.0 - kappa)
    ) / kappa
    return math.exp(log_value)


def theta_bounds(params: ModelParams) -> RateBounds:
    """Bracket of the tail constant of the local time of fBm at zero."""
    params.check_fbm()
    params.check_local_time_regime()
    H = params.H
    c_h = compute_c_H(H)
    base = theta0(params.kappa)
    lower = (math.pi * c_h**2 / H) ** (1.0 / (2.0 * H)) * base
    upper = (2.0 * math.pi) ** (1.0 / (2.0 * H)) * base
    point = lower if params.is_brownian else None
    return RateBounds("theta", lower, upper, point)


def tilde_theta(params: ModelParams, theta: float) -> float:
    """Tail constant of the Riemann-Liouville local time from the fBm one."""
    if not theta > 0.0:
        msg = f"theta must be positive, got {theta}"
        raise DomainError(msg)
    return compute_c_H(params.H) ** (-1.0 / params.H) * theta


def tilde_theta_bounds(params: ModelParams) -> RateBounds:
    scale = compute_c_H(params.H) ** (-1.0 / params.H)
    return theta_bounds(params).mapped(lambda x: scale * x, "theta_tilde")


def theta_from_L(L: float, params: ModelParams) -> float:
    """Tail constant from the exponential-time moment constant."""
    kappa = params.kappa
    if not 0.0 < kappa < 1.0:
        msg = f"theta needs Hd in (0, 1), got {kappa}"
        raise DomainError(msg)
    return kappa * (1.0 - kappa) ** (1.0 / kappa - 1.0) * L ** (-1.0 / kappa)


def L_bounds(params: ModelParams) -> RateBounds:
    """Bracket of the exponential-time moment constant of the fBm local time."""
    params.check_fbm()
    params.check_local_time_regime()
    d = params.d
    gamma = math.exp(special.gammaln(1.0 - params.kappa))
    lower = (2.0 * math.pi) ** (-0.5 * d) * gamma
    upper = (math.pi * compute_c_H(params.H) ** 2 / params.H) ** (-0.5 * d) * gamma
    point = lower if params.is_brownian else None
    return RateBounds("L", lower, upper, point)


def J(H: float, d: int) -> float:
    """int_0^inf (1 + t^(2H))^(-d/2) e^(-t) dt, split at 1, tail on t = e^u - 1."""
    if not H > 0.0 or d < 1:
        msg = f"J needs H > 0 and d >= 1, got H = {H}, d = {d}"
        raise DomainError(msg)

    def head(t):
        return (1.0 + t ** (2.0 * H)) ** (-0.5 * d) * math.exp(-t)

    def tail(u):
        t = math.expm1(u)
        return (1.0 + t ** (2.0 * H)) ** (-0.5 * d) * math.exp(u - t)

    near, _ = integrate.quad(head, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
    far, _ = integrate.quad(
        tail,
        math.log(2.0),
        np.inf,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    return near + far


def J_holder_bound(params: ModelParams, q: Optional[float] = None) -> float:
    """Upper bound of J from ``1 + x >= q^(1/q) q*^(1/q*) x^(1/q*)``."""
    q = float(params.p if q is None else q)
    if not q > 1.0:
        msg = f"Holder exponent must exceed 1, got {q}"
        raise DomainError(msg)
    q_star = q / (q - 1.0)
    if not params.kappa < q_star:
        msg = f"The Holder bound needs Hd < {q_star}, got {params.kappa}"
        raise DomainError(msg)
    d = params.d
    log_value = (
        -0.5 * d / q * math.log(q)
        - 0.5 * d / q_star * math.log(q_star)
        + special.gammaln(1.0 - params.kappa / q_star)
    )
    return math.exp(log_value)


def km_transform(kappa: float, gamma: float) -> float:
    """Tail rate ``gamma e^(-kappa/gamma)`` of a variable with moment growth
    ``(m!)^gamma e^(kappa m)``."""
    if not gamma > 0.0:
        msg = f"gamma must be positive, got {gamma}"
        raise DomainError(msg)
    return gamma * math.exp(-kappa / gamma)


def _reduced_kappa(params: ModelParams) -> float:
    params.check_fbm()
    params.check_intersection_regime()
    return params.kappa / params.p_star


def intersection_growth_exponent(params: ModelParams) -> float:
    """Moment growth exponent ``Hd(p - 1)`` of the intersection local time."""
    return params.kappa * (params.p - 1)


def C_bounds(params: ModelParams) -> RateBounds:
    """Bracket of the unit-time moment growth constant of the Riemann-Liouville
    intersection local time, ``E alpha^m ~ (m!)^{Hd(p-1)} e^{C m}``."""
    reduced = _reduced_kappa(params)
    H, d, p = params.H, params.d, params.p
    p_star = params.p_star
    log_gamma = special.gammaln(1.0 - reduced)
    upper = (
        0.5 * d * (p - 1) * math.log(H / math.pi)
        - 0.5 * d * math.log(p)
        + p * log_gamma
        - p * (1.0 - reduced) * math.log1p(-reduced)
    )
    c_h = compute_c_H(H)
    lower = p * (
        d / p_star * math.log(c_h)
        - (1.0 - reduced) * math.log1p(-reduced)
        + 0.5 * d / p_star * math.log(p_star / (2.0 * math.pi))
        + math.log(J(H, d))
    )
    return RateBounds("C", lower, upper)


def K_tilde_from_C(C: float, params: ModelParams) -> float:
    return km_transform(C, intersection_growth_exponent(params))


def K_tilde_bounds(params: ModelParams) -> RateBounds:
    """Bracket of the tail constant of the Riemann-Liouville intersection
    local time."""
    reduced = _reduced_kappa(params)
    H, d, p = params.H, params.d, params.p
    p_star = params.p_star
    prefactor = p * reduced * (1.0 - reduced) ** (1.0 / reduced - 1.0)
    log_lower = (
        math.log(math.pi / H) / (2.0 * H)
        + p_star / (2.0 * H * p) * math.log(p)
        - special.gammaln(1.0 - reduced) / reduced
    )
    c_h = compute_c_H(H)
    log_upper = math.log(2.0 * math.pi / (c_h**2 * p_star)) / (2.0 * H) - math.log(
        J(H, d),
    ) / reduced
    LOGGER.debug("K tilde bracket for %s", params)
    return RateBounds(
        "K_tilde",
        prefactor * math.exp(log_lower),
        prefactor * math.exp(log_upper),
    )


def K_from_tilde(params: ModelParams, k_tilde: float) -> float:
    if not k_tilde > 0.0:
        msg = f"K tilde must be positive, got {k_tilde}"
        raise DomainError(msg)
    return compute_c_H(params.H) ** (1.0 / params.H) * k_tilde


def K_bounds(params: ModelParams) -> RateBounds:
    return K_tilde_bounds(params).mapped(lambda k: K_from_tilde(params, k), "K")


def lil_constants(
    params: ModelParams,
    theta: Optional[float] = None,
    K: Optional[float] = None,
) -> dict:
    """
    The four LIL constants ``theta^{-Hd}``, ``theta_tilde^{-Hd}``,
    ``K^{-Hd(p-1)}`` and ``K_tilde^{-Hd(p-1)}``.

    Point values are used when supplied; otherwise the brackets are pushed
    through the decreasing power maps. Constants whose regime condition fails
    are left out.
    """
    kappa = params.kappa
    gamma = intersection_growth_exponent(params)
    constants = {}
    if kappa < 1.0:
        if theta is not None:
            theta_range = RateBounds("theta", theta, theta, theta)
        else:
            theta_range = theta_bounds(params)
        theta_tilde_range = theta_range.mapped(
            lambda x: tilde_theta(params, x),
            "theta_tilde",
        )
        constants["local_time"] = theta_range.mapped(
            lambda x: x ** (-kappa),
            "LIL",
            decreasing=True,
        )
        constants["local_time_rl"] = theta_tilde_range.mapped(
            lambda x: x ** (-kappa),
            "LIL",
            decreasing=True,
        )
    else:
        LOGGER.info("Local-time LIL constants need Hd < 1, got %g", kappa)
    if kappa < params.p_star:
        if K is not None:
            K_range = RateBounds("K", K, K, K)
            K_tilde_range = K_range.mapped(
                lambda k: k / compute_c_H(params.H) ** (1.0 / params.H),
                "K_tilde",
            )
        else:
            K_tilde_range = K_tilde_bounds(params)
            K_range = K_bounds(params)
        constants["intersection"] = K_range.mapped(
            lambda x: x ** (-gamma),
            "LIL",
            decreasing=True,
        )
        constants["intersection_rl"] = K_tilde_range.mapped(
            lambda x: x ** (-gamma),
            "LIL",
            decreasing=True,
        )
    else:
        LOGGER.info("Intersection LIL constants need Hd < p*, got %g", kappa)
    return {
        name: _with_point(bounds) for name, bounds in constants.items()
    }


def _with_point(bounds: RateBounds) -> RateBounds:
    if bounds.point is None and bounds.collapsed:
        return RateBounds(bounds.kind, bounds.lower, bounds.upper, bounds.lower)
    return bounds


def exp_integral_rate(theta: float, params: ModelParams, K: float) -> float:
    """
    ``sup_l {(theta/p) l^(1/p) - K l^(p*/(Hdp))}`` in closed form.

    It is the exponential-moment rate attached to an intersection tail
    constant ``K``.
    """
    if not theta > 0.0 or not K > 0.0:
        msg = "theta and K must be positive"
        raise DomainError(msg)
    params.check_intersection_regime()
    kappa, p, p_star = params.kappa, params.p, params.p_star
    return (
        (kappa / (p_star * K)) ** (kappa / (p_star - kappa))
        * (1.0 - kappa / p_star)
        * (theta / p) ** (p_star / (p_star - kappa))
    )


def lil_normalizers(t: float, params: ModelParams) -> dict:
    """Time normalizers of the local-time and intersection LIL statements."""
    if not t > math.e:
        msg = f"LIL normalizers need t > e, got {t}"
        raise DomainError(msg)
    kappa = params.kappa
    loglog = math.log(math.log(t))
    growth = intersection_growth_exponent(params)
    return {
        "local_time": t ** (1.0 - kappa) * loglog**kappa,
        "intersection": t ** (params.p - growth) * loglog**growth,
    }


def constants_table(params: ModelParams) -> dict:
    """Every constant and bracket defined for ``params``, keyed by name."""
    table = {"c_H": compute_c_H(params.H), "params": params.to_dict()}
    if params.kappa < 1.0:
        table["theta0"] = theta0(params.kappa)
        table["theta"] = theta_bounds(params).to_dict()
        table["theta_tilde"] = tilde_theta_bounds(params).to_dict()
        table["L"] = L_bounds(params).to_dict()
    if params.kappa < params.p_star:
        table["J"] = J(params.H, params.d)
        table["J_holder_bound"] = J_holder_bound(params)
        table["C"] = C_bounds(params).to_dict()
        table["K_tilde"] = K_tilde_bounds(params).to_dict()
        table["K"] = K_bounds(params).to_dict()
    table["lil"] = {
        name: bounds.to_dict() for name, bounds in lil_constants(params).items()
    }
    return table
