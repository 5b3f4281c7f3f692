import math

import pytest
from scipy import special

from fbm_lab.errors import DomainError, RegimeError
from fbm_lab.simulator.covariance import ModelParams, compute_c_H
from fbm_lab.theory.constants import (
    C_bounds,
    J,
    J_holder_bound,
    K_bounds,
    K_tilde_bounds,
    L_bounds,
    RateBounds,
    constants_table,
    exp_integral_rate,
    K_tilde_from_C,
    km_transform,
    lil_constants,
    lil_normalizers,
    theta0,
    theta_bounds,
    theta_from_L,
    tilde_theta,
)


def test_rate_bounds_order():
    with pytest.raises(DomainError):
        RateBounds("x", 2.0, 1.0)
    bounds = RateBounds("x", 1.0, 2.0)
    assert bounds.contains(1.5)
    assert not bounds.contains(2.5)
    assert bounds.contains(2.5, tolerance=1.0)
    flipped = bounds.mapped(lambda x: 1.0 / x, "inverse", decreasing=True)
    assert (flipped.lower, flipped.upper) == (0.5, 1.0)


def test_theta0_at_one_half():
    assert theta0(0.5) == pytest.approx(0.25 / math.pi)
    with pytest.raises(DomainError):
        theta0(1.0)


def test_brownian_brackets_collapse(brownian):
    theta = theta_bounds(brownian)
    assert theta.collapsed
    assert theta.point == pytest.approx(0.5)
    L = L_bounds(brownian)
    assert L.collapsed
    assert L.point == pytest.approx(1.0 / math.sqrt(2.0))
    assert theta_from_L(L.point, brownian) == pytest.approx(theta.point)


@pytest.mark.parametrize("H", [0.1, 0.3, 0.7])
def test_fbm_brackets_are_ordered(H):
    params = ModelParams(H=H)
    theta = theta_bounds(params)
    L = L_bounds(params)
    assert theta.lower < theta.upper
    assert L.lower < L.upper
    assert theta.point is None


def test_theta_needs_local_time_regime():
    with pytest.raises(RegimeError):
        theta_bounds(ModelParams(H=0.6, d=2))


def test_tilde_theta_scaling(rough):
    scale = compute_c_H(0.3) ** (-1.0 / 0.3)
    assert tilde_theta(rough, 2.0) == pytest.approx(2.0 * scale)
    with pytest.raises(DomainError):
        tilde_theta(rough, 0.0)


def test_J_for_brownian_plane():
    expected = math.e * special.exp1(1.0)
    assert J(0.5, 2) == pytest.approx(expected, rel=1e-9)
    assert J(0.3, 1) < 1.0


@pytest.mark.parametrize(("H", "d", "p"), [(0.3, 1, 2), (0.25, 2, 3), (0.6, 2, 2)])
def test_holder_bound_dominates_J(H, d, p):
    params = ModelParams(H=H, d=d, p=p)
    assert J(H, d) <= J_holder_bound(params)


def test_km_transform():
    assert km_transform(0.0, 1.0) == pytest.approx(1.0)
    assert km_transform(1.0, 2.0) == pytest.approx(2.0 * math.exp(-0.5))
    with pytest.raises(DomainError):
        km_transform(1.0, 0.0)


@pytest.mark.parametrize(("H", "d", "p"), [(0.3, 1, 2), (0.25, 2, 3), (0.6, 2, 2)])
def test_intersection_brackets_are_ordered(H, d, p):
    params = ModelParams(H=H, d=d, p=p)
    assert C_bounds(params).lower <= C_bounds(params).upper
    assert K_tilde_bounds(params).lower <= K_tilde_bounds(params).upper
    assert K_bounds(params).lower > 0.0


def test_lil_constants_follow_regimes():
    both = lil_constants(ModelParams(H=0.3))
    expected = {"local_time", "local_time_rl", "intersection", "intersection_rl"}
    assert set(both) == expected
    only_intersection = lil_constants(ModelParams(H=0.6, d=2))
    assert set(only_intersection) == {"intersection", "intersection_rl"}


def test_lil_constants_from_point_values(rough):
    constants = lil_constants(rough, theta=2.0, K=3.0)
    assert constants["local_time"].point == pytest.approx(2.0**-0.3)
    assert constants["intersection"].point == pytest.approx(3.0**-0.3)


def test_lil_normalizers():
    with pytest.raises(DomainError):
        lil_normalizers(2.0, ModelParams(H=0.3))
    values = lil_normalizers(100.0, ModelParams(H=0.5))
    loglog = math.log(math.log(100.0))
    assert values["local_time"] == pytest.approx(10.0 * loglog**0.5)


def test_exp_integral_rate_is_positive(rough):
    assert exp_integral_rate(1.0, rough, 1.0) > 0.0
    with pytest.raises(DomainError):
        exp_integral_rate(-1.0, rough, 1.0)


def test_constants_table_sections():
    table = constants_table(ModelParams(H=0.3))
    for key in ("c_H", "theta", "L", "J", "C", "K_tilde", "K", "lil"):
        assert key in table
    table = constants_table(ModelParams(H=0.6, d=2))
    assert "theta" not in table
    assert "K" in table


@pytest.mark.parametrize(("H", "d", "p"), [(0.25, 1, 2), (0.2, 2, 3), (0.4, 1, 2)])
def test_K_tilde_bracket_is_the_transform_of_the_C_bracket(H, d, p):
    params = ModelParams(H=H, d=d, p=p)
    C, K_tilde = C_bounds(params), K_tilde_bounds(params)
    assert K_tilde_from_C(C.upper, params) == pytest.approx(K_tilde.lower, rel=1e-12)
    assert K_tilde_from_C(C.lower, params) == pytest.approx(K_tilde.upper, rel=1e-12)
