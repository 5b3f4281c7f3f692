import math

import numpy as np
import pytest
from scipy import special

from fbm_lab.errors import DomainError, MembershipError
from fbm_lab.simulator.covariance import ModelParams, remainder_cov_closed_form
from fbm_lab.simulator.sampling import uniform_grid
from fbm_lab.theory import rkhs
from fbm_lab.utils.statistics import VIOLATED


def gamma(x):
    return float(special.gamma(x))


def test_orders():
    assert rkhs.rkhs_order(0.3) == 1
    assert rkhs.rkhs_order(0.5) == 1
    assert rkhs.rkhs_order(0.7) == 2
    assert rkhs.reduced_order(0.3) == pytest.approx(0.2)
    assert rkhs.reduced_order(0.7) == pytest.approx(0.8)


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 1.5])
def test_power_rule_on_samples(alpha):
    times = uniform_grid(10)
    constant = rkhs.fractional_integral(np.ones_like(times), alpha, times)
    linear = rkhs.fractional_integral(times, alpha, times)
    expected_constant = times**alpha / gamma(alpha + 1.0)
    expected_constant[0] = 0.0 if alpha > 0.0 else 1.0
    np.testing.assert_allclose(constant, expected_constant, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(
        linear,
        times ** (alpha + 1.0) / gamma(alpha + 2.0),
        rtol=1e-9,
        atol=1e-12,
    )


def test_power_rule_on_callables():
    value = rkhs.riemann_liouville(lambda s: s, 0.3)(2.0)
    assert value == pytest.approx(2.0**1.3 / gamma(2.3), rel=1e-9)


def test_semigroup_property():
    inner = rkhs.riemann_liouville(lambda s: s, 0.4)
    nested = rkhs.riemann_liouville(inner, 0.3)(1.0)
    direct = rkhs.riemann_liouville(lambda s: s, 0.7)(1.0)
    assert nested == pytest.approx(direct, rel=1e-7)


def test_fractional_integral_needs_grid():
    with pytest.raises(DomainError):
        rkhs.fractional_integral(lambda s: s, 0.5)
    with pytest.raises(DomainError):
        rkhs.fractional_integral([1.0, 1.0], -0.5, [0.0, 1.0])
    with pytest.raises(DomainError):
        rkhs.fractional_integral([1.0, 1.0], 0.5, [0.5, 1.0])


def test_norm_of_identity_below_one_half():
    H = 0.25
    f = rkhs.RkhsFunction.from_callables(lambda t: t, [lambda t: 1.0], H)
    expected = 1.0 / (gamma(1.25) * gamma(0.75) * math.sqrt(1.5))
    assert rkhs.rkhs_norm(f) == pytest.approx(expected, rel=1e-8)
    sampled = rkhs.RkhsFunction.from_samples(f.times, f.values, H)
    assert rkhs.rkhs_norm(sampled) == pytest.approx(expected, rel=1e-3)


def test_cameron_martin_norm_of_brownian_motion():
    f = rkhs.RkhsFunction.from_callables(lambda t: t, [lambda t: 1.0], 0.5, T=4.0)
    assert rkhs.rkhs_norm(f) == pytest.approx(2.0)


def test_norm_above_one_half():
    H = 0.7
    f = rkhs.RkhsFunction.from_callables(
        lambda t: t * t,
        [lambda t: 2.0 * t, lambda t: 2.0],
        H,
    )
    kappa = 0.8
    expected = 2.0 / (gamma(kappa + 1.0) * math.sqrt(2.0 * kappa + 1.0) * gamma(1.2))
    assert rkhs.rkhs_norm(f) == pytest.approx(expected, rel=1e-8)


def test_norm_is_homogeneous():
    f = rkhs.RkhsFunction.from_callables(lambda t: t, [lambda t: 1.0], 0.3)
    assert rkhs.rkhs_norm(3.0 * f) == pytest.approx(3.0 * rkhs.rkhs_norm(f))
    assert rkhs.rkhs_norm(f + f) == pytest.approx(2.0 * rkhs.rkhs_norm(f))


def test_membership_is_checked():
    with pytest.raises(MembershipError):
        rkhs.RkhsFunction.from_callables(lambda t: t + 1.0, [lambda t: 1.0], 0.3)
    with pytest.raises(MembershipError):
        rkhs.RkhsFunction.from_callables(
            lambda t: t,
            [lambda t: 1.0, lambda t: 0.0],
            0.7,
        )
    times = uniform_grid(32)
    with pytest.raises(MembershipError):
        rkhs.RkhsFunction.from_samples(times, times + 1.0, 0.3)
    with pytest.raises(DomainError):
        rkhs.RkhsFunction.from_callables(lambda t: t * t, [lambda t: 2.0 * t], 0.7)


def test_norm_with_error():
    times = uniform_grid(64)
    f = rkhs.RkhsFunction.from_samples(times, times**2, 0.3)
    norm, error = rkhs.rkhs_norm_with_error(f)
    assert norm > 0.0
    assert error < 0.01 * norm
    odd = rkhs.RkhsFunction.from_samples(uniform_grid(5), uniform_grid(5) ** 2, 0.3)
    with pytest.raises(DomainError):
        rkhs.rkhs_norm_with_error(odd)


def test_fill_coefficients_match_value_and_slope():
    a, z, slope = 0.4, 0.3, -0.5
    (coefficient,) = rkhs.fill_coefficients(0.3, a, z)
    assert coefficient * a == pytest.approx(z)
    b1, b2 = rkhs.fill_coefficients(0.7, a, z, slope)
    assert b1 * a**2 + b2 * a**3 == pytest.approx(z)
    assert 2.0 * b1 * a + 3.0 * b2 * a**2 == pytest.approx(slope)
    with pytest.raises(DomainError):
        rkhs.fill_coefficients(0.7, a, z)
    with pytest.raises(DomainError):
        rkhs.fill_coefficients(0.5, a, z)


def test_build_Z_a():
    times = uniform_grid(10)
    tail = np.arange(1.0, 6.0)
    values = rkhs.build_Z_a(times, 0.5, 0.3, 2.0, tail=tail)
    np.testing.assert_allclose(values[:6], 4.0 * times[:6])
    np.testing.assert_allclose(values[6:], tail)
    with pytest.raises(DomainError):
        rkhs.build_Z_a(times, 0.5, 0.3, 2.0, tail=tail[:3])
    with pytest.raises(DomainError):
        rkhs.build_Z_a(times, 1.0, 0.3, 2.0)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_fill_norm_of_a_polynomial(H):
    # a path that is already the fill polynomial keeps its norm
    a, T = 0.25, 1.0
    tail_times = np.linspace(a, T, 257)
    m = rkhs.rkhs_order(H)
    kappa = rkhs.reduced_order(H)
    if m == 1:
        z_a, z_dot, top = 2.0 * a, None, 2.0
    else:
        z_a, z_dot, top = a * a, 2.0 * a, 2.0
    squared = rkhs.fill_norm_squared(
        H,
        a,
        z_a,
        z_dot,
        tail_times,
        np.full(tail_times.size, top),
    )
    expected = (
        top**2
        * T ** (2.0 * kappa + 1.0)
        / (gamma(kappa + 1.0) ** 2 * (2.0 * kappa + 1.0) * gamma(H + 0.5) ** 2)
    )
    assert float(squared) == pytest.approx(expected, rel=1e-4)


def test_joint_sample_layout():
    sample = rkhs.sample_Z_a(0.7, 0.3, n=8, seed=1, replicas=5, include_values=True)
    assert len(sample) == 5
    assert sample.slope.shape == (5,)
    assert sample.tail_derivative.shape == (5, 9)
    np.testing.assert_array_equal(sample.tail_values[:, 0], sample.value)
    below = rkhs.sample_Z_a(0.3, 0.3, n=8, seed=1, replicas=5)
    assert below.slope is None
    assert below.tail_values is None


def test_joint_sample_is_deterministic():
    whole = rkhs.sample_Z_a(0.3, 0.2, n=8, seed=3, replicas=6)
    again = rkhs.sample_Z_a(0.3, 0.2, n=8, seed=3, replicas=6)
    tail = rkhs.sample_Z_a(0.3, 0.2, n=8, seed=3, replicas=2, first_replica=4)
    np.testing.assert_array_equal(whole.value, again.value)
    np.testing.assert_array_equal(whole.tail_derivative[4:], tail.tail_derivative)


def test_junction_value_has_remainder_variance():
    H, a = 0.3, 0.2
    sample = rkhs.sample_Z_a(H, a, n=8, seed=2, replicas=4000)
    expected = remainder_cov_closed_form(a, a, ModelParams(H=H))
    assert np.var(sample.value) == pytest.approx(expected, rel=0.1)


def test_filled_path():
    sample = rkhs.sample_Z_a(0.3, 0.25, n=16, seed=4, replicas=2, include_values=True)
    path = sample.filled(1)
    junction = np.flatnonzero(np.isclose(path.times, 0.25))[0]
    assert path.values[junction] == pytest.approx(sample.value[1])
    assert path.values[-1] == pytest.approx(sample.tail_values[1, -1])
    assert path.values[0] == 0.0
    assert path.norm == pytest.approx(math.sqrt(sample.norms_squared()[1]))
    with pytest.raises(DomainError):
        rkhs.sample_Z_a(0.3, 0.25, n=16, replicas=1).filled(0)


def test_sampling_rejects_brownian_motion_and_bad_junctions():
    with pytest.raises(DomainError):
        rkhs.sample_Z_a(0.5, 0.25)
    with pytest.raises(DomainError):
        rkhs.sample_Z_a(0.3, 1.0)


def test_K_a():
    assert rkhs.estimate_K_a(0.5, 0.2).value == 1.0
    estimate = rkhs.estimate_K_a(0.3, 0.2, replicas=200, n=16, seed=1)
    assert 0.0 < estimate.value <= 1.0
    assert estimate.details["discretization"] >= 0.0
    with pytest.raises(DomainError):
        rkhs.estimate_K_a(0.3, 0.2, n=15)


def test_horizon_index_is_checked():
    with pytest.raises(DomainError):
        rkhs.sample_Q_n(0.25, 1.0, 2)
    with pytest.raises(DomainError):
        rkhs.sample_Q_n(0.25, 2.0, 0)


def test_G_n_path():
    sample = rkhs.sample_Q_n(
        0.25,
        2.0,
        2,
        tail_points=8,
        replicas=2,
        include_values=True,
    )
    path = rkhs.build_G_n(0.25, 2.0, 2, sample, index=1)
    assert path.times[-1] == pytest.approx(8.0)
    assert path.norm > 0.0
    with pytest.raises(DomainError):
        rkhs.build_G_n(0.25, 2.0, 3, sample)


def test_norm_bound_holds_on_calibration_set():
    f = rkhs.RkhsFunction.from_callables(lambda t: t * t, [lambda t: 2.0 * t], 0.3)
    bound = rkhs.norm_upper_bound(f, 0.5)
    assert rkhs.rkhs_norm(f) ** 2 <= bound
    with pytest.raises(DomainError):
        rkhs.calibrate_norm_constant(0.5)


@pytest.mark.parametrize(
    ("func", "derivative"),
    [
        (np.sin, np.cos),
        (np.expm1, np.exp),
        (lambda t: t**1.5, lambda t: 1.5 * np.sqrt(t)),
    ],
)
def test_norm_bound_holds_outside_the_calibration_family(func, derivative):
    f = rkhs.RkhsFunction.from_callables(func, [derivative], 0.3)
    norm_squared = rkhs.rkhs_norm(f) ** 2
    for a in (0.25, 0.5, 0.75):
        assert norm_squared <= rkhs.norm_upper_bound(f, a), f"a={a}"


@pytest.mark.slow
def test_comparisons_hold():
    forward, reverse = rkhs.comparison_check(
        1,
        0.3,
        replicas=400,
        n_steps=64,
        k_replicas=200,
    )
    assert forward.verdict != VIOLATED
    assert reverse.verdict != VIOLATED
    assert reverse.details["chain_factor"] > 0.0


@pytest.mark.slow
def test_G_n_norms_do_not_grow():
    report = rkhs.g_n_norm_check(n_values=(1, 2, 3), replicas=100, tail_points=16)
    assert report.verdict != VIOLATED
    assert len(report.estimates) == 3
