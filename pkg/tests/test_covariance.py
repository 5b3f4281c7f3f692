import numpy as np
import pytest

from fbm_lab.errors import DomainError, NonPSDError, RegimeError
from fbm_lab.simulator.covariance import (
    CovKind,
    CovMatrix,
    CovModel,
    ModelParams,
    build_cov_matrix,
    c_H_from_integral,
    c_H_squared_over_2H,
    compute_c_H,
    conditional_variance,
    fbm_cov,
    moving_average_cov,
    remainder_cov,
    remainder_cov_closed_form,
    rl_cov,
    rl_cov_closed_form,
)

HURST_GRID = [round(0.05 * k, 2) for k in range(1, 20) if k != 10]


@pytest.mark.parametrize("H", [0.1, 0.25, 0.3, 0.5, 0.7, 0.9])
def test_c_H_matches_its_integral(H):
    assert compute_c_H(H) == pytest.approx(c_H_from_integral(H), rel=1e-8)


def test_c_H_is_one_for_brownian_motion():
    assert compute_c_H(0.5) == 1.0


@pytest.mark.parametrize("H", HURST_GRID)
def test_c_H_squared_stays_below_2H(H):
    assert compute_c_H(H) ** 2 < 2.0 * H
    assert c_H_squared_over_2H(H) < 1.0
    assert c_H_squared_over_2H(0.5) == 1.0


@pytest.mark.parametrize("H", [0.0, 1.0, -0.2])
def test_c_H_rejects_hurst_outside_unit_interval(H):
    with pytest.raises(DomainError):
        compute_c_H(H)


def test_model_params_validation():
    with pytest.raises(DomainError):
        ModelParams(H=0.0)
    with pytest.raises(DomainError):
        ModelParams(H=0.3, d=0)
    with pytest.raises(DomainError):
        ModelParams(H=0.3, p=1)
    assert ModelParams(H=0.3, p=3).p_star == pytest.approx(1.5)


def test_regime_checks():
    with pytest.raises(RegimeError):
        ModelParams(H=0.6, d=2).check_local_time_regime()
    ModelParams(H=0.4, d=2).check_local_time_regime()
    with pytest.raises(RegimeError):
        ModelParams(H=0.7, d=3, p=2).check_intersection_regime()
    ModelParams(H=0.6, d=3, p=2).check_intersection_regime()


def test_fbm_cov_values(rough):
    assert fbm_cov(1.0, 1.0, rough) == pytest.approx(1.0)
    assert fbm_cov(0.0, 0.7, rough) == pytest.approx(0.0)
    expected = 0.5 * (2.0**0.6 + 1.0 - 1.0)
    assert fbm_cov(1.0, 2.0, rough) == pytest.approx(expected)


@pytest.mark.parametrize("H", [0.2, 0.3, 0.7])
@pytest.mark.parametrize(("s", "t"), [(0.3, 0.3), (0.2, 0.9), (1.0, 0.5)])
def test_rl_quadrature_matches_closed_form(H, s, t):
    params = ModelParams(H=H)
    assert rl_cov(s, t, params) == pytest.approx(
        rl_cov_closed_form(s, t, params),
        rel=1e-8,
    )


def test_rl_variance(rough):
    assert rl_cov(0.8, 0.8, rough) == pytest.approx(0.8**0.6 / 0.6)


def test_rl_is_brownian_at_one_half(brownian):
    assert rl_cov_closed_form(0.3, 0.8, brownian) == pytest.approx(0.3)
    assert remainder_cov(0.3, 0.8, brownian) == 0.0


@pytest.mark.parametrize("H", [0.25, 0.75])
def test_decomposition_identity(H):
    params = ModelParams(H=H)
    c_h = compute_c_H(H)
    grid = np.linspace(0.1, 1.0, 32)
    error = max(
        abs(
            fbm_cov(s, t, params) / c_h**2
            - rl_cov(s, t, params)
            - remainder_cov(s, t, params)
        )
        for s in grid
        for t in grid
    )
    assert error < 1e-6, f"decomposition error {error:.3e} at H={H}"


def test_remainder_closed_form_matches_quadrature(rough):
    assert remainder_cov_closed_form(0.4, 0.9, rough) == pytest.approx(
        remainder_cov(0.4, 0.9, rough),
        rel=1e-6,
    )


def test_moving_average_cov_is_remainder_at_order_zero(rough):
    value = moving_average_cov(0.4, 0.9, 0, 0, rough.H)
    assert value == pytest.approx(remainder_cov(0.4, 0.9, rough), rel=1e-8)


def test_untruncated_kernel_needs_finite_window():
    with pytest.raises(DomainError):
        moving_average_cov(0.4, 0.9, 0, 0, 0.3, subtract_origin=False)


def test_cov_model_kernels(rough):
    model = CovModel(CovKind.FBM_SCALED, rough)
    assert model.variance(1.0) == pytest.approx(1.0 / compute_c_H(0.3) ** 2)
    assert CovModel(CovKind.FBM, rough).allows_negative_times
    assert not CovModel(CovKind.RL, rough).allows_negative_times


def test_rl_allows_hurst_above_one():
    model = CovModel(CovKind.RL, ModelParams(H=1.2))
    assert model.variance(1.0) == pytest.approx(1.0 / 2.4)
    with pytest.raises(DomainError):
        CovModel(CovKind.FBM, ModelParams(H=1.2))


def test_build_cov_matrix_rejects_bad_grids(rough):
    model = CovModel(CovKind.RL, rough)
    with pytest.raises(DomainError):
        build_cov_matrix(model, [0.5, 0.2])
    with pytest.raises(DomainError):
        build_cov_matrix(model, [-0.5, 0.2])


def test_cholesky_reproduces_matrix(rough):
    grid = np.linspace(0.1, 1.0, 20)
    matrix = build_cov_matrix(CovModel(CovKind.FBM, rough), grid)
    factor = matrix.cholesky()
    np.testing.assert_allclose(factor @ factor.T, matrix.entries, atol=1e-12)
    assert matrix.jitter == 0.0


def test_asymmetric_matrix_is_rejected():
    with pytest.raises(NonPSDError):
        CovMatrix(grid=np.array([0.0, 1.0]), entries=np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_indefinite_matrix_raises():
    entries = np.array([[1.0, 2.0], [2.0, 1.0]])
    matrix = CovMatrix(grid=np.array([0.0, 1.0]), entries=entries)
    with pytest.raises(NonPSDError):
        matrix.cholesky()


def test_conditional_variance_of_brownian_motion(brownian):
    model = CovModel(CovKind.RL, brownian)
    assert conditional_variance(model, 1.0, [0.5]) == pytest.approx(0.5)
    assert conditional_variance(model, 1.0, [0.0]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        conditional_variance(model, 1.0, [1.0])


@pytest.mark.parametrize("H", [0.2, 0.3, 0.7, 0.9])
def test_conditional_variance_lower_bound(H):
    model = CovModel(CovKind.FBM, ModelParams(H=H))
    bound = c_H_squared_over_2H(H)
    rng = np.random.default_rng(11)
    for _ in range(20):
        target = rng.uniform(0.2, 1.0)
        past = np.sort(rng.uniform(0.0, target, size=rng.integers(1, 6)))
        gap = target - past[-1]
        variance = conditional_variance(model, target, past)
        assert variance >= bound * gap ** (2.0 * H) - 1e-9, f"{target=} {past=}"


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_determinant_is_product_of_conditional_variances(H):
    model = CovModel(CovKind.FBM, ModelParams(H=H))
    rng = np.random.default_rng(5)
    for _ in range(10):
        grid = np.sort(rng.uniform(0.05, 1.0, size=8))
        sequential = [
            conditional_variance(model, grid[k], grid[:k]) for k in range(1, 8)
        ]
        product = model.variance(grid[0]) * np.prod(sequential)
        determinant = np.linalg.det(build_cov_matrix(model, grid).entries)
        assert product == pytest.approx(determinant, rel=1e-9)
