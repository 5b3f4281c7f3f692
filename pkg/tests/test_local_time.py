import math

import numpy as np
import pytest

from fbm_lab.errors import DomainError, RegimeError
from fbm_lab.estimators.local_time import (
    KernelParams,
    default_epsilon,
    eps_monotonicity_check,
    gaussian_kernel,
    half_normal_tail_slope,
    occupation_local_time,
    occupation_mass,
    sample_local_time,
    scaling_check,
    smoothed_local_time,
    tail_curve,
    tail_slope,
)
from fbm_lab.simulator.covariance import CovKind, CovModel, ModelParams
from fbm_lab.simulator.sampling import GridPath, sample_process, uniform_grid
from fbm_lab.utils.callbacks import MonteCarloCallback
from fbm_lab.utils.statistics import HOLDS


class StopAfterFirstBatch(MonteCarloCallback):
    def _on_batch(self, values) -> bool:
        return False


def test_gaussian_kernel_values():
    assert gaussian_kernel(0.0, 1.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))
    assert gaussian_kernel([0.0, 0.0], 0.5) == pytest.approx(1.0 / math.pi)
    with pytest.raises(DomainError):
        gaussian_kernel(0.0, 0.0)


def test_kernel_params():
    with pytest.raises(DomainError):
        KernelParams(-1.0)
    assert KernelParams(0.1).rescaled(4.0, 0.25).epsilon == pytest.approx(0.2)
    assert default_epsilon(1e-12, 0.3) == pytest.approx(1e-4)


def test_smoothed_local_time_of_resting_path():
    path = GridPath(uniform_grid(10), np.zeros(11))
    value = smoothed_local_time(path, 0.0, KernelParams(0.01))
    assert value == pytest.approx(1.0 / math.sqrt(2.0 * math.pi * 0.01))


def test_occupation_local_time_of_resting_path():
    path = GridPath(uniform_grid(10), np.zeros(11))
    assert occupation_local_time(path, 0.0, 0.1) == pytest.approx(5.0)
    assert occupation_local_time(path, 1.0, 0.1) == 0.0


def test_occupation_window_is_one_dimensional():
    path = GridPath(uniform_grid(4), np.zeros((5, 2)))
    with pytest.raises(DomainError):
        occupation_local_time(path, 0.0, 0.1)
    with pytest.raises(DomainError):
        occupation_mass(path, KernelParams(0.01))


def test_occupation_mass_is_time_span():
    times = uniform_grid(200)
    path = GridPath(times, times.copy())
    assert occupation_mass(path, KernelParams(1e-3)) == pytest.approx(1.0, rel=1e-3)


def test_point_must_match_dimension():
    path = GridPath(uniform_grid(4), np.zeros((5, 2)))
    with pytest.raises(DomainError):
        smoothed_local_time(path, [0.0, 0.0, 0.0], KernelParams(0.1))


def test_regime_is_checked():
    model = CovModel(CovKind.FBM, ModelParams(H=0.6, d=2))
    with pytest.raises(RegimeError):
        sample_local_time(model, 1.0, 0.0, None, 16, seed=1, replicas=4)


def test_sample_is_deterministic(rough):
    model = CovModel(CovKind.RL, rough)
    first = sample_local_time(model, 1.0, 0.0, None, 32, seed=4, replicas=20)
    second = sample_local_time(
        model,
        1.0,
        0.0,
        None,
        32,
        seed=4,
        replicas=20,
        chunk_size=7,
    )
    np.testing.assert_array_equal(first.values, second.values)
    assert np.all(first.values >= 0.0)


def test_callback_can_stop_sampling(rough):
    model = CovModel(CovKind.FBM, rough)
    sample = sample_local_time(
        model,
        1.0,
        0.0,
        None,
        16,
        seed=4,
        replicas=30,
        chunk_size=10,
        callback=StopAfterFirstBatch(),
    )
    assert len(sample) == 10


def test_brownian_mean_local_time(brownian):
    epsilon = 0.01
    model = CovModel(CovKind.FBM, brownian)
    sample = sample_local_time(
        model,
        1.0,
        0.0,
        KernelParams(epsilon),
        256,
        seed=2,
        replicas=2000,
    )
    gap = math.sqrt(1.0 + epsilon) - math.sqrt(epsilon)
    expected = math.sqrt(2.0 / math.pi) * gap
    assert np.mean(sample.values) == pytest.approx(expected, rel=0.06)


def test_self_similarity(rough):
    model = CovModel(CovKind.FBM, rough)
    kernel = KernelParams(0.01)
    base = sample_local_time(model, 1.0, 0.0, kernel, 64, seed=5, replicas=2000)
    stretched = sample_local_time(
        model,
        2.0,
        0.0,
        kernel.rescaled(2.0, rough.H),
        64,
        seed=6,
        replicas=2000,
    )
    assert scaling_check(model, 2.0, base, stretched) < 0.08


def test_tail_curve():
    values = np.linspace(0.0, 1.0, 101)
    curve = tail_curve(values, [0.105, 0.505, 0.955], kappa=0.5)
    assert [point.exceedances for point in curve] == [90, 50, 5]
    assert curve[0].probability == pytest.approx(0.9)
    assert curve[0].ci_low < 0.9 < curve[0].ci_high
    assert curve[1].normalized == pytest.approx(0.505**-2 * math.log(0.5))
    assert not curve[2].resolved


def test_tail_curve_needs_exponent_for_raw_values():
    with pytest.raises(DomainError):
        tail_curve([1.0, 2.0], [0.5])


def test_tail_slope_needs_three_levels():
    curve = tail_curve(np.linspace(0.0, 1.0, 101), [0.1, 0.2], kappa=0.5)
    with pytest.raises(DomainError):
        tail_slope(curve, 2.0)


def test_half_normal_tail_slope():
    assert -0.7 < half_normal_tail_slope(2.0, 4.0) < -0.5


def test_smaller_kernel_raises_mean(brownian):
    batch = sample_process(CovKind.FBM, brownian, 128, 1.0, seed=3, replicas=400)
    report = eps_monotonicity_check(batch, 0.0, 0.01, 0.1)
    assert report.verdict == HOLDS
    assert report.slack > 0.0
    with pytest.raises(DomainError):
        eps_monotonicity_check(batch, 0.0, 0.1, 0.01)
