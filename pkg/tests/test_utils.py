import numpy as np
import pytest

from fbm_lab.utils.callbacks import ConvergenceCallback, safe_mean
from fbm_lab.utils.random_streams import Stream, chunk_ranges, replica_generator
from fbm_lab.utils.statistics import (
    HOLDS,
    INCONCLUSIVE,
    VIOLATED,
    inequality_verdict,
    linear_slope,
    mean_and_stderr,
    wilson_interval,
)


def test_replica_generator_is_reproducible():
    first = replica_generator(7, 3, Stream.PATHS).standard_normal(5)
    second = replica_generator(7, 3, Stream.PATHS).standard_normal(5)
    np.testing.assert_array_equal(first, second)


def test_streams_and_replicas_are_distinct():
    base = replica_generator(7, 3, Stream.PATHS).standard_normal(5)
    other_stream = replica_generator(7, 3, Stream.REMAINDER).standard_normal(5)
    other_replica = replica_generator(7, 4, Stream.PATHS).standard_normal(5)
    assert not np.array_equal(base, other_stream)
    assert not np.array_equal(base, other_replica)


def test_replica_generator_ranges():
    with pytest.raises(ValueError):
        replica_generator(1, -1)
    with pytest.raises(ValueError):
        replica_generator(1, 0, 1 << 16)


def test_chunk_ranges():
    assert chunk_ranges(7, 3) == [(0, 0, 3), (1, 3, 6), (2, 6, 7)]
    assert chunk_ranges(0, 3) == []


def test_inequality_verdicts():
    assert inequality_verdict(0.5, 0.01, 1.0) == HOLDS
    assert inequality_verdict(-0.5, 0.01, 1.0) == VIOLATED
    assert inequality_verdict(-0.01, 0.01, 1.0) == HOLDS
    assert inequality_verdict(0.5, 0.5, 1.0) == INCONCLUSIVE


def test_mean_and_stderr():
    mean, stderr = mean_and_stderr([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert stderr == pytest.approx(1.0 / np.sqrt(3.0))
    assert mean_and_stderr([4.0]) == (4.0, 0.0)
    assert np.isnan(mean_and_stderr([])[0])


def test_linear_slope_of_exact_line():
    slope, stderr = linear_slope([0.0, 1.0, 2.0, 3.0], [1.0, 3.0, 5.0, 7.0])
    assert slope == pytest.approx(2.0)
    assert stderr == pytest.approx(0.0, abs=1e-12)


def test_wilson_interval_contains_proportion():
    low, high = wilson_interval(30, 100)
    assert low < 0.3 < high


def test_convergence_callback_running_statistics():
    callback = ConvergenceCallback(log_interval=None)
    callback.on_run_start("test")
    assert callback.on_batch([1.0, 2.0])
    assert callback.on_batch([3.0, 4.0])
    callback.on_run_end()
    assert callback.n_calls == 2
    assert callback.running_mean == pytest.approx(2.5)
    assert callback.running_stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert callback.window_spread == pytest.approx(2.0)


def test_safe_mean_of_empty_sequence():
    assert np.isnan(safe_mean([]))
