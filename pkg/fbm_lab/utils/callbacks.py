import logging
from collections import deque
from typing import Optional

import numpy as np

LOGGER = logging.getLogger(__name__)


def safe_mean(values) -> float:
    """Mean of a possibly empty sequence (nan when empty)."""
    return float("nan") if len(values) == 0 else float(np.mean(values))


class MonteCarloCallback:
    """
    Base class for callbacks called by batched Monte Carlo loops.

    The loop calls ``on_run_start`` once, ``on_batch`` after each batch with
    the batch values, and ``on_run_end`` when done.

    :param verbose: Verbosity level: 0 for no output, 1 for info messages,
        2 for debug messages
    """

    def __init__(self, verbose: int = 0):
        self.verbose = verbose
        self.n_calls = 0
        self.run_name: Optional[str] = None

    def on_run_start(self, run_name: str) -> None:
        self.run_name = run_name
        self.n_calls = 0
        self._on_run_start()

    def on_batch(self, values) -> bool:
        """
        Called after each batch.

        :return: If the callback returns False, the loop stops early.
        """
        self.n_calls += 1
        return self._on_batch(np.asarray(values, dtype=float))

    def on_run_end(self) -> None:
        self._on_run_end()

    def _on_run_start(self) -> None:
        pass

    def _on_batch(self, values) -> bool:
        return True

    def _on_run_end(self) -> None:
        pass


class ConvergenceCallback(MonteCarloCallback):
    """
    Keeps running statistics of a Monte Carlo estimate.

    The running mean and standard error cover every value seen so far; the
    window of the last ``stats_window_size`` batch means shows whether the
    estimate still drifts.
    """

    def __init__(
        self,
        stats_window_size: int = 20,
        log_interval: Optional[int] = 10,
        verbose: int = 0,
    ):
        super().__init__(verbose)
        self._stats_window_size = stats_window_size
        self.log_interval = log_interval
        self._batch_means = None
        self._count = 0
        self._sum = 0.0
        self._sum_sq = 0.0

    def _on_run_start(self) -> None:
        self._batch_means = deque(maxlen=self._stats_window_size)
        self._count = 0
        self._sum = 0.0
        self._sum_sq = 0.0

    def _on_batch(self, values) -> bool:
        if self._batch_means is None:
            self._on_run_start()
        if values.size:
            self._batch_means.append(float(np.mean(values)))
            self._count += values.size
            self._sum += float(np.sum(values))
            self._sum_sq += float(np.sum(values * values))
        if self.log_interval is not None and self.n_calls % self.log_interval == 0:
            self._dump_logs()
        return True

    def _on_run_end(self) -> None:
        if self.verbose >= 1:
            self._dump_logs()

    @property
    def running_mean(self) -> float:
        return self._sum / self._count if self._count else float("nan")

    @property
    def running_stderr(self) -> float:
        if self._count < 2:
            return float("nan")
        mean = self.running_mean
        variance = max(self._sum_sq / self._count - mean * mean, 0.0)
        return float(np.sqrt(variance * self._count / (self._count - 1) / self._count))

    @property
    def window_spread(self) -> float:
        """Peak-to-peak range of the recent batch means."""
        if not self._batch_means:
            return float("nan")
        return float(np.ptp(list(self._batch_means)))

    def _dump_logs(self) -> None:
        LOGGER.info(
            "%s: batch %d, samples %d, mean %.6g +/- %.2g, window mean %.6g",
            self.run_name,
            self.n_calls,
            self._count,
            self.running_mean,
            self.running_stderr,
            safe_mean(self._batch_means or []),
        )
