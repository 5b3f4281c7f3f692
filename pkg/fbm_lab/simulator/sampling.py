"""Exact-in-law samplers of fBm, Riemann-Liouville and remainder paths."""
import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft

from ..errors import DomainError, SizeLimitError
from ..utils.random_streams import Stream, chunk_ranges, replica_generator
from .covariance import CovKind, CovModel, ModelParams, build_cov_matrix

LOGGER = logging.getLogger(__name__)

MAX_FACTOR_GRID = 16384
SPECTRUM_TOLERANCE = 1e-8
_STEP_RTOL = 1e-12


def uniform_grid(n: int, T: float = 1.0, start: float = 0.0) -> np.ndarray:
    """``n`` uniform steps from ``start`` to ``T``, endpoints included."""
    if n < 1:
        msg = f"Grid needs at least one step, got {n}"
        raise DomainError(msg)
    if not T > start:
        msg = f"Horizon {T} must exceed the grid start {start}"
        raise DomainError(msg)
    return np.linspace(start, T, n + 1)


@dataclass
class GridPath:
    """A d-dimensional path sampled on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray
    model: Optional[CovModel] = None
    seed: Optional[int] = None
    replica: Optional[int] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        if self.times.ndim != 1 or self.times.size < 2:
            msg = "A path needs at least two grid points"
            raise DomainError(msg)
        if self.values.shape[0] != self.times.size:
            msg = (
                f"Path has {self.values.shape[0]} values for "
                f"{self.times.size} grid points"
            )
            raise DomainError(msg)
        if self.times[0] < 0.0:
            msg = "Path times must be nonnegative"
            raise DomainError(msg)
        steps = np.diff(self.times)
        if np.any(steps <= 0.0) or not np.allclose(
            steps,
            steps[0],
            rtol=1e-9,
            atol=_STEP_RTOL * abs(self.times[-1]),
        ):
            msg = "Path times must form a uniform increasing grid"
            raise DomainError(msg)

    @property
    def step(self) -> float:
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def dimension(self) -> int:
        return int(self.values.shape[1])

    def __add__(self, other: "GridPath") -> "GridPath":
        if not np.array_equal(self.times, other.times):
            msg = "Paths on different grids cannot be added"
            raise DomainError(msg)
        return GridPath(self.times, self.values + other.values, seed=self.seed)

    def scaled(self, time_factor: float, value_factor: float) -> "GridPath":
        """Path ``value_factor * X(t / time_factor)`` on the stretched grid."""
        return GridPath(
            self.times * time_factor,
            self.values * value_factor,
            model=self.model,
            seed=self.seed,
            replica=self.replica,
        )


@dataclass(eq=False)
class PathBatch(Sequence):
    """Replicas of one sampler stored as an array ``(replicas, points, d)``."""

    times: np.ndarray
    values: np.ndarray
    model: Optional[CovModel] = None
    seed: Optional[int] = None
    first_replica: int = 0
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            msg = f"Replica index {index} out of range"
            raise IndexError(msg)
        return GridPath(
            self.times,
            self.values[index],
            model=self.model,
            seed=self.seed,
            replica=self.first_replica + index,
        )

    @property
    def dimension(self) -> int:
        return int(self.values.shape[2])

    def __add__(self, other: "PathBatch") -> "PathBatch":
        if not np.array_equal(self.times, other.times) or len(self) != len(other):
            msg = "Batches must share grid and replica count to be added"
            raise DomainError(msg)
        return PathBatch(
            self.times,
            self.values + other.values,
            seed=self.seed,
            first_replica=self.first_replica,
            metadata={"sum_of": [_kind_name(self.model), _kind_name(other.model)]},
        )


def _kind_name(model: Optional[CovModel]) -> Optional[str]:
    return None if model is None else model.kind.value


def _cholesky_chunk(factor, active, n_points, dimension, seed, stream, start, stop):
    values = np.zeros((stop - start, n_points, dimension))
    for offset, replica in enumerate(range(start, stop)):
        rng = replica_generator(seed, replica, stream)
        noise = rng.standard_normal((factor.shape[0], dimension))
        values[offset, active] = factor @ noise
    return values


class CholeskySampler:
    """
    Exact sampler through a factor of the covariance matrix on the grid.

    Grid points with zero variance (t = 0, or the whole remainder process at
    H = 1/2) are kept out of the factorization and carry the value 0.

    :param model: process kind and parameters
    :param grid: strictly increasing time grid
    """

    def __init__(self, model: CovModel, grid):
        self.model = model
        self.grid = np.asarray(grid, dtype=float).ravel()
        if self.grid.size > MAX_FACTOR_GRID:
            msg = (
                f"Factorization sampling is limited to {MAX_FACTOR_GRID} grid "
                f"points, got {self.grid.size}"
            )
            raise SizeLimitError(msg)
        variances = np.asarray(model.variance(self.grid), dtype=float)
        self.active = variances > 0.0
        if np.any(self.active):
            matrix = build_cov_matrix(model, self.grid[self.active])
            self.factor = matrix.cholesky()
            self.jitter = matrix.jitter
        else:
            self.factor = np.zeros((0, 0))
            self.jitter = 0.0
        LOGGER.debug(
            "Cholesky sampler for %s on %d points (%d active)",
            model.kind.value,
            self.grid.size,
            int(np.sum(self.active)),
        )

    def sample(
        self,
        seed: int,
        replicas: int,
        dimension: Optional[int] = None,
        stream: int = Stream.PATHS,
        first_replica: int = 0,
        workers: int = 1,
        chunk_size: int = 256,
    ) -> PathBatch:
        """Draw ``replicas`` paths; replica ``r`` only uses stream ``(seed, r)``."""
        dimension = self.model.params.d if dimension is None else int(dimension)
        if replicas < 0:
            msg = f"Replica count must be nonnegative, got {replicas}"
            raise DomainError(msg)
        n_points = self.grid.size
        stop = first_replica + replicas
        chunks = [
            (first_replica + lo, first_replica + hi)
            for _, lo, hi in chunk_ranges(replicas, chunk_size)
        ]
        arguments = (self.factor, self.active, n_points, dimension, seed, int(stream))
        if workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [
                    executor.submit(_cholesky_chunk, *arguments, lo, hi)
                    for lo, hi in chunks
                ]
                parts = [future.result() for future in futures]
        else:
            parts = [_cholesky_chunk(*arguments, lo, hi) for lo, hi in chunks]
        values = (
            np.concatenate(parts, axis=0)
            if parts
            else np.zeros((0, n_points, dimension))
        )
        LOGGER.debug("Sampled replicas %d..%d", first_replica, stop)
        return PathBatch(
            self.grid,
            values,
            model=self.model,
            seed=seed,
            first_replica=first_replica,
            metadata={"method": "cholesky", "jitter": self.jitter},
        )


def fgn_autocovariance(H: float, lags) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise."""
    lags = np.abs(np.asarray(lags, dtype=float))
    two_h = 2.0 * H
    return 0.5 * (
        np.abs(lags + 1.0) ** two_h - 2.0 * lags**two_h + np.abs(lags - 1.0) ** two_h
    )


def _circulant_chunk(scale, n, dimension, step_scale, seed, stream, start, stop):
    values = np.zeros((stop - start, n + 1, dimension))
    size = scale.size
    for offset, replica in enumerate(range(start, stop)):
        rng = replica_generator(seed, replica, stream)
        for coordinate in range(dimension):
            noise = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            increments = fft.fft(scale * noise).real[:n] * step_scale
            values[offset, 1:, coordinate] = np.cumsum(increments)
    return values


class CirculantSampler:
    """
    fBm sampler embedding the fractional Gaussian noise covariance in a
    circulant matrix of size 2n (Davies-Harte / Wood-Chan).

    When the embedding spectrum has a negative eigenvalue beyond
    ``SPECTRUM_TOLERANCE`` relative to the largest one, sampling falls back to
    the factorization sampler and ``fallback`` is set.

    :param params: model parameters, H in (0, 1)
    :param n: number of steps, a power of two
    :param T: horizon
    """

    def __init__(self, params: ModelParams, n: int, T: float = 1.0):
        params.check_fbm()
        if n < 1 or n & (n - 1):
            msg = f"Circulant embedding needs a power of two, got n = {n}"
            raise DomainError(msg)
        self.params = params
        self.model = CovModel(CovKind.FBM, params)
        self.n = n
        self.T = float(T)
        self.grid = uniform_grid(n, T)
        lags = np.arange(n + 1)
        autocovariance = fgn_autocovariance(params.H, lags)
        row = np.concatenate([autocovariance, autocovariance[-2:0:-1]])
        eigenvalues = fft.fft(row).real
        self.min_eigenvalue = float(eigenvalues.min())
        self.fallback = self.min_eigenvalue < -SPECTRUM_TOLERANCE * eigenvalues.max()
        if self.fallback:
            LOGGER.warning(
                "Circulant spectrum has eigenvalue %g, falling back to Cholesky",
                self.min_eigenvalue,
            )
            self._fallback_sampler = CholeskySampler(self.model, self.grid)
        self.scale = np.sqrt(np.clip(eigenvalues, 0.0, None) / row.size)

    def sample(
        self,
        seed: int,
        replicas: int,
        dimension: Optional[int] = None,
        stream: int = Stream.CIRCULANT,
        first_replica: int = 0,
        workers: int = 1,
        chunk_size: int = 256,
    ) -> PathBatch:
        dimension = self.params.d if dimension is None else int(dimension)
        if self.fallback:
            batch = self._fallback_sampler.sample(
                seed,
                replicas,
                dimension,
                stream=stream,
                first_replica=first_replica,
                workers=workers,
                chunk_size=chunk_size,
            )
            batch.metadata.update(
                {"method": "circulant", "fallback": True},
            )
            return batch
        step_scale = (self.T / self.n) ** self.params.H
        arguments = (self.scale, self.n, dimension, step_scale, seed, int(stream))
        chunks = [
            (first_replica + lo, first_replica + hi)
            for _, lo, hi in chunk_ranges(replicas, chunk_size)
        ]
        if workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [
                    executor.submit(_circulant_chunk, *arguments, lo, hi)
                    for lo, hi in chunks
                ]
                parts = [future.result() for future in futures]
        else:
            parts = [_circulant_chunk(*arguments, lo, hi) for lo, hi in chunks]
        values = (
            np.concatenate(parts, axis=0)
            if parts
            else np.zeros((0, self.n + 1, dimension))
        )
        return PathBatch(
            self.grid,
            values,
            model=self.model,
            seed=seed,
            first_replica=first_replica,
            metadata={
                "method": "circulant",
                "fallback": False,
                "min_eigenvalue": self.min_eigenvalue,
            },
        )


def sample_paths(
    model: CovModel,
    grid,
    seed: int,
    replicas: int,
    dimension: Optional[int] = None,
    stream: int = Stream.PATHS,
    first_replica: int = 0,
    workers: int = 1,
) -> PathBatch:
    """Exact factorization sampling of ``replicas`` paths of ``model``."""
    sampler = CholeskySampler(model, grid)
    return sampler.sample(
        seed,
        replicas,
        dimension,
        stream=stream,
        first_replica=first_replica,
        workers=workers,
    )


def sample_fbm_circulant(
    params: ModelParams,
    n: int,
    T: float,
    seed: int,
    replicas: int,
    dimension: Optional[int] = None,
    first_replica: int = 0,
    workers: int = 1,
) -> PathBatch:
    """fBm paths by circulant embedding; ``metadata["fallback"]`` reports
    whether the factorization sampler had to be used."""
    sampler = CirculantSampler(params, n, T)
    return sampler.sample(
        seed,
        replicas,
        dimension,
        first_replica=first_replica,
        workers=workers,
    )


def sample_process(
    kind: CovKind,
    params: ModelParams,
    n: int,
    T: float,
    seed: int,
    replicas: int,
    first_replica: int = 0,
    workers: int = 1,
) -> PathBatch:
    """Uniform-grid sampling with the fastest exact method for ``kind``."""
    sampler = process_sampler(kind, params, n, T)
    return sampler.sample(
        seed,
        replicas,
        first_replica=first_replica,
        workers=workers,
    )


def process_sampler(kind: CovKind, params: ModelParams, n: int, T: float = 1.0):
    """Circulant sampler for fBm on power-of-two grids, factorization otherwise.

    Build it once and call ``sample`` per chunk of replicas.
    """
    if kind == CovKind.FBM and n >= 1 and n & (n - 1) == 0:
        return CirculantSampler(params, n, T)
    return CholeskySampler(CovModel(kind, params), uniform_grid(n, T))


class DecompositionSampler:
    """Independent Riemann-Liouville and remainder samplers on one grid.

    The sum of the two paths has the law of ``c_H^{-1}`` times fBm.
    """

    def __init__(self, params: ModelParams, grid):
        self.params = params
        self.rl = CholeskySampler(CovModel(CovKind.RL, params), grid)
        self.remainder = CholeskySampler(CovModel(CovKind.REMAINDER, params), grid)

    def sample(
        self,
        seed: int,
        replicas: int,
        dimension: Optional[int] = None,
        first_replica: int = 0,
        workers: int = 1,
        rl_stream: int = Stream.PATHS,
        remainder_stream: int = Stream.REMAINDER,
    ):
        """:return: ``(rl_batch, remainder_batch)``"""
        rl_batch = self.rl.sample(
            seed,
            replicas,
            dimension,
            stream=rl_stream,
            first_replica=first_replica,
            workers=workers,
        )
        remainder_batch = self.remainder.sample(
            seed,
            replicas,
            dimension,
            stream=remainder_stream,
            first_replica=first_replica,
            workers=workers,
        )
        return rl_batch, remainder_batch


def sample_paired_decomposition(
    params: ModelParams,
    grid,
    seed: int,
    replicas: int,
    dimension: Optional[int] = None,
    first_replica: int = 0,
    workers: int = 1,
):
    """Independent Riemann-Liouville and remainder paths on one grid.

    :return: ``(rl_batch, remainder_batch)``
    """
    return DecompositionSampler(params, grid).sample(
        seed,
        replicas,
        dimension,
        first_replica=first_replica,
        workers=workers,
    )
