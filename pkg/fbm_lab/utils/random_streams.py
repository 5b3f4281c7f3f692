"""Counter-based random streams.

Every draw of the laboratory comes from a Philox generator whose key is built
from ``(seed, stream, replica)``. Replicas therefore never share generator
state, and the output of a computation does not depend on how replicas are
split among workers.
"""
from enum import IntEnum

import numpy as np

_KEY_MASK = (1 << 64) - 1
_REPLICA_BITS = 48


class Stream(IntEnum):
    """Identifiers separating independent uses of one seed."""

    PATHS = 0
    REMAINDER = 1
    CIRCULANT = 2
    IMPORTANCE = 3
    HORIZONS = 4
    RKHS = 5
    FIELD = 6
    INTERSECTION = 16  # one stream per process, INTERSECTION + j
    INTERSECTION_REMAINDER = 32


def replica_generator(seed: int, replica: int, stream: int = Stream.PATHS):
    """Return the generator of one replica.

    :param seed: 64-bit user seed
    :param replica: replica (or chunk) index, below 2**48
    :param stream: stream identifier, below 2**16
    :return: a ``numpy.random.Generator`` backed by Philox
    """
    if not 0 <= replica < (1 << _REPLICA_BITS):
        msg = f"Replica index out of range: {replica}"
        raise ValueError(msg)
    if not 0 <= int(stream) < (1 << (64 - _REPLICA_BITS)):
        msg = f"Stream identifier out of range: {stream}"
        raise ValueError(msg)
    key = np.array(
        [int(seed) & _KEY_MASK, (int(stream) << _REPLICA_BITS) | int(replica)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def chunk_ranges(total: int, chunk_size: int):
    """Split ``range(total)`` into consecutive ``(index, start, stop)`` chunks."""
    return [
        (index, start, min(start + chunk_size, total))
        for index, start in enumerate(range(0, total, chunk_size))
    ]
