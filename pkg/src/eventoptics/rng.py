"""Keyed counter-based random streams.

Every stream is Philox4x64-10 keyed by the 128-bit pair
``(seed, stream_id)`` with the counter starting at zero.  A deviate is
``(x >> 11) * 2**-53`` for each successive 64-bit output ``x``, which is what
``numpy.random.Generator.random`` computes, so any Philox implementation can
reproduce the streams bit for bit.

Stream ids pack the replica index in the high 32 bits and a channel in the
low 32 bits: channel 0 drives emission, channel ``1 + j`` supplies the
threshold deviates of detector ``j``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError

MASK64 = (1 << 64) - 1
EMISSION_CHANNEL = 0


def stream_id(replica: int, channel: int) -> int:
    if not 0 <= replica < 1 << 32 or not 0 <= channel < 1 << 32:
        raise InvalidParameterError("replica and channel must fit in 32 bits")
    return (replica << 32) | channel


def detector_channel(index: int) -> int:
    return 1 + index


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Deterministic uniform-deviate stream for ``(seed, stream)``."""
    if seed < 0 or seed > MASK64:
        raise InvalidParameterError("seed must be an unsigned 64-bit integer")
    if stream < 0 or stream > MASK64:
        raise InvalidParameterError("stream id must be an unsigned 64-bit integer")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
