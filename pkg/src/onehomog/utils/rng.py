"""
Seeded random streams for every battery of the laboratory.

Each stream is a numpy Generator over the counter-based Philox4x64 bit
generator, keyed by the run seed and the CRC-32 of the stream name. The same
(seed, stream) pair therefore yields the same samples on every platform, and
adding a new stream never shifts the samples of an existing one.
"""

import zlib

import numpy as np

STREAMS = (
    "battery",
    "skew",
    "probe",
    "inits",
    "splits",
    "split-noise",
    "matrices",
    "twist-points",
    "modes",
)


def stream_key(seed: int, stream: str) -> np.ndarray:
    """Two-word Philox key for ``(seed, stream)``."""
    if seed < 0:
        raise ValueError(f"Seed must be a non-negative integer, got {seed}")
    tag = zlib.crc32(stream.encode("utf-8"))
    return np.array([seed & 0xFFFFFFFFFFFFFFFF, tag], dtype=np.uint64)


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """Return the generator for one named stream of a run."""
    if stream not in STREAMS:
        raise ValueError(
            f"Unknown random stream: '{stream}'. Expected one of {list(STREAMS)}"
        )
    return np.random.Generator(np.random.Philox(key=stream_key(seed, stream)))
