"""Counter-based random numbers.

Every uniform is a pure function of ``(seed, stream, index)``: a SplitMix64
finalizer is chained over the three integers and the top 53 bits become a
double in the open interval (0, 1). Trajectory ``i`` of a simulation is stream
``i``, so any trajectory can be regenerated in isolation, batches can be
evaluated in any order or split across threads, and the result never changes.
"""

from __future__ import annotations

import secrets

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM_GAMMA = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53

DEFAULT_SEED = 42


def normalize_seed(seed: int) -> int:
    """Map any Python int (negative values included) onto 64 bits."""
    return int(seed) & MASK64


def entropy_seed() -> int:
    return secrets.randbits(63)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _key(seed: int) -> np.ndarray:
    return _mix64(np.array([normalize_seed(seed)], dtype=np.uint64) + _GOLDEN)


def uniforms(seed: int, stream, index) -> np.ndarray:
    """Uniform(0, 1) variates addressed by ``(seed, stream, index)``.

    ``stream`` and ``index`` broadcast against each other. Values are never
    exactly 0 or 1.
    """
    stream = np.asarray(stream, dtype=np.int64).astype(np.uint64)
    index = np.asarray(index, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(_key(seed) ^ ((stream + np.uint64(1)) * _STREAM_GAMMA))
        h = _mix64(h + (index + np.uint64(1)) * _GOLDEN)
    return ((h >> _S11).astype(np.float64) + 0.5) * _TWO_M53


class RandomStream:
    """Sequential view of one counter-addressed stream.

    Not thread-safe; give each thread its own stream id.
    """

    def __init__(self, seed: int = DEFAULT_SEED, stream: int = 0, start: int = 0):
        self.seed = normalize_seed(seed)
        self.stream = int(stream)
        self.position = int(start)

    def uniforms(self, n: int) -> np.ndarray:
        idx = np.arange(self.position, self.position + n, dtype=np.int64)
        self.position += n
        return uniforms(self.seed, self.stream, idx)

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream={self.stream}, position={self.position})"
