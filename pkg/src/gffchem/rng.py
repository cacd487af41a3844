"""Counter-based random streams.

Every random quantity is a pure function of ``(seed, index, stream)``: the
Philox key is ``(seed, index)`` and ``stream`` selects a disjoint counter
range, so sample ``i`` of a run is reproduced bit for bit no matter which
worker draws it or in which order.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1


def bit_generator(seed: int, index: int = 0, stream: int = 0) -> np.random.Philox:
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, 0, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)


def uniforms(seed: int, index: int, n: int, stream: int = 0) -> np.ndarray:
    """Open-interval uniforms ``(j + 1/2) / 2**53`` from the top 53 bits of each word."""
    raw = bit_generator(seed, index, stream).random_raw(int(n))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def standard_normals(seed: int, index: int, n: int, stream: int = 0) -> np.ndarray:
    """Standard Gaussians by inverse CDF; never infinite since uniforms avoid 0 and 1."""
    return ndtri(uniforms(seed, index, n, stream))


def derive_seed(seed: int, *labels: int) -> int:
    """A child seed for a labelled sub-experiment (first Philox word of that stream)."""
    idx = 0
    for lab in labels:
        idx = (idx * 1_000_003 + int(lab) + 1) & _MASK64
    return int(bit_generator(seed, idx, stream=1 << 32).random_raw(1)[0])
