"""Counter-based Gaussian streams.

Every standard normal is addressed by ``(stream, step, sample, entry)``. The
Philox key is ``(stream, step)`` and the 256-bit counter starts at
``sample * blocks_per_sample + entry // 4``; each counter block yields four
64-bit words. Any entry can therefore be regenerated on its own, and
drawing samples in a different order or grouping gives identical numbers.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_KIND_CODES = {"so": 1, "u": 2, "sp": 3}


def stream_key(seed: int, kind: str, n: int, m: int) -> int:
    """64-bit stream identifier for one experiment seed and one driver shape."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([seed, _KIND_CODES[kind], n, m])
    return int(ss.generate_state(1, np.uint64)[0])


def _blocks(entries: int) -> int:
    return max(1, -(-entries // 4))


def _to_normal(raw: np.ndarray) -> np.ndarray:
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _philox(stream: int, step: int, block: int) -> np.random.Philox:
    key = np.array([stream, step], dtype=np.uint64)
    counter = np.array([block, 0, 0, 0], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)


def normals(stream: int, step: int, sample_start: int, nsamples: int, entries: int) -> np.ndarray:
    """Standard normals for samples ``sample_start .. sample_start + nsamples - 1``.

    Returns an array of shape ``(nsamples, entries)``.
    """
    bps = _blocks(entries)
    bg = _philox(stream, step, sample_start * bps)
    raw = bg.random_raw(nsamples * bps * 4).reshape(nsamples, bps * 4)
    return _to_normal(raw[:, :entries])


def normal_entry(stream: int, step: int, sample: int, entry: int, entries: int) -> float:
    """A single entry of :func:`normals`, generated in isolation."""
    if not 0 <= entry < entries:
        raise IndexError(f"entry {entry} outside 0..{entries - 1}")
    bg = _philox(stream, step, sample * _blocks(entries) + entry // 4)
    return float(_to_normal(bg.random_raw(4))[entry % 4])
