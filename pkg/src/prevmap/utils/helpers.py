"""
Helper functions and utilities for prevmap.
"""

import os

import numpy as np


def keyed_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a generator whose stream depends only on ``(seed, *keys)``.

    Every random draw in prevmap goes through a stream keyed this way, so a
    voxel, subject block, split or Monte Carlo replication can be reproduced in
    isolation and parallel workers never share state.

    Args:
        seed: Base seed (unsigned 64-bit)
        keys: Stream tag followed by any counters (voxel index, split, ...)

    Returns:
        Fresh ``numpy.random.Generator``
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def open_unit_uniforms(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform draws strictly inside (0, 1), safe for inverse-CDF transforms."""
    u = rng.random(shape)
    tiny = np.nextafter(0.0, 1.0)
    return np.clip(u, tiny, 1.0 - np.finfo(float).epsneg)


def default_workers() -> int:
    """Number of CPUs this process may run on."""
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def parse_float_list(text: str) -> list[float]:
    """Parse ``"0.1,0.2, 0.3"`` into floats.

    Args:
        text: Comma-separated numbers

    Returns:
        List of floats (empty items are skipped)
    """
    return [float(item) for item in text.split(",") if item.strip()]


def pearson_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation, NaN when either side is constant."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])
