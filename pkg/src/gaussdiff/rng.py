"""Seeded random number streams shared by every stochastic operation.

All randomness flows through counter-based Philox generators so that a
(seed, stream label) pair pins down every draw regardless of platform or
call order.  Gaussian variates are produced by applying the inverse
standard-normal CDF to open-interval uniforms rather than the generator's
native ziggurat path, which keeps bit-for-bit determinism independent of
numpy's internal normal algorithm.
"""

from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri

__all__ = ["derive_seed", "derive_int_seed", "make_rng", "uniform_open", "standard_normal"]


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def derive_seed(base_seed: int, *tags) -> np.random.SeedSequence:
    """Derive an independent seed stream from a base seed and stream labels.

    Distinct tag tuples give statistically independent streams, so e.g.
    training data and held-out data never share draws.
    """
    return np.random.SeedSequence([int(base_seed)] + [_tag_to_int(t) for t in tags])


def derive_int_seed(base_seed: int, *tags) -> int:
    """Collapse a derived stream to a plain integer seed (for provenance fields)."""
    return int(derive_seed(base_seed, *tags).generate_state(1, dtype=np.uint64)[0])


def make_rng(base_seed: int, *tags) -> np.random.Generator:
    """Counter-based generator for the stream named by ``tags``."""
    return np.random.Generator(np.random.Philox(derive_seed(base_seed, *tags)))


def uniform_open(rng: np.random.Generator, shape=None) -> np.ndarray:
    """Uniform draws strictly inside (0, 1).

    Built from 53-bit integers offset by half a step, so 0.0 and 1.0 are
    unreachable and the inverse-CDF transform below never produces +-inf.
    """
    bits = np.asarray(rng.integers(0, 1 << 53, size=shape), dtype=np.float64)
    return (bits + 0.5) / (1 << 53)


def standard_normal(rng: np.random.Generator, shape=None) -> np.ndarray:
    """Standard-normal draws via the inverse CDF of open-interval uniforms."""
    return ndtri(uniform_open(rng, shape))
