"""Counter-based random streams for reproducible Monte Carlo.

All sampling entry points accept either an integer seed or a
``numpy.random.Generator``.  Internally, work that is split into chunks
(inner estimator samples, calibration inputs, experiment repeats) derives one
Philox stream per chunk from ``(seed, chunk_index)``, so results are
bit-identical regardless of how chunks are scheduled across threads.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def as_generator(rng: int | np.random.Generator | None) -> np.random.Generator:
    """Normalize a seed-or-generator argument to a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(key=[int(rng) & _MASK64, 0]))


def derive_seed(rng: int | np.random.Generator | None) -> int:
    """Return a 64-bit base seed for counter-based streams.

    Integer seeds pass through unchanged; a Generator is consumed for one
    draw (so the derived seed is deterministic given the generator state).
    """
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 1 << 63, dtype=np.int64))
    if rng is None:
        raise ValueError("a seed or Generator is required")
    return int(rng) & _MASK64


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for chunk ``index`` under ``seed``."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, index & _MASK64]))
