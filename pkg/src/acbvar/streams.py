"""Keyed counter-based random streams.

Every random quantity in the package is drawn from a Philox generator keyed
by ``(seed, *keys)``, so results do not depend on the order or thread in which
work items are evaluated.
"""

from __future__ import annotations

import numpy as np

# draws per keyed chunk in the posterior sampler
CHUNK = 512

# leading key separating independent uses of the same seed
POSTERIOR, ROTATION, SIMULATION = 0, 1, 2


def stream(seed: int, *keys: int) -> np.random.Generator:
    if seed is None:
        raise ValueError("a seed is required")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def chunks(M: int, size: int = CHUNK):
    """Yield ``(chunk_index, start, stop)`` covering ``range(M)``."""
    for c, start in enumerate(range(0, M, size)):
        yield c, start, min(start + size, M)
