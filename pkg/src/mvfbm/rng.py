"""Counter-based random streams keyed by (seed, *indices).

Every stream is a Philox generator whose key is derived from the root seed and
a tuple of integer indices, so the numbers drawn for e.g. particle 17 do not
depend on how many workers are used or in which order chunks are processed.
"""

from __future__ import annotations

import numpy as np

# stream tags, kept small and fixed so that keys stay stable across releases
FGN = 1
FBM_COMPONENT = 2
PARTICLE_BM = 3
PARTICLE_FBM = 4
PROBE = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *key)``."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
