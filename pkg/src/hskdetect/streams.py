"""Counter-based random streams addressed by (seed, index, ...).

Every consumer derives its own Philox key from the full address, so results
do not depend on the order in which replications are executed.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {"data": 0, "missing": 1, "bootstrap": 2}


def stream(seed: int, *path: int | str) -> np.random.Generator:
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in path:
        words.append(PURPOSES[part] if isinstance(part, str) else int(part))
    key = np.random.SeedSequence(words).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *path: int | str) -> int:
    """A 63-bit seed for a nested consumer (e.g. the bootstrap inside a replication)."""
    return int(stream(seed, *path).integers(0, 2**63 - 1))
