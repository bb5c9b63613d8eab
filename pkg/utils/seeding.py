# seeding.py

import numpy as np

# Stream keys under the master seed.
RESERVOIR_STREAM = 0
PROJECTOR_STREAM = 1
SHADOW_STREAM = 2
VARMA_STREAM = 3
FUNCTIONAL_STREAM = 4


def derive_seed(master_seed: int, *keys: int) -> int:
    """
    Derives an independent 64-bit seed from the master seed and an integer stream path,
    using numpy's SeedSequence spawn keys (PCG64 streams downstream).
    """
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))
