"""
Seeded random generators shared by operators, signal generators and sweeps
"""

from typing import List, Optional

import numpy as np


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """One counter-based (Philox) generator per call; same seed, same stream"""
    return np.random.Generator(np.random.Philox(seed))


def derive_seeds(base_seed: int, *keys: int, count: int = 1) -> List[int]:
    """Independent child seeds for (base_seed, keys...), stable across runs and thread order"""
    seq = np.random.SeedSequence([int(base_seed), *[int(k) for k in keys]])
    return [int(s) for s in seq.generate_state(count, dtype=np.uint32)]
