from __future__ import annotations

import numpy as np


def derive_seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *(int(key) for key in keys)])


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for one task, keyed by (base seed, task indices)."""
    return np.random.default_rng(derive_seed_sequence(seed, *keys))
