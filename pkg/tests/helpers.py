from __future__ import annotations

import numpy as np


def rand_ext(tower, shape, rng):
    """Uniform F elements with the given leading shape."""
    return rng.integers(0, tower.base_order, size=tuple(shape) + (tower.Q,), dtype=np.uint8)
