"""Deterministic seed derivation for nested RNG streams."""
from __future__ import annotations

import numpy as np


def seed_tuple(base, *extra):
    """Flatten a base seed (int or tuple) plus stream indices into a tuple.

    The result feeds numpy's default_rng, giving every (seed, index...)
    combination an independent reproducible stream.
    """
    if isinstance(base, (int, np.integer)):
        parts = (int(base),)
    else:
        parts = tuple(int(x) for x in base)
    return parts + tuple(int(x) for x in extra)
