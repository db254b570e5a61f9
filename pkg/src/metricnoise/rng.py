"""Keyed random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from a tuple of integers, e.g. ``(seed, PURPOSE, replicate, lag)``.
Philox is counter based, so a stream depends only on its key and never on
the order in which other streams were consumed. That is what makes results
independent of how work is split across workers.
"""

from __future__ import annotations

import numpy as np

# purpose tags keep sub-streams for different jobs disjoint
DATA = 0x44415441
BOOTSTRAP = 0x424F4F54
PERMUTATION = 0x5045524D
RESAMPLE = 0x52534D50

_MASK64 = (1 << 64) - 1


def keyed_generator(*key: int) -> np.random.Generator:
    """Return a Philox generator determined entirely by ``key``.

    Keys are non-negative integers; each is reduced modulo 2**64.
    """
    words = [int(k) & _MASK64 for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
