"""Deterministic random streams keyed by (seed, purpose tag, index).

Every random draw in the package goes through :func:`stream`, so a trial's
randomness depends only on its own key and never on execution order.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_word(tag):
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed, tag, index=0):
    """Return an independent ``numpy.random.Generator`` for one work unit.

    Parameters
    ----------
    seed : int
        User seed (interpreted modulo 2**64).
    tag : str
        Purpose label, e.g. ``"generator"`` or ``"mean-delta/m=16"``.
    index : int
        Trial or draw index.
    """
    seed = int(seed) & _MASK64
    entropy = [seed & 0xFFFFFFFF, seed >> 32, _tag_word(tag), int(index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def child_seed(seed, tag, index=0):
    """A 63-bit integer seed derived from the same key as :func:`stream`."""
    return int(stream(seed, tag, index).integers(0, 2**63))
