"""Counter-based random streams keyed by simulation identifiers.

Every random quantity in a drop is drawn from a stream addressed by
``(seed, purpose, *ids)``.  Streams are Philox generators whose key is
derived from a :class:`numpy.random.SeedSequence`, so a stream never
depends on how many numbers other streams consumed.  This is what makes
results independent of evaluation order and of worker count.
"""

import zlib

import numpy as np

__all__ = ["stream", "purpose_tag"]


def purpose_tag(name: str) -> int:
    """Stable 32-bit integer for a purpose label (CRC32, not ``hash``)."""
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, purpose: str, *ids: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, purpose, ids)``.

    Parameters
    ----------
    seed : int
        Drop / campaign seed.
    purpose : str
        What the stream is used for (``"channel"``, ``"traffic"``, ...).
    *ids : int
        Non-negative identifiers (cell, ue, subband, ...).

    Examples
    --------
    >>> a = stream(7, "channel", 3, 12).standard_normal(2)
    >>> b = stream(7, "channel", 3, 12).standard_normal(2)
    >>> bool((a == b).all())
    True
    """
    if seed < 0 or any(i < 0 for i in ids):
        raise ValueError("seed and ids must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(purpose_tag(purpose),) + tuple(int(i) for i in ids))
    return np.random.Generator(np.random.Philox(ss))
