"""Named, counter-based random substreams derived from one master seed."""
import zlib

import numpy as np


def _key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, *names) -> np.random.Generator:
    """Independent Philox generator for ``(seed, *names)``.

    The same seed and names always give the same stream, regardless of how
    many other streams were created before it.
    """
    key = tuple(_key(str(n)) for n in names)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def seed_of(seed: int, *names) -> int:
    """A 63-bit integer seed for ``(seed, *names)``."""
    key = tuple(_key(str(n)) for n in names)
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=key).generate_state(1, np.uint64)[0] >> 1)
