"""Named-stream seed derivation.

Every random stage gets its own generator derived from one master seed plus a
stream name and an index, so stages can be re-run in isolation and trials can
be scheduled in any order without changing results.
"""
import zlib

import numpy as np


def derive_seed(master: int, stream: str = "", index: int = 0) -> int:
    tag = zlib.crc32(stream.encode("utf-8"))
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, tag, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(master: int, stream: str = "", index: int = 0) -> np.random.Generator:
    tag = zlib.crc32(stream.encode("utf-8"))
    return np.random.default_rng([int(master) & 0xFFFFFFFFFFFFFFFF, tag, int(index)])
