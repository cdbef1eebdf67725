"""Sub-seed derivation: every random choice traces back to one master seed."""

import zlib

import numpy as np


def derive_seed(master: int, *keys: str | int) -> int:
    """Deterministic 32-bit seed for ``keys`` under ``master``.

    String keys are hashed with CRC-32 so the result does not depend on
    Python's per-process hash randomisation.
    """
    words = [int(master) % 2**32]
    for key in keys:
        words.append(zlib.crc32(key.encode()) if isinstance(key, str) else int(key) % 2**32)
    return int(np.random.SeedSequence(words).generate_state(1)[0])
