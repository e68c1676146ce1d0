"""Process-stable pseudo-random generators.

`random.Random(x)` seeds through `hash(x)`, and string hashes change from
process to process, so seeding with a label tuple silently breaks
reproducibility.  All generators here derive their state by hashing the
printed key instead, which is stable everywhere.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*key):
    return int.from_bytes(
        hashlib.sha256(repr(key).encode("utf-8")).digest()[:8], "big")


def derive_rng(*key):
    return random.Random(derive_seed(*key))
