"""Deterministic sub-seed derivation.

Every random choice in the package draws from a ``random.Random`` seeded by
``derive_seed(run_seed, *labels)`` so results never depend on execution order
or on how many workers ran them.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *labels: object) -> int:
    h = hashlib.sha256(str(int(seed)).encode("ascii"))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(seed: int, *labels: object) -> random.Random:
    return random.Random(derive_seed(seed, *labels))
