"""Named seed derivation: every random stream comes from (root seed, purpose path)."""

import hashlib

import numpy as np


def derive_seed(root: int, *purpose) -> int:
    h = hashlib.sha256(str(int(root)).encode())
    for p in purpose:
        h.update(b"/" + str(p).encode())
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(root: int, *purpose) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *purpose))
