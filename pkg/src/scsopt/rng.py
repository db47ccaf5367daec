"""Deterministic random-stream derivation.

Every consumer of randomness derives its own generator from a master seed
plus a structured key, so sample sets that the algorithms require to be
mutually independent (growth sets, replication test sets, baseline batches,
held-out evaluation sets) come from provably separate streams while staying
bit-reproducible for a given seed.
"""

import numpy as np

_TAGS = {
    "sample": 0,
    "grow": 1,
    "test_set": 2,
    "batch": 3,
    "eval": 4,
    "pilot": 5,
    "replication": 6,
}


def _key_ints(key):
    out = []
    for part in key:
        if isinstance(part, str):
            out.append(_TAGS[part])
        else:
            out.append(int(part))
    return tuple(out)


def substream(seed, *key):
    """Generator for the stream identified by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_key_ints(key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *key):
    """A 63-bit integer seed derived deterministically from ``seed`` and ``key``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_key_ints(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
