"""
Seeded random streams.

Every stream is a Philox generator keyed by the master seed and a spawn
key, so a stream is a pure function of `(seed, *key)` and independent of
how work is split across processes.
"""
import numpy as np

# Spawn-key namespaces.
DISORDER = 1
CHAIN = 2
MICROCANONICAL = 3
LIMIT = 4
PATH = 5
REPLICA = 6
STAGE = 7


def generator(seed, *key):
    """
    Return the generator for `seed` and the integer spawn key `key`.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(sequence))


def child_seed(seed, *key):
    """
    Derive a 64-bit seed for a sub-stage from `seed` and `key`.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
