"""
Deterministic, splittable randomness for reproducible simulations.

Every probabilistic operation in the stack draws unit-interval samples from
a DeterministicRNG. Substreams are derived from (seed, keys) through
numpy's SeedSequence, so a run's trial t, round i and role r always see the
same numbers no matter which worker executes them or in which order.
"""

import numpy as np

# Stable integer tags for role substreams
ROLE_TAGS = {
    'sender': 1,
    'receiver': 2,
    'device': 3,
    'device_a': 4,
    'device_b': 5,
    'shared': 6,
    'hash': 7,
    'keys': 8,
    'tags': 9,
}


def _key(part):
    if isinstance(part, str):
        if part not in ROLE_TAGS:
            raise ValueError(f"unknown substream role '{part}'")
        return ROLE_TAGS[part]
    return int(part)


class DeterministicRNG:
    """Seeded numpy Generator wrapper with keyed child substreams."""

    def __init__(self, seed=0, spawn_key=()):
        self._seed = int(seed)
        self._spawn_key = tuple(int(k) for k in spawn_key)
        sequence = np.random.SeedSequence(entropy=self._seed, spawn_key=self._spawn_key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    @property
    def seed(self):
        return self._seed

    @property
    def spawn_key(self):
        return self._spawn_key

    def child(self, *keys):
        """Independent substream for (seed, this stream's key, keys)."""
        return DeterministicRNG(self._seed, self._spawn_key + tuple(_key(k) for k in keys))

    def random(self):
        """One unit-interval sample in [0, 1)."""
        return float(self._generator.random())

    def samples(self, count):
        return [float(v) for v in self._generator.random(count)]

    def uniform_array(self, count):
        return self._generator.random(count)

    def bit(self):
        return int(self._generator.integers(0, 2))

    def bits(self, count):
        """Uniform bit string of the given length."""
        return ''.join(str(int(v)) for v in self._generator.integers(0, 2, size=count))

    def bernoulli(self, probability):
        return self.random() < probability

    def seed_words(self, count):
        """Fresh 63-bit integers for seeding derived generators."""
        return [int(v) for v in self._generator.integers(0, 2 ** 63 - 1, size=count, dtype=np.int64)]

    def normal(self, size):
        return self._generator.normal(size=size)

    def binary_matrix(self, rows, cols):
        return self._generator.integers(0, 2, size=(rows, cols), dtype=np.uint8)

    def permutation(self, size):
        return self._generator.permutation(size)
