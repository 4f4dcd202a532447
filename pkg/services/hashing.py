"""
Two-Universal Hashing Service

Random binary-matrix hashing {0,1}^n → {0,1}^ℓ over GF(2):
f(x) = x · M mod 2 with M a uniformly random n×ℓ matrix. Inputs shorter
than n are zero-padded on the right.

Author: DIOT Lab Development Team
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from middleware.error_handlers import HashDomainError
from utils import gf2
from utils.bits import pad_right, validate_bits

logger = logging.getLogger(__name__)

# Exhaustive enumeration is offered up to this many matrix bits
MAX_EXHAUSTIVE_BITS = 16


@dataclass(frozen=True, eq=False)
class HashFunction:
    """Member of the random-matrix family; ``matrix`` has shape (input_bits, output_bits)."""

    input_bits: int
    output_bits: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = gf2.as_gf2(self.matrix)
        if matrix.shape != (self.input_bits, self.output_bits):
            raise HashDomainError(f"descriptor shape {matrix.shape} != ({self.input_bits}, {self.output_bits})")
        object.__setattr__(self, 'matrix', matrix)

    def __call__(self, bits):
        return apply_hash(self, bits)

    def to_dict(self):
        return {
            'input_bits': self.input_bits,
            'output_bits': self.output_bits,
            'matrix': gf2.pack_rows(self.matrix),
        }

    @classmethod
    def from_dict(cls, document):
        try:
            n = int(document['input_bits'])
            l = int(document['output_bits'])
            matrix = gf2.unpack_rows(document['matrix'], n, l)
        except (KeyError, TypeError, ValueError) as e:
            raise HashDomainError(f"malformed hash descriptor: {e}") from e
        return cls(n, l, matrix)

    def __eq__(self, other):
        return (isinstance(other, HashFunction)
                and self.input_bits == other.input_bits
                and self.output_bits == other.output_bits
                and np.array_equal(self.matrix, other.matrix))

    __hash__ = None


def _check_lengths(n, l):
    if n < 1 or l < 1:
        raise HashDomainError(f"hash lengths must be positive, got n={n}, l={l}")
    if l > n:
        raise HashDomainError(f"output length {l} exceeds input length {n}")


def sample_hash(n, l, rng):
    """Uniform member of the family, deterministic given the stream."""
    _check_lengths(n, l)
    return HashFunction(n, l, rng.binary_matrix(n, l))


def apply_hash(f, bits):
    """
    Evaluate a hash function.

    Args:
        f: HashFunction
        bits: bit string of length ≤ f.input_bits

    Returns:
        ℓ-bit string
    """
    validate_bits(bits)
    if len(bits) > f.input_bits:
        raise HashDomainError(f"input of {len(bits)} bits exceeds {f.input_bits}")
    padded = pad_right(bits, f.input_bits)
    vector = np.frombuffer(padded.encode('ascii'), dtype=np.uint8) - ord('0')
    out = gf2.matmul(vector.reshape(1, -1), f.matrix).reshape(-1)
    return ''.join(str(int(v)) for v in out)


def enumerate_family(n, l, full_rank_only=False):
    """
    Every member of the family with equal weight.

    Args:
        n: input bits
        l: output bits
        full_rank_only: keep only rank-ℓ matrices

    Yields:
        HashFunction
    """
    _check_lengths(n, l)
    if n * l > MAX_EXHAUSTIVE_BITS:
        raise HashDomainError(f"family with {n * l} matrix bits is too large to enumerate")
    for entries in itertools.product((0, 1), repeat=n * l):
        matrix = np.array(entries, dtype=np.uint8).reshape(n, l)
        if full_rank_only and gf2.rank(matrix) < l:
            continue
        yield HashFunction(n, l, matrix)


def sample_family(n, l, rng, count):
    """``count`` independent uniform members."""
    return [sample_hash(n, l, rng) for _ in range(count)]
