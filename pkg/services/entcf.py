"""
ENTCF Toy Family Service

Functional stand-in for an extended noisy trapdoor claw-free family over an
m-bit domain. Hardness is not modelled; the interface is:

- keygen(theta) picks the family from the state basis:
  Computational → Injective, Hadamard → ClawFree
- PublicKey handles evaluate without exposing the family or the trapdoor
- trapdoor inversion for both families and the hardcore bit d·(x0⊕x1)
- the honest device's preparation and challenge steps, simulated exactly

Construction: the codomain is (m+1)-bit strings. A secret permutation Π of
the codomain, a permutation π0 of the domain and a cyclic permutation σ of
the domain are derived from three seeds.

    ClawFree:  f0(x) = Π(π0(x)),   f1(x) = Π(π0(σ(x)))
    Injective: f0(x) = Π(π0(x)),   f1(x) = Π(2^m + π0(σ(x)))

For ClawFree keys every image point y has the claw (x0, x1) with
x0 = σ(x1) ≠ x1.

Author: DIOT Lab Development Team
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from middleware.error_handlers import (
    KeyFamilyError, NotInImageError, SimulationLimitError, UnknownKeyError, ConfigurationError
)
from services.qsim import Basis, CqBranch, CqState, QuantumState, discard_qubits, measure_qubits
from utils.bits import from_int, inner_product, to_int, validate_bits, xor
from utils.cache import HandleRegistry

logger = logging.getLogger(__name__)

MIN_DOMAIN_BITS = 2
MAX_DOMAIN_BITS = 10

BLOB_MAGIC = b'ENTK'
BLOB_VERSION = 1
_BLOB_FORMAT = '>4sBBB3Q'

_key_registry = HandleRegistry('entcf-keys')


class Family(Enum):
    CLAW_FREE = 'claw_free'
    INJECTIVE = 'injective'

    @property
    def tag(self):
        return 0 if self is Family.CLAW_FREE else 1

    @classmethod
    def from_tag(cls, tag):
        return cls.CLAW_FREE if tag == 0 else cls.INJECTIVE

    @classmethod
    def for_basis(cls, theta):
        return cls.CLAW_FREE if theta is Basis.HADAMARD else cls.INJECTIVE


class ChallengeType(Enum):
    A = 'a'
    B = 'b'


def _cyclic_permutation(size, generator):
    """Sattolo's algorithm: a uniformly random single-cycle permutation."""
    items = list(range(size))
    for i in range(size - 1, 0, -1):
        j = int(generator.integers(0, i))
        items[i], items[j] = items[j], items[i]
    return np.array(items, dtype=np.int64)


class _KeyTables:
    """Forward and inverse evaluation tables of one key."""

    def __init__(self, family, domain_bits, seeds):
        self.family = family
        self.domain_bits = domain_bits
        size = 1 << domain_bits
        outer = np.random.Generator(np.random.PCG64(seeds[0])).permutation(2 * size)
        pi0 = np.random.Generator(np.random.PCG64(seeds[1])).permutation(size)
        sigma = _cyclic_permutation(size, np.random.Generator(np.random.PCG64(seeds[2])))
        shift = size if family is Family.INJECTIVE else 0
        self.forward = np.stack([outer[pi0], outer[shift + pi0[sigma]]])
        self.preimages = {}
        for b in (0, 1):
            for x in range(size):
                self.preimages.setdefault(int(self.forward[b, x]), []).append((b, x))

    def evaluate(self, b, x):
        return int(self.forward[b, x])


@dataclass(frozen=True)
class PublicKey:
    """Opaque key handle: identifier plus evaluation oracle. Carries no family tag."""

    key_id: str
    domain_bits: int

    def evaluate(self, b, x):
        return evaluate(self, b, x)


@dataclass(frozen=True)
class Trapdoor:
    key_id: str
    family: Family
    domain_bits: int
    seeds: tuple
    _tables: _KeyTables = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class EntcfKeyPair:
    key: PublicKey
    trapdoor: Trapdoor

    @property
    def family(self):
        return self.trapdoor.family

    @property
    def domain_bits(self):
        return self.key.domain_bits


def _key_id(family, domain_bits, seeds):
    digest = hashlib.blake2b(struct.pack('>BB3Q', family.tag, domain_bits, *seeds), digest_size=8)
    return digest.hexdigest()


def _build_keypair(family, domain_bits, seeds):
    seeds = tuple(int(s) for s in seeds)
    key_id = _key_id(family, domain_bits, seeds)
    tables = _key_registry.lookup(key_id)
    if tables is None:
        tables = _KeyTables(family, domain_bits, seeds)
        _key_registry.register(key_id, tables)
    trapdoor = Trapdoor(key_id, family, domain_bits, seeds, tables)
    return EntcfKeyPair(PublicKey(key_id, domain_bits), trapdoor)


def keygen(theta, domain_bits, rng):
    """
    Generate a key pair whose family follows the state basis.

    Args:
        theta: Basis (Computational → Injective, Hadamard → ClawFree)
        domain_bits: m, between 2 and 10
        rng: DeterministicRNG

    Returns:
        EntcfKeyPair
    """
    if not MIN_DOMAIN_BITS <= domain_bits <= MAX_DOMAIN_BITS:
        raise ConfigurationError(f"domain_bits must lie in [{MIN_DOMAIN_BITS}, {MAX_DOMAIN_BITS}], got {domain_bits}")
    family = Family.for_basis(theta)
    return _build_keypair(family, domain_bits, rng.seed_words(3))


def _tables_for(handle):
    key_id = handle if isinstance(handle, str) else handle.key_id
    tables = _key_registry.lookup(key_id)
    if tables is None:
        raise UnknownKeyError(f"unknown key {key_id}")
    return tables


def evaluate(key, b, x):
    """
    f_{k,b}(x).

    Args:
        key: PublicKey handle or key id
        b: bit
        x: m-bit string

    Returns:
        (m+1)-bit image string
    """
    tables = _tables_for(key)
    validate_bits(x, tables.domain_bits)
    if b not in (0, 1):
        raise ValueError(f"b must be 0 or 1, got {b!r}")
    return from_int(tables.evaluate(b, to_int(x)), tables.domain_bits + 1)


def _trapdoor_tables(trapdoor):
    tables = trapdoor._tables
    if tables is None:
        tables = _KeyTables(trapdoor.family, trapdoor.domain_bits, trapdoor.seeds)
        object.__setattr__(trapdoor, '_tables', tables)
    return tables


def _preimages(trapdoor, y):
    tables = _trapdoor_tables(trapdoor)
    validate_bits(y, tables.domain_bits + 1)
    found = tables.preimages.get(to_int(y))
    if not found:
        raise NotInImageError(f"{y} has no preimage under key {trapdoor.key_id}")
    return found


def invert_claw(trapdoor, y):
    """Claw (x0, x1) with f0(x0) = f1(x1) = y."""
    if trapdoor.family is not Family.CLAW_FREE:
        raise KeyFamilyError("invert_claw needs a ClawFree trapdoor")
    m = trapdoor.domain_bits
    found = dict(_preimages(trapdoor, y))
    if set(found) != {0, 1}:
        raise NotInImageError(f"{y} is not in the common image")
    return from_int(found[0], m), from_int(found[1], m)


def invert_injective(trapdoor, y):
    """The unique (b, x) with f_b(x) = y."""
    if trapdoor.family is not Family.INJECTIVE:
        raise KeyFamilyError("invert_injective needs an Injective trapdoor")
    (b, x), = _preimages(trapdoor, y)
    return b, from_int(x, trapdoor.domain_bits)


def hardcore_bit(trapdoor, y, d):
    """d · (x0 ⊕ x1) mod 2 for the claw of y."""
    x0, x1 = invert_claw(trapdoor, y)
    validate_bits(d, trapdoor.domain_bits)
    return inner_product(d, xor(x0, x1))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def serialize_keypair(keypair):
    """Versioned binary blob: magic, version, m, family tag, three 64-bit seeds."""
    trapdoor = keypair.trapdoor
    return struct.pack(_BLOB_FORMAT, BLOB_MAGIC, BLOB_VERSION, trapdoor.domain_bits,
                       trapdoor.family.tag, *trapdoor.seeds)


def deserialize_keypair(blob):
    """Inverse of :func:`serialize_keypair`; re-registers the evaluation tables."""
    try:
        magic, version, domain_bits, tag, *seeds = struct.unpack(_BLOB_FORMAT, bytes(blob))
    except struct.error as e:
        raise KeyFamilyError(f"malformed key blob: {e}") from e
    if magic != BLOB_MAGIC or version != BLOB_VERSION:
        raise KeyFamilyError(f"unsupported key blob (magic {magic!r}, version {version})")
    if tag not in (0, 1):
        raise KeyFamilyError(f"unknown family tag {tag}")
    return _build_keypair(Family.from_tag(tag), domain_bits, seeds)


# ---------------------------------------------------------------------------
# Honest device
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChallengeResponse:
    """CT=a carries z; CT=b carries d and the retained single qubit."""

    ct: ChallengeType
    z: str = None
    d: str = None
    qubit: QuantumState = None


def honest_device_superposition(key):
    """
    Σ_{b,x} |b⟩|x⟩|f_{k,b}(x)⟩ / √(2^{m+1}) with the image register classical.

    Only the evaluation oracle of ``key`` is used.

    Returns:
        CqState whose branch values are (y,) and whose quantum part is the
        normalized superposition over the preimages of y on m+1 qubits
    """
    m = key.domain_bits
    if m > MAX_DOMAIN_BITS:
        raise SimulationLimitError(f"m={m} is too large for exact simulation")
    groups = {}
    for b in (0, 1):
        for x in range(1 << m):
            y = evaluate(key, b, from_int(x, m))
            groups.setdefault(y, []).append((b << m) | x)
    total = 1 << (m + 1)
    branches = []
    for y in sorted(groups):
        indices = groups[y]
        vector = np.zeros(total, dtype=complex)
        vector[indices] = 1.0 / np.sqrt(len(indices))
        branches.append(CqBranch((y,), len(indices) / total, QuantumState(vector, m + 1)))
    return CqState(tuple(branches))


def honest_device_prepare(key, randomness):
    """
    Measure the image register of the honest superposition.

    Args:
        key: PublicKey
        randomness: unit-interval sample

    Returns:
        (c, residual) where residual is the collapsed (m+1)-qubit state
    """
    branch = honest_device_superposition(key).sample(randomness)
    return branch.values[0], branch.state


def honest_device_challenge(residual, ct, randomness):
    """
    Answer a challenge on the residual state.

    Args:
        residual: (m+1)-qubit state from honest_device_prepare
        ct: ChallengeType
        randomness: m+1 samples (CT=a) or m samples (CT=b)

    Returns:
        ChallengeResponse
    """
    q = residual.qubit_count
    if ct is ChallengeType.A:
        z, _ = measure_qubits(residual, list(range(q)), [Basis.COMPUTATIONAL] * q, randomness)
        return ChallengeResponse(ct, z=z)
    indices = list(range(1, q))
    bases = [Basis.HADAMARD] * (q - 1)
    d, post = measure_qubits(residual, indices, bases, randomness)
    qubit = discard_qubits(post, indices, d, bases)
    return ChallengeResponse(ct, d=d, qubit=qubit)
