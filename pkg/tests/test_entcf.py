"""
Tests for the idealized ENTCF key families and the honest device.

Tests:
    - Family follows the state basis
    - Claw inversion and injective inversion
    - Trapdoor family checks and image checks
    - Key blob serialization and key identity
    - Honest superposition and challenge responses
"""
import pytest

from middleware.error_handlers import ConfigurationError, KeyFamilyError, NotInImageError
from services.entcf import (
    ChallengeType, Family, deserialize_keypair, evaluate, hardcore_bit, honest_device_challenge,
    honest_device_prepare, honest_device_superposition, invert_claw, invert_injective, keygen,
    serialize_keypair,
)
from services.qsim import Basis, fidelity
from services.selftest import image_check, prepared_qubit
from utils.bits import from_int, inner_product, xor
from utils.rng import DeterministicRNG

M = 3


def _all_points(m):
    return [from_int(x, m) for x in range(1 << m)]


# =============================================================================
# Key Generation
# =============================================================================

def test_family_follows_basis(rng):
    assert keygen(Basis.HADAMARD, M, rng).family is Family.CLAW_FREE
    assert keygen(Basis.COMPUTATIONAL, M, rng).family is Family.INJECTIVE


@pytest.mark.parametrize('domain_bits', [1, 11])
def test_domain_bits_range(rng, domain_bits):
    with pytest.raises(ConfigurationError):
        keygen(Basis.HADAMARD, domain_bits, rng)


def test_keygen_is_deterministic():
    first = keygen(Basis.HADAMARD, M, DeterministicRNG(3))
    second = keygen(Basis.HADAMARD, M, DeterministicRNG(3))
    assert first.key.key_id == second.key.key_id
    assert evaluate(first.key, 1, '010') == evaluate(second.key, 1, '010')


# =============================================================================
# Inversion
# =============================================================================

def test_claw_inversion(rng):
    pair = keygen(Basis.HADAMARD, M, rng)
    for x in _all_points(M):
        y = evaluate(pair.key, 0, x)
        x0, x1 = invert_claw(pair.trapdoor, y)
        assert x0 == x
        assert evaluate(pair.key, 1, x1) == y


def test_injective_images_are_disjoint(rng):
    pair = keygen(Basis.COMPUTATIONAL, M, rng)
    images = [{evaluate(pair.key, b, x) for x in _all_points(M)} for b in (0, 1)]
    assert len(images[0]) == len(images[1]) == 1 << M
    assert not images[0] & images[1]


def test_injective_inversion(rng):
    pair = keygen(Basis.COMPUTATIONAL, M, rng)
    for b in (0, 1):
        for x in _all_points(M):
            assert invert_injective(pair.trapdoor, evaluate(pair.key, b, x)) == (b, x)


def test_wrong_family_trapdoor(rng):
    claw = keygen(Basis.HADAMARD, M, rng)
    injective = keygen(Basis.COMPUTATIONAL, M, rng)
    with pytest.raises(KeyFamilyError):
        invert_injective(claw.trapdoor, evaluate(claw.key, 0, '000'))
    with pytest.raises(KeyFamilyError):
        invert_claw(injective.trapdoor, evaluate(injective.key, 0, '000'))


def test_point_outside_the_claw_image(rng):
    pair = keygen(Basis.HADAMARD, M, rng)
    image = {evaluate(pair.key, 0, x) for x in _all_points(M)}
    outside = next(from_int(y, M + 1) for y in range(1 << (M + 1)) if from_int(y, M + 1) not in image)
    with pytest.raises(NotInImageError):
        invert_claw(pair.trapdoor, outside)


def test_hardcore_bit_definition(rng):
    pair = keygen(Basis.HADAMARD, M, rng)
    y = evaluate(pair.key, 0, '101')
    x0, x1 = invert_claw(pair.trapdoor, y)
    for d in _all_points(M):
        assert hardcore_bit(pair.trapdoor, y, d) == inner_product(d, xor(x0, x1))


# =============================================================================
# Serialization
# =============================================================================

def test_blob_restores_keypair(rng):
    pair = keygen(Basis.HADAMARD, M, rng)
    restored = deserialize_keypair(serialize_keypair(pair))
    assert restored.family is Family.CLAW_FREE
    assert restored.key.key_id == pair.key.key_id
    y = evaluate(pair.key, 1, '011')
    assert invert_claw(restored.trapdoor, y) == invert_claw(pair.trapdoor, y)


def test_malformed_blob():
    with pytest.raises(KeyFamilyError):
        deserialize_keypair(b'not a key')


def test_blob_with_other_family_gets_its_own_key(rng):
    pair = keygen(Basis.HADAMARD, M, rng)
    blob = bytearray(serialize_keypair(pair))
    blob[6] = Family.INJECTIVE.tag
    forged = deserialize_keypair(bytes(blob))
    assert forged.family is Family.INJECTIVE
    assert forged.key.key_id != pair.key.key_id
    for x in _all_points(M):
        x0, x1 = invert_claw(pair.trapdoor, evaluate(pair.key, 1, x))
        assert x1 == x
        assert evaluate(pair.key, 0, x0) == evaluate(pair.key, 1, x)


# =============================================================================
# Honest Device
# =============================================================================

def test_claw_free_superposition_branches(rng):
    pair = keygen(Basis.HADAMARD, M, rng)
    state = honest_device_superposition(pair.key)
    assert len(state.branches) == 1 << M
    for branch in state.branches:
        assert branch.probability == pytest.approx(2 / (1 << (M + 1)))


def test_injective_superposition_branches(rng):
    pair = keygen(Basis.COMPUTATIONAL, M, rng)
    state = honest_device_superposition(pair.key)
    assert len(state.branches) == 1 << (M + 1)


@pytest.mark.parametrize('theta', [Basis.COMPUTATIONAL, Basis.HADAMARD])
def test_challenge_a_passes_image_check(theta):
    rng = DeterministicRNG(21)
    pair = keygen(theta, M, rng)
    for i in range(10):
        samples = rng.child(i)
        c, residual = honest_device_prepare(pair.key, samples.random())
        response = honest_device_challenge(residual, ChallengeType.A, samples.samples(M + 1))
        assert response.ct is ChallengeType.A
        assert image_check(pair, c, response.z)


@pytest.mark.parametrize('theta', [Basis.COMPUTATIONAL, Basis.HADAMARD])
def test_challenge_b_leaves_predicted_qubit(theta):
    rng = DeterministicRNG(22)
    pair = keygen(theta, M, rng)
    for i in range(10):
        samples = rng.child(i)
        c, residual = honest_device_prepare(pair.key, samples.random())
        response = honest_device_challenge(residual, ChallengeType.B, samples.samples(M))
        assert len(response.d) == M
        expected = prepared_qubit(pair.trapdoor, c, response.d)
        assert fidelity(response.qubit, expected) == pytest.approx(1.0)
