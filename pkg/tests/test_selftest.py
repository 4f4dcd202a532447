"""
Tests for self-test rounds and δ′ estimation.

Tests:
    - Round classification
    - Honest device passes in both verifier modes
    - Winning checks reject tampered answers and preimages
    - Trapdoor and record requirements
    - Failure-rate estimation against synthetic and honest devices
"""
import dataclasses
import math

import pytest

from config.protocol import ProtocolConfig
from middleware.error_handlers import MalformedRecordError, MissingTrapdoorError
from services.device import HonestDevice, SyntheticFailureDevice
from services.entcf import ChallengeType, keygen
from services.qsim import Basis
from services.selftest import (
    RoundChoices, RoundRecord, RoundType, Verdict, classify_round, estimate_delta, play_round,
    run_selftest_round, winning_check,
)
from utils.rng import DeterministicRNG

C, H = Basis.COMPUTATIONAL, Basis.HADAMARD


def _bell_round(cfg, basis, seed=0):
    choices = RoundChoices(H, H, ChallengeType.B, basis, basis)
    return play_round(choices, cfg, HonestDevice(), DeterministicRNG(seed))


# =============================================================================
# Classification
# =============================================================================

@pytest.mark.parametrize('theta_a,theta_b,ct,expected', [
    (H, H, ChallengeType.B, RoundType.BELL),
    (H, C, ChallengeType.B, RoundType.PRODUCT),
    (C, C, ChallengeType.B, RoundType.PRODUCT),
    (H, H, ChallengeType.A, RoundType.PRODUCT),
])
def test_classify_round(theta_a, theta_b, ct, expected):
    assert classify_round(RoundRecord(0, theta_a=theta_a, theta_b=theta_b, ct=ct)) is expected


def test_classify_needs_bases():
    with pytest.raises(MalformedRecordError):
        classify_round(RoundRecord(0, ct=ChallengeType.B))


# =============================================================================
# Honest Device
# =============================================================================

@pytest.mark.parametrize('mode', ['single_verifier', 'two_verifier'])
def test_honest_device_passes(small_cfg, mode):
    rng = DeterministicRNG(31)
    device = HonestDevice()
    for i in range(40):
        record = run_selftest_round(mode, small_cfg, device, rng.child(i), index=i)
        assert record.w is Verdict.PASS, f"round {i} ({record.rt.value}) failed"


@pytest.mark.parametrize('basis', [C, H])
def test_honest_bell_rounds_pass(small_cfg, basis):
    for seed in range(10):
        record = _bell_round(small_cfg, basis, seed)
        assert record.rt is RoundType.BELL
        assert record.w is Verdict.PASS


def _effective_ct_b(choices):
    return choices.ct_b if choices.ct_b is not None else choices.ct


def test_two_verifier_choices_for_b_follow_receiver_stream():
    def draw(sender_seed, mode='two_verifier'):
        return RoundChoices.draw(mode, DeterministicRNG(sender_seed).child('sender'),
                                 DeterministicRNG(7).child('receiver'))

    reference = draw(0)
    for seed in range(1, 16):
        choices = draw(seed)
        assert choices.two_verifier
        assert (choices.theta_b, choices.y, _effective_ct_b(choices)) == \
            (reference.theta_b, reference.y, _effective_ct_b(reference))
    assert len({draw(seed, 'single_verifier').theta_b for seed in range(16)}) == 2


def test_two_verifier_key_b_comes_from_receiver(small_cfg):
    for seed in range(5):
        record = run_selftest_round('two_verifier', small_cfg, HonestDevice(), DeterministicRNG(seed))
        key_b = keygen(record.theta_b, small_cfg.domain_bits, DeterministicRNG(seed).child('receiver', 'keys'))
        key_a = keygen(record.theta_a, small_cfg.domain_bits, DeterministicRNG(seed).child('sender', 'keys'))
        assert record.key_b.key.key_id == key_b.key.key_id
        assert record.key_a.key.key_id == key_a.key.key_id
        assert record.w is Verdict.PASS


def test_unknown_mode(small_cfg):
    with pytest.raises(ValueError):
        run_selftest_round('three_verifier', small_cfg, HonestDevice(), DeterministicRNG(0))


@pytest.mark.slow
def test_honest_device_acceptance():
    cfg = ProtocolConfig(domain_bits=4, seed=0)
    rng = DeterministicRNG(cfg.seed)
    device = HonestDevice()
    for i in range(500):
        assert run_selftest_round('single_verifier', cfg, device, rng.child(i), index=i).w is Verdict.PASS


# =============================================================================
# Winning Check
# =============================================================================

@pytest.mark.parametrize('basis', [C, H])
def test_flipped_bell_answer_fails(small_cfg, basis):
    record = _bell_round(small_cfg, basis, seed=3)
    tampered = dataclasses.replace(record, b_bit=record.b_bit ^ 1)
    assert winning_check(tampered, tampered.trapdoors()) is Verdict.FAIL


def test_wrong_preimage_fails(small_cfg):
    choices = RoundChoices(C, H, ChallengeType.A, C, C)
    record = play_round(choices, small_cfg, HonestDevice(), DeterministicRNG(4))
    assert record.w is Verdict.PASS
    flipped = record.z_a[:-1] + ('1' if record.z_a[-1] == '0' else '0')
    tampered = dataclasses.replace(record, z_a=flipped)
    assert winning_check(tampered, tampered.trapdoors()) is Verdict.FAIL


def test_bell_check_needs_trapdoor(small_cfg):
    record = _bell_round(small_cfg, C, seed=5)
    with pytest.raises(MissingTrapdoorError):
        winning_check(record, {})


def test_incomplete_record(small_cfg):
    record = _bell_round(small_cfg, H, seed=6)
    with pytest.raises(MalformedRecordError):
        winning_check(dataclasses.replace(record, d_b=None), record.trapdoors())


def test_record_survives_serialization(small_cfg):
    record = _bell_round(small_cfg, H, seed=8)
    restored = RoundRecord.from_dict(record.to_dict())
    assert restored.to_dict() == record.to_dict()
    assert winning_check(restored, restored.trapdoors()) is record.w


# =============================================================================
# Estimation
# =============================================================================

def test_estimate_against_synthetic_device():
    cfg = ProtocolConfig(tau=0.05, n_estimation=2000)
    estimate = estimate_delta(SyntheticFailureDevice(0.2), cfg.n_estimation, cfg, DeterministicRNG(12))
    assert abs(estimate.delta_prime - 0.2) < cfg.tau
    assert estimate.rounds == 2000
    assert estimate.confidence == pytest.approx(1 - 2 * math.exp(-0.0025 * 2000 / 3))


def test_estimate_for_honest_device(small_cfg):
    estimate = estimate_delta(HonestDevice(), 20, small_cfg, DeterministicRNG(13))
    assert estimate.failures == 0
    assert estimate.delta_prime == 0.0


def test_estimate_needs_rounds(small_cfg):
    with pytest.raises(ValueError):
        estimate_delta(HonestDevice(), 0, small_cfg, DeterministicRNG(0))
