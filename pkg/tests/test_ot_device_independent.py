"""
Tests for device-independent Rand 1-2 OT.

Tests:
    - Honest completeness and index-set structure
    - Expected Generate-round rate
    - Correction bits and their trapdoor requirements
    - Classical devices are caught by the testing step
    - Malformed sender messages abort the run
"""
import pytest

from config.protocol import ProtocolConfig
from middleware.error_handlers import MissingTrapdoorError
from services.adversary import ClassicalDevice, ScriptedDiSender
from services.device import HonestDevice
from services.ot_device_independent import (
    HonestDiReceiver, HonestDiSender, correction_bit, expected_generate_fraction, run_device_independent_ot,
)
from services.qsim import Basis
from services.selftest import RoundTag, RoundType
from utils.rng import DeterministicRNG

C, H = Basis.COMPUTATIONAL, Basis.HADAMARD


def _run(cfg, seed, choice_bit=0, sender=None, device=None, receiver=None):
    return run_device_independent_ot(cfg, sender or HonestDiSender(), receiver or HonestDiReceiver(choice_bit),
                                     device or HonestDevice(), DeterministicRNG(seed))


# =============================================================================
# Completeness
# =============================================================================

@pytest.mark.parametrize('choice_bit', [0, 1])
def test_honest_run_succeeds(ot4_cfg, choice_bit):
    for seed in range(4):
        outcome, transcript = _run(ot4_cfg, seed, choice_bit)
        assert not outcome.aborted
        assert outcome.success
        assert transcript.derived['failures'] == 0


def test_generation_rounds_are_bell_rounds_in_I(ot4_cfg):
    outcome, transcript = _run(ot4_cfg, 9, 1)
    I = set(outcome.index_sets['I'])
    I_tilde = outcome.index_sets['I_tilde']
    assert set(I_tilde) <= I
    for i in I_tilde:
        record = transcript.records[i]
        assert record['rt'] == RoundType.BELL.value
        assert record['t'] == RoundTag.GENERATE.value
        assert record['y'] == 1
    assert sorted(outcome.index_sets['I_tilde_0'] + outcome.index_sets['I_tilde_1']) == I_tilde


def test_expected_generate_fraction():
    assert expected_generate_fraction(ProtocolConfig()) == pytest.approx(1 / 32)
    assert expected_generate_fraction(ProtocolConfig(override_probability=1.0)) == pytest.approx(1 / 16)


def test_all_test_rounds_still_complete(ot4_cfg):
    outcome, _ = _run(ot4_cfg, 2, 0, sender=ScriptedDiSender('all_test'))
    assert outcome.index_sets['I_tilde'] == []
    assert outcome.success
    assert outcome.s0 == outcome.s1 == '00'


@pytest.mark.slow
def test_completeness_acceptance():
    cfg = ProtocolConfig(n=512, domain_bits=4, l=3)
    rng = DeterministicRNG(0)
    generated = 0
    for t in range(100):
        trial = rng.child(t)
        receiver = HonestDiReceiver(trial.child('receiver', 'shared').bit())
        outcome, _ = run_device_independent_ot(cfg, HonestDiSender(), receiver, HonestDevice(), trial)
        assert not outcome.aborted
        assert outcome.success
        generated += len(outcome.index_sets['I_tilde'])
    rate = generated / (100 * cfg.n)
    assert abs(rate - 1 / 32) < 4 * (1 / 32 * 31 / 32 / (100 * cfg.n)) ** 0.5


# =============================================================================
# Corrections
# =============================================================================

def test_corrections_without_trapdoor():
    assert correction_bit('A', C, None, None, None) == 0
    assert correction_bit('B', H, None, None, None) == 0


def test_nonzero_correction_needs_trapdoor():
    with pytest.raises(MissingTrapdoorError):
        correction_bit('A', H, None, '0000', '000')
    with pytest.raises(MissingTrapdoorError):
        correction_bit('B', C, None, '0000', '000')


# =============================================================================
# Dishonest Devices and Senders
# =============================================================================

@pytest.mark.parametrize('kind', ['random_answers', 'image_honest_bell_random'])
def test_classical_device_is_rejected(kind):
    cfg = ProtocolConfig(n=256, l=2, domain_bits=3)
    for seed in range(3):
        outcome, transcript = _run(cfg, seed, device=ClassicalDevice(kind))
        assert outcome.aborted
        assert transcript.derived['failures'] / transcript.derived['tested'] > cfg.threshold


def test_malformed_challenge_type_aborts(ot4_cfg):
    outcome, _ = _run(ot4_cfg, 1, sender=ScriptedDiSender('malformed_types'))
    assert outcome.aborted
    assert outcome.reason.startswith('rejected sender message')


def test_override_coins_fix_I(small_cfg):
    coins = [1] * small_cfg.n
    outcome, transcript = _run(small_cfg, 4, receiver=HonestDiReceiver(0, override_coins=coins))
    ct_b_rounds = [r['index'] for r in transcript.records if r['ct'] == 'b']
    assert outcome.index_sets['I'] == ct_b_rounds
