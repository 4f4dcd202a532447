"""
Tests for Bell-pair Rand 1-2 OT.

Tests:
    - Completeness with honest parties
    - Corrected outcomes agree on matched rounds
    - Corrections and index-set helpers
    - Storage checkpoint and single-measurement rule
"""
import pytest

from config.protocol import ProtocolConfig
from middleware.error_handlers import ProtocolViolation, StorageExceeded
from services.ot_bell import (
    FixedLabelSource, HonestBellReceiver, HonestBellSender, HonestBellSource, corrected_string,
    receiver_correction, run_bell_ot, sender_correction, split_by_basis,
)
from services.qsim import Basis
from utils.rng import DeterministicRNG

C, H = Basis.COMPUTATIONAL, Basis.HADAMARD


def _honest_run(cfg, seed, choice_bit, source=None):
    return run_bell_ot(cfg, HonestBellSender(), HonestBellReceiver(choice_bit), source or HonestBellSource(),
                       DeterministicRNG(seed))


# =============================================================================
# Completeness
# =============================================================================

@pytest.mark.parametrize('choice_bit', [0, 1])
def test_honest_parties_agree(choice_bit):
    cfg = ProtocolConfig(n=64, l=4)
    for seed in range(10):
        outcome, _ = _honest_run(cfg, seed, choice_bit)
        assert not outcome.aborted
        assert outcome.success
        assert outcome.receiver_output == outcome.strings[choice_bit]
        assert len(outcome.s0) == len(outcome.s1) == 4


def test_plain_epr_source():
    outcome, transcript = _honest_run(ProtocolConfig(n=32, l=2), 3, 1, FixedLabelSource())
    assert outcome.success
    assert all(r['v_alpha'] == 0 and r['v_beta'] == 0 for r in transcript.records)


@pytest.mark.slow
def test_completeness_acceptance():
    cfg = ProtocolConfig(n=64, l=4)
    rng = DeterministicRNG(0)
    for t in range(200):
        trial = rng.child(t)
        choice_bit = trial.child('receiver', 'shared').bit()
        outcome, _ = run_bell_ot(cfg, HonestBellSender(), HonestBellReceiver(choice_bit), HonestBellSource(), trial)
        assert outcome.success


def test_matched_rounds_correlate():
    cfg = ProtocolConfig(n=48, l=2)
    _, transcript = _honest_run(cfg, 5, 0)
    w_alpha = transcript.derived['w_alpha']
    w_beta = transcript.derived['w_beta']
    for i, record in enumerate(transcript.records):
        if record['x'] == record['y']:
            assert record['a'] ^ int(w_alpha[i]) == record['b'] ^ int(w_beta[i])


def test_index_sets_partition_rounds():
    outcome, transcript = _honest_run(ProtocolConfig(n=20, l=2), 6, 1)
    I0, I1 = outcome.index_sets['I0'], outcome.index_sets['I1']
    assert sorted(I0 + I1) == list(range(20))
    assert all(transcript.records[i]['x'] == 0 for i in I0)
    assert [m.step for m in transcript.view('receiver')] == ['pairs', 'announce']


# =============================================================================
# Helpers
# =============================================================================

def test_corrections():
    assert sender_correction(H, 1) == 1
    assert sender_correction(C, 1) == 0
    assert receiver_correction(C, 1) == 1
    assert receiver_correction(H, 1) == 0


def test_split_and_correct():
    bases = [C, H, H, C]
    assert split_by_basis(range(4), bases) == ([0, 3], [1, 2])
    assert corrected_string([1, 0, 1, 1], [0, 0, 1, 1], [3, 0]) == '10'


# =============================================================================
# Storage and Measurement Rules
# =============================================================================

class _HoardingReceiver(HonestBellReceiver):
    """Claims zero storage but keeps every qubit."""

    def on_pairs(self, handles, v_beta, rng):
        self.handles = handles


def test_storage_checkpoint():
    with pytest.raises(StorageExceeded):
        run_bell_ot(ProtocolConfig(n=8, l=2), HonestBellSender(), _HoardingReceiver(0), HonestBellSource(),
                    DeterministicRNG(0))


def test_qubit_measured_once():
    sender_side, _, _ = HonestBellSource().prepare(1, DeterministicRNG(0))
    sender_side[0].measure(C, 0.2)
    with pytest.raises(ProtocolViolation):
        sender_side[0].measure(H, 0.2)


def test_choice_bit_validation():
    with pytest.raises(ValueError):
        HonestBellReceiver(2)
