"""
Tests for transcript persistence and replay.

Tests:
    - Fresh honest transcripts replay cleanly
    - A flipped outcome bit is reported at the first divergent field
    - A cleared Test-round verdict is still checked
    - Truncated, unversioned and corrupted files are rejected
"""
import json

import pytest

from config.protocol import ProtocolConfig
from middleware.error_handlers import ReplayMismatch, TranscriptError
from services.adversary import ClassicalDevice
from services.device import HonestDevice
from services.hashing import HashFunction
from services.ot_bell import HonestBellReceiver, HonestBellSender, HonestBellSource, run_bell_ot
from services.ot_device_independent import HonestDiReceiver, HonestDiSender, run_device_independent_ot
from services.replay import replay_transcript
from services.selftest import run_selftest_round
from services.transcript import TRANSCRIPT_VERSION, Transcript, load_transcript, save_transcript
from utils.file_utils import canonical_json, read_json, write_atomic
from utils.rng import DeterministicRNG


@pytest.fixture
def ot1_path(tmp_path):
    _, transcript = run_bell_ot(ProtocolConfig(n=64, l=4), HonestBellSender(), HonestBellReceiver(1),
                                HonestBellSource(), DeterministicRNG(8))
    path = tmp_path / 'ot1.json'
    save_transcript(transcript, str(path))
    return path


def _rewrite(path, document):
    write_atomic(str(path), canonical_json(document))


# =============================================================================
# Honest Transcripts
# =============================================================================

def test_ot1_replays(ot1_path):
    verdict = replay_transcript(str(ot1_path))
    assert verdict.protocol == 'ot1'
    assert verdict.fields_checked >= 4
    assert verdict.to_dict()['verdict'] == 'ok'


def test_ot4_replays(tmp_path, ot4_cfg):
    _, transcript = run_device_independent_ot(ot4_cfg, HonestDiSender(), HonestDiReceiver(0), HonestDevice(),
                                              DeterministicRNG(3))
    path = tmp_path / 'ot4.json'
    save_transcript(transcript, str(path))
    assert replay_transcript(str(path)).protocol == 'ot4'


def test_selftest_replays(tmp_path, small_cfg):
    record = run_selftest_round('single_verifier', small_cfg, HonestDevice(), DeterministicRNG(2))
    transcript = Transcript('selftest', small_cfg.to_dict(), records=[record.to_dict()],
                            derived={'passes': 1})
    path = tmp_path / 'selftest.json'
    save_transcript(transcript, str(path))
    assert replay_transcript(str(path)).fields_checked == 3


def test_saved_transcript_loads_back(ot1_path):
    transcript = load_transcript(str(ot1_path))
    assert transcript.protocol == 'ot1'
    assert len(transcript.records) == 64


# =============================================================================
# Tampered Transcripts
# =============================================================================

def test_flipped_outcome_bit(ot1_path):
    document = read_json(str(ot1_path))
    records = document['records']
    f1 = HashFunction.from_dict(document['inputs']['f1'])
    rounds = [i for i, r in enumerate(records) if r['x'] == 1]
    position = next(k for k in range(len(rounds)) if f1.matrix[k].any())
    records[rounds[position]]['a'] ^= 1
    _rewrite(ot1_path, document)
    with pytest.raises(ReplayMismatch) as excinfo:
        replay_transcript(str(ot1_path))
    assert excinfo.value.field == 's1'


def test_edited_round_type(tmp_path, small_cfg):
    record = run_selftest_round('single_verifier', small_cfg, HonestDevice(), DeterministicRNG(2))
    row = record.to_dict()
    row['rt'] = 'product' if row['rt'] == 'bell' else 'bell'
    path = tmp_path / 'selftest.json'
    save_transcript(Transcript('selftest', small_cfg.to_dict(), records=[row], derived={'passes': 1}), str(path))
    with pytest.raises(ReplayMismatch) as excinfo:
        replay_transcript(str(path))
    assert excinfo.value.field == 'records[0].rt'


def test_cleared_test_verdict(tmp_path):
    cfg = ProtocolConfig(n=256, l=2, domain_bits=3)
    _, transcript = run_device_independent_ot(cfg, HonestDiSender(), HonestDiReceiver(0),
                                              ClassicalDevice('random_answers'), DeterministicRNG(0))
    path = tmp_path / 'ot4.json'
    save_transcript(transcript, str(path))
    document = read_json(str(path))
    row = next(r for r in document['records'] if r['t'] == 'test' and not r['in_I'] and r['w'] == 'fail')
    row['w'] = None
    document['derived']['failures'] -= 1
    document['derived']['tested'] -= 1
    _rewrite(path, document)
    with pytest.raises(ReplayMismatch) as excinfo:
        replay_transcript(str(path))
    assert excinfo.value.field == f"records[{row['index']}].w"


def test_truncated_file(ot1_path):
    text = ot1_path.read_text(encoding='utf-8')
    ot1_path.write_text(text[:len(text) // 2], encoding='utf-8')
    with pytest.raises(TranscriptError):
        replay_transcript(str(ot1_path))


def test_unknown_version(ot1_path):
    document = json.loads(ot1_path.read_text(encoding='utf-8'))
    document['version'] = TRANSCRIPT_VERSION + 1
    _rewrite(ot1_path, document)
    with pytest.raises(TranscriptError):
        replay_transcript(str(ot1_path))


def test_missing_file(tmp_path):
    with pytest.raises(TranscriptError):
        replay_transcript(str(tmp_path / 'absent.json'))


def test_missing_hash_descriptor(ot1_path):
    document = read_json(str(ot1_path))
    del document['inputs']['f0']
    _rewrite(ot1_path, document)
    with pytest.raises(TranscriptError):
        replay_transcript(str(ot1_path))
