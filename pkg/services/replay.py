"""
Transcript Replay Service

Recomputes every derived value of a saved transcript from its recorded
inputs and per-round data, and stops at the first field whose recomputation
differs from the recorded value.

Author: DIOT Lab Development Team
"""

import logging
from dataclasses import dataclass

from config.protocol import ProtocolConfig
from middleware.error_handlers import DiotError, ReplayMismatch, TranscriptError
from services.hashing import HashFunction, apply_hash
from services.ot_bell import corrected_string, receiver_correction, sender_correction, split_by_basis
from services.ot_device_independent import compute_corrections
from services.qsim import Basis
from services.selftest import RoundRecord, RoundTag, Verdict, classify_round, winning_check
from services.transcript import load_transcript

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplayVerdict:
    protocol: str
    fields_checked: int

    @property
    def ok(self):
        return True

    def to_dict(self):
        return {'verdict': 'ok', 'protocol': self.protocol, 'fields_checked': self.fields_checked}


class _Comparator:

    def __init__(self):
        self.count = 0

    def __call__(self, field, recorded, recomputed):
        self.count += 1
        if recorded != recomputed:
            raise ReplayMismatch(field, recorded, recomputed)


def _round_records(transcript):
    try:
        return [RoundRecord.from_dict(r) for r in transcript.records]
    except DiotError as e:
        raise TranscriptError(f"corrupted round record: {e}") from e


def _hashes(transcript):
    try:
        return HashFunction.from_dict(transcript.inputs['f0']), HashFunction.from_dict(transcript.inputs['f1'])
    except (KeyError, DiotError) as e:
        raise TranscriptError(f"transcript lacks usable hash descriptors: {e}") from e


def _replay_selftest(transcript, check):
    records = _round_records(transcript)
    for record in records:
        check(f'records[{record.index}].rt', record.rt, classify_round(record))
        check(f'records[{record.index}].w', record.w, winning_check(record, record.trapdoors()))
    passes = sum(1 for r in records if r.w is Verdict.PASS)
    check('passes', transcript.derived.get('passes'), passes)


def _replay_ot1(transcript, check):
    rows = transcript.records
    try:
        x = [Basis(r['x']) for r in rows]
        y = [Basis(r['y']) if r['y'] is not None else None for r in rows]
        a = [r['a'] for r in rows]
        b = [r['b'] for r in rows]
        w_alpha = [sender_correction(basis, r['v_alpha']) for basis, r in zip(x, rows)]
        w_beta = [receiver_correction(basis, r['v_beta']) if basis is not None else None for basis, r in zip(y, rows)]
        c = int(transcript.inputs['choice_bit'])
    except (KeyError, TypeError, ValueError) as e:
        raise TranscriptError(f"corrupted ot1 record: {e}") from e
    derived = transcript.derived
    f0, f1 = _hashes(transcript)
    check('w_alpha', derived.get('w_alpha'), ''.join(map(str, w_alpha)))
    if all(w is not None for w in w_beta):
        check('w_beta', derived.get('w_beta'), ''.join(map(str, w_beta)))
    index_sets = split_by_basis(range(len(rows)), x)
    outputs = [apply_hash(f, corrected_string(a, w_alpha, rounds)) for f, rounds in zip((f0, f1), index_sets)]
    check('s0', derived.get('s0'), outputs[0])
    check('s1', derived.get('s1'), outputs[1])
    if all(w is not None for w in w_beta) and all(v is not None for v in b):
        output = apply_hash((f0, f1)[c], corrected_string(b, w_beta, index_sets[c]))
        check('receiver_output', derived.get('receiver_output'), output)


def _replay_ot4(transcript, check):
    cfg = ProtocolConfig.from_dict(transcript.config)
    records = _round_records(transcript)
    derived = transcript.derived
    for record in records:
        check(f'records[{record.index}].rt', record.rt, classify_round(record))
    tested = [r for r in records if r.t is RoundTag.TEST and not r.in_I]
    for record in tested:
        check(f'records[{record.index}].w', record.w, winning_check(record, record.trapdoors()))
    failures = sum(1 for r in tested if r.w is Verdict.FAIL)
    check('failures', derived.get('failures'), failures)
    check('tested', derived.get('tested'), len(tested))
    aborted = len(tested) > 0 and failures / len(tested) > cfg.threshold
    check('aborted', derived.get('aborted'), aborted)
    if aborted:
        return

    I = sorted(r.index for r in records if r.in_I)
    check('I', derived.get('I'), I)
    I_tilde = [i for i in I if records[i].t is RoundTag.GENERATE]
    check('I_tilde', derived.get('I_tilde'), I_tilde)
    w_alpha = {i: compute_corrections(records[i], 'A') for i in I_tilde}
    check('w_alpha', derived.get('w_alpha'), [w_alpha[i] for i in I_tilde])
    recorded_w_beta = derived.get('w_beta') or []
    w_beta = {i: compute_corrections(records[i], 'B') for i in I_tilde}
    if None not in recorded_w_beta:
        check('w_beta', recorded_w_beta, [w_beta[i] for i in I_tilde])

    f0, f1 = _hashes(transcript)
    a = {i: records[i].a_bit for i in I_tilde}
    b = {i: records[i].b_bit for i in I_tilde}
    split = tuple([i for i in I_tilde if records[i].x is Basis(r)] for r in (0, 1))
    for r, f in enumerate((f0, f1)):
        check(f's{r}', derived.get(f's{r}'), apply_hash(f, corrected_string(a, w_alpha, split[r])))
    c = int(transcript.inputs['choice_bit'])
    if None not in b.values():
        output = apply_hash((f0, f1)[c], corrected_string(b, w_beta, split[c]))
        check('receiver_output', derived.get('receiver_output'), output)


_REPLAYERS = {
    'selftest': _replay_selftest,
    'ot1': _replay_ot1,
    'ot4': _replay_ot4,
}


def replay_transcript(path):
    """
    Replay a saved transcript.

    Args:
        path: transcript file

    Returns:
        ReplayVerdict

    Raises:
        TranscriptError: unreadable, wrong version or corrupted records
        ReplayMismatch: first divergent field
    """
    transcript = load_transcript(path)
    check = _Comparator()
    _REPLAYERS[transcript.protocol](transcript, check)
    logger.info(f"replayed {transcript.protocol} transcript {path}: {check.count} fields agree")
    return ReplayVerdict(transcript.protocol, check.count)
