"""
Device-Independent Oblivious Transfer Service

Randomized 1-out-of-2 string OT on an untrusted two-component device, with
the sender acting as the only verifier:
- data generation: n single-verifier self-test rounds; on CT=b rounds the
  receiver may ignore the sender's basis question and use its choice basis
  (the set I of such rounds)
- round types and Test/Generate tags
- testing: the receiver publishes I and its data for Test rounds outside I;
  the sender aborts when the failed fraction exceeds the threshold δ′−τ
- preparing data: Ĩ = I ∩ Generate, with the receiver's trapdoors for Ĩ
- output: corrections, hashing, s0/s1 for the sender and s_c for the receiver

Author: DIOT Lab Development Team
"""

import logging
from dataclasses import dataclass, field

from middleware.error_handlers import MalformedRecordError, MissingTrapdoorError, ProtocolViolation
from services.device import DeviceLink, open_ports
from services.entcf import ChallengeType, PublicKey, deserialize_keypair, hardcore_bit, keygen, serialize_keypair
from services.hashing import apply_hash, sample_hash
from services.ot_bell import Announcement, OtOutcome, corrected_string, receiver_correction, sender_correction
from services.qsim import Basis
from services.selftest import RoundChoices, RoundRecord, RoundTag, RoundType, Verdict, classify_round, winning_check
from services.transcript import Transcript
from utils.bits import decode_hex, encode_hex

logger = logging.getLogger(__name__)


def expected_generate_fraction(cfg):
    """
    P(i ∈ Ĩ) for honest parties.

    CT=b (½) · both state bases Hadamard (¼) · receiver override · Generate tag (½).
    """
    return 0.5 * 0.25 * cfg.override_probability * 0.5


def correction_bit(side, basis, trapdoor, c, d):
    """
    Correction bit of one Bell round.

    Args:
        side: 'A' (sender, w^α) or 'B' (receiver, w^β)
        basis: the basis that side measured in
        trapdoor: that side's Trapdoor, only needed when the correction is nonzero
        c: that side's commitment
        d: that side's CT=b response

    Returns:
        0 or 1
    """
    needs_bit = (basis is Basis.HADAMARD) if side == 'A' else (basis is Basis.COMPUTATIONAL)
    if not needs_bit:
        return 0
    if trapdoor is None:
        raise MissingTrapdoorError(f"side {side} correction needs a trapdoor")
    if c is None or d is None:
        raise MalformedRecordError(f"side {side} correction needs the commitment and d")
    v = hardcore_bit(trapdoor, c, d)
    return sender_correction(basis, v) if side == 'A' else receiver_correction(basis, v)


def compute_corrections(record, side, trapdoor=None):
    """
    w^α (side 'A') or w^β (side 'B') for a Bell round.

    The trapdoor defaults to the one stored with the round's key pair.
    """
    if side not in ('A', 'B'):
        raise ValueError(f"unknown side '{side}'")
    if record.rt is not None and record.rt is not RoundType.BELL:
        raise MalformedRecordError(f"round {record.index} is not a Bell round")
    if side == 'A':
        keypair, basis, c, d = record.key_a, record.x, record.c_a, record.d_a
    else:
        keypair, basis, c, d = record.key_b, record.y, record.c_b, record.d_b
    if basis is None:
        raise MalformedRecordError(f"round {record.index}: side {side} has no measurement basis")
    if trapdoor is None and keypair is not None:
        trapdoor = keypair.trapdoor
    return correction_bit(side, basis, trapdoor, c, d)


def _bits_of(flags):
    return encode_hex(''.join('1' if f else '0' for f in flags)) if flags else None


@dataclass
class ReceiverRound:
    """What the receiver keeps from one round."""

    index: int
    key_b: PublicKey = None
    c_b: str = None
    ct: ChallengeType = None
    z_b: str = None
    d_b: str = None
    y_question: Basis = None
    y: Basis = None
    b_bit: int = None
    h_b: int = None
    in_I: bool = False

    def published(self):
        """Data the receiver hands over for a Test round."""
        entry = {'index': self.index, 'c_b': encode_hex(self.c_b)}
        if self.ct is ChallengeType.A:
            entry['z_b'] = encode_hex(self.z_b)
        else:
            entry.update({'d_b': encode_hex(self.d_b), 'y': int(self.y), 'b': self.b_bit, 'h_b': self.h_b})
        return entry


@dataclass(frozen=True)
class Generation:
    """Published set Ĩ and the receiver trapdoor blobs for it."""

    rounds: tuple
    trapdoors: dict = field(default_factory=dict)

    def to_payload(self):
        return {'I_tilde': list(self.rounds),
                'trapdoors': {str(i): blob for i, blob in sorted(self.trapdoors.items())}}


# ---------------------------------------------------------------------------
# Honest parties
# ---------------------------------------------------------------------------

class HonestDiSender:
    """The sender: Alice of every self-test round and the only verifier."""

    name = 'honest'

    def __init__(self, publish_trapdoors=True):
        self.publish_trapdoors = publish_trapdoors
        self.outputs = None
        self.w_alpha = {}

    def round_choices(self, index, rng):
        return RoundChoices.draw('single_verifier', rng, rng)

    def keys(self, choices, cfg, rng):
        return keygen(choices.theta_a, cfg.domain_bits, rng), keygen(choices.theta_b, cfg.domain_bits, rng)

    def assign_tags(self, round_types, rng):
        return [RoundTag.GENERATE if rt is RoundType.BELL and rng.bit() else RoundTag.TEST for rt in round_types]

    def check_tests(self, records, published):
        """W_i for every published Test round; returns {index: Verdict}."""
        verdicts = {}
        for entry in published:
            record = records[entry['index']]
            verdicts[record.index] = winning_check(record, record.trapdoors())
        return verdicts

    def select_generation(self, records, tags, I):
        rounds = tuple(i for i in sorted(I) if tags[i] is RoundTag.GENERATE)
        trapdoors = {}
        if self.publish_trapdoors:
            trapdoors = {i: serialize_keypair(records[i].key_b).hex() for i in rounds}
        return Generation(rounds, trapdoors)

    def announce(self, records, generation, l, rng):
        hash_rng = rng.child('hash')
        length = max(len(generation.rounds), l)
        f0, f1 = sample_hash(length, l, hash_rng), sample_hash(length, l, hash_rng)
        a = {i: records[i].a_bit for i in generation.rounds}
        w_alpha = {i: compute_corrections(records[i], 'A') for i in generation.rounds}
        bases = {i: records[i].x for i in generation.rounds}
        split = tuple([i for i in generation.rounds if bases[i] is Basis(r)] for r in (0, 1))
        self.outputs = tuple(apply_hash(f, corrected_string(a, w_alpha, rounds))
                             for f, rounds in zip((f0, f1), split))
        self.w_alpha = w_alpha
        return Announcement(bases, f0, f1)


class HonestDiReceiver:
    """
    The receiver: relays for its component and, on CT=b rounds, overrides the
    sender's question with its choice basis with the configured probability.
    ``override_coins`` fixes those coins per round index.
    """

    name = 'honest'

    def __init__(self, choice_bit, override_coins=None):
        if choice_bit not in (0, 1):
            raise ValueError(f"choice bit must be 0 or 1, got {choice_bit!r}")
        self.choice_bit = choice_bit
        self.override_coins = override_coins
        self.rounds = {}
        self.w_beta = {}

    def _override(self, index, cfg, rng):
        if self.override_coins is not None:
            return bool(self.override_coins[index])
        return rng.bernoulli(cfg.override_probability)

    def on_question(self, state, port_b, cfg, rng):
        """
        Answer or hold a CT=b round.

        Returns:
            (basis asked, (b, h)) or (basis, None) when the answer is postponed
        """
        state.in_I = self._override(state.index, cfg, rng)
        state.y = Basis(self.choice_bit) if state.in_I else state.y_question
        state.b_bit, state.h_b = port_b.answer(state.y)
        return state.y, (state.b_bit, state.h_b)

    def index_set(self):
        return sorted(i for i, state in self.rounds.items() if state.in_I)

    def test_data(self, tags):
        return [self.rounds[i].published() for i in sorted(self.rounds)
                if tags[i] is RoundTag.TEST and not self.rounds[i].in_I]

    def _corrections(self, generation, basis_of):
        w_beta = {}
        for i in generation.rounds:
            state = self.rounds[i]
            blob = generation.trapdoors.get(i)
            trapdoor = deserialize_keypair(bytes.fromhex(blob)).trapdoor if blob else None
            w_beta[i] = correction_bit('B', basis_of(i), trapdoor, state.c_b, state.d_b)
        return w_beta

    def on_announcement(self, announcement, generation, rng):
        self.w_beta = self._corrections(generation, lambda i: self.rounds[i].y)
        rounds = [i for i in generation.rounds if announcement.bases[i] is Basis(self.choice_bit)]
        b = {i: self.rounds[i].b_bit for i in generation.rounds}
        return apply_hash(announcement.hashes()[self.choice_bit], corrected_string(b, self.w_beta, rounds))


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _validate_choices(choices, index):
    if not isinstance(choices.ct, ChallengeType):
        raise ProtocolViolation(f"round {index}: challenge type {choices.ct!r} is not a or b")
    for name in ('theta_a', 'theta_b', 'x', 'y'):
        if not isinstance(getattr(choices, name), Basis):
            raise ProtocolViolation(f"round {index}: {name} {getattr(choices, name)!r} is not a basis")


def _validate_tags(tags, n):
    if len(tags) != n or not all(isinstance(t, RoundTag) for t in tags):
        raise ProtocolViolation("tag vector is malformed")


def _play_round(index, cfg, sender, receiver, device, rng, link, transcript):
    """Data generation for one round; returns the simulator's full RoundRecord."""
    sender_rng = rng.child('sender', index)
    choices = sender.round_choices(index, sender_rng)
    _validate_choices(choices, index)
    key_a, key_b = sender.keys(choices, cfg, sender_rng.child('keys'))
    record = RoundRecord(index, theta_a=choices.theta_a, theta_b=choices.theta_b, key_a=key_a, key_b=key_b,
                         ct=choices.ct)
    state = ReceiverRound(index, key_b=key_b.key, ct=choices.ct)
    receiver.rounds[index] = state
    port_a, port_b = open_ports(device, index, rng.child('device', index), link, cfg.domain_bits)

    transcript.send('key', 'sender', 'device_a', {'key_id': key_a.key.key_id}, index)
    record.c_a = port_a.commit(key_a.key)
    transcript.send('commit', 'device_a', 'sender', {'c': encode_hex(record.c_a)}, index)
    transcript.send('key', 'sender', 'receiver', {'key_id': key_b.key.key_id}, index)
    transcript.send('key', 'receiver', 'device_b', {'key_id': key_b.key.key_id}, index)
    record.c_b = state.c_b = port_b.commit(key_b.key)
    transcript.send('commit', 'device_b', 'receiver', {'c': encode_hex(record.c_b)}, index)

    transcript.send('challenge', 'sender', 'device_a', {'ct': record.ct.value}, index)
    transcript.send('challenge', 'sender', 'receiver', {'ct': record.ct.value}, index)
    transcript.send('challenge', 'receiver', 'device_b', {'ct': record.ct.value}, index)
    response_a, response_b = port_a.challenge(record.ct), port_b.challenge(record.ct)
    transcript.send('response', 'device_a', 'sender', {'r': encode_hex(response_a)}, index)
    transcript.send('response', 'device_b', 'receiver', {'r': encode_hex(response_b)}, index)
    if record.ct is ChallengeType.A:
        record.z_a, record.z_b = response_a, response_b
        state.z_b = response_b
        return record, None

    record.d_a, record.d_b = response_a, response_b
    state.d_b = response_b
    record.x = choices.x
    transcript.send('question', 'sender', 'device_a', {'basis': int(record.x)}, index)
    record.a_bit, record.h_a = port_a.answer(record.x)
    transcript.send('answer', 'device_a', 'sender', {'a': record.a_bit, 'h': record.h_a}, index)

    state.y_question = record.y_question = choices.y
    transcript.send('question', 'sender', 'receiver', {'basis': int(choices.y)}, index)
    y, answer = receiver.on_question(state, port_b, cfg, rng.child('receiver', index))
    record.in_I = state.in_I
    if answer is not None:
        record.y = y
        record.b_bit, record.h_b = answer
        transcript.send('question', 'receiver', 'device_b', {'basis': int(y)}, index)
        transcript.send('answer', 'device_b', 'receiver', {'b': answer[0], 'h': answer[1]}, index)
    return record, port_b


def _published_record(record, entry):
    """The sender's view of a Test round: its own data plus what the receiver published."""
    try:
        view = RoundRecord(record.index, theta_a=record.theta_a, theta_b=record.theta_b, key_a=record.key_a,
                           key_b=record.key_b, c_a=record.c_a, ct=record.ct, z_a=record.z_a, d_a=record.d_a,
                           x=record.x, a_bit=record.a_bit, h_a=record.h_a)
        view.c_b = decode_hex(entry['c_b'])
        if record.ct is ChallengeType.A:
            view.z_b = decode_hex(entry['z_b'])
        else:
            view.d_b = decode_hex(entry['d_b'])
            view.y = Basis(entry['y'])
            view.b_bit, view.h_b = entry['b'], entry['h_b']
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolViolation(f"round {record.index}: malformed published test data: {e}") from e
    view.rt = classify_round(view)
    return view


def run_device_independent_ot(cfg, sender, receiver, device, rng, link=None):
    """
    Execute one run of device-independent Rand 1-2 OT.

    Args:
        cfg: ProtocolConfig (n, ℓ, m, threshold, override probability)
        sender: HonestDiSender or a subclass
        receiver: HonestDiReceiver or a subclass
        device: DeviceStrategy
        rng: DeterministicRNG for the run
        link: DeviceLink for component traffic (fresh if omitted)

    Returns:
        (OtOutcome, Transcript)
    """
    if cfg.require_security_relations:
        cfg.check_relations()
    link = link if link is not None else DeviceLink()
    transcript = Transcript('ot4', cfg.to_dict())
    transcript.inputs = {'choice_bit': receiver.choice_bit}
    records = []
    held = set()

    try:
        for i in range(cfg.n):
            record, port_b = _play_round(i, cfg, sender, receiver, device, rng, link, transcript)
            records.append(record)
            if port_b is not None and record.b_bit is None:
                held.add(i)
        round_types = [classify_round(r) for r in records]
        for record, rt in zip(records, round_types):
            record.rt = rt

        tags = sender.assign_tags(round_types, rng.child('sender', 'tags'))
        _validate_tags(tags, cfg.n)
        for record, tag in zip(records, tags):
            record.t = tag
        transcript.send('tags', 'sender', 'receiver', {'generate': _bits_of([t is RoundTag.GENERATE for t in tags])})
    except ProtocolViolation as e:
        return _abort(transcript, records, receiver, f"rejected sender message: {e}")

    I = receiver.index_set()
    transcript.send('index_set', 'receiver', 'sender', {'I': I})
    published = receiver.test_data(tags)
    transcript.send('test_data', 'receiver', 'sender', {'rounds': published})

    verified = {e['index']: _published_record(records[e['index']], e) for e in published}
    verdicts = sender.check_tests(verified, published)
    for index, verdict in verdicts.items():
        records[index].w = verdict
    failures = sum(1 for v in verdicts.values() if v is Verdict.FAIL)
    tested = len(verdicts)
    aborted = tested > 0 and failures / tested > cfg.threshold
    transcript.send('verdict', 'sender', 'receiver', {'failures': failures, 'tested': tested, 'aborted': aborted})
    logger.info(f"ot4 testing: {failures}/{tested} failed, threshold {cfg.threshold}, aborted={aborted}")
    if aborted:
        return _abort(transcript, records, receiver, f"failed fraction {failures}/{tested} above threshold",
                      I=I, failures=failures, tested=tested)

    generation = sender.select_generation(records, tags, I)
    if not set(generation.rounds) <= set(I):
        raise ProtocolViolation("published Ĩ is not a subset of I")
    transcript.send('generation', 'sender', 'receiver', generation.to_payload())
    logger.info(f"ot4 generation rounds |Ĩ|={len(generation.rounds)} of n={cfg.n}")

    announcement = sender.announce(records, generation, cfg.l, rng.child('sender'))
    transcript.send('announce', 'sender', 'receiver', announcement.to_payload())
    receiver_output = receiver.on_announcement(announcement, generation, rng.child('receiver'))
    for i in sorted(held):
        state = receiver.rounds[i]
        if state.b_bit is not None:
            records[i].y, records[i].b_bit, records[i].h_b = state.y, state.b_bit, state.h_b

    split = tuple([i for i in generation.rounds if announcement.bases[i] is Basis(r)] for r in (0, 1))
    s0, s1 = sender.outputs
    outcome = OtOutcome(False, receiver.choice_bit, s0, s1, receiver_output, {
        'I': I, 'I_tilde': list(generation.rounds), 'I_tilde_0': split[0], 'I_tilde_1': split[1],
    })
    transcript.records = [r.to_dict() for r in records]
    transcript.inputs.update({'f0': announcement.f0.to_dict(), 'f1': announcement.f1.to_dict()})
    transcript.derived = {
        'failures': failures,
        'tested': tested,
        'aborted': False,
        'I': I,
        'I_tilde': list(generation.rounds),
        'w_alpha': [sender.w_alpha[i] for i in generation.rounds],
        'w_beta': [receiver.w_beta.get(i) for i in generation.rounds],
        's0': s0,
        's1': s1,
        'receiver_output': receiver_output,
    }
    return outcome, transcript


def _abort(transcript, records, receiver, reason, I=None, failures=None, tested=None):
    logger.info(f"ot4 aborted: {reason}")
    transcript.records = [r.to_dict() for r in records]
    transcript.derived = {'failures': failures, 'tested': tested, 'aborted': True, 'I': I}
    outcome = OtOutcome(True, receiver.choice_bit, index_sets={'I': I or []}, reason=reason)
    return outcome, transcript
