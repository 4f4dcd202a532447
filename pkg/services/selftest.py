"""
Self-Test Service

One round of the ENTCF self-test and its verification:
- RoundRecord: everything exchanged and decided in a round
- classify_round: Bell vs Product rounds
- winning_check: image checks (CT=a), parity checks on Bell rounds and
  deterministic-outcome checks on Product rounds (CT=b)
- run_selftest_round: two-verifier and single-verifier round drivers
- estimate_delta: failure-rate estimate with its Chernoff confidence

Author: DIOT Lab Development Team
"""

import logging
from dataclasses import dataclass
from enum import Enum

from middleware.error_handlers import MalformedRecordError, MissingTrapdoorError, NotInImageError
from services.device import DeviceLink, SyntheticFailureDevice, open_ports
from services.entcf import (
    ChallengeType, Family, deserialize_keypair, evaluate, hardcore_bit, invert_injective, keygen,
    serialize_keypair,
)
from services.qsim import (
    Basis, H, apply_gate, computational_state, hadamard_state, outcome_distribution, pauli_frame_cz,
    tensor_product,
)
from utils.bits import decode_hex, encode_hex
from utils.stats import chernoff_confidence

logger = logging.getLogger(__name__)

_DETERMINISTIC = 1e-9

MODES = ('single_verifier', 'two_verifier')


class RoundType(Enum):
    BELL = 'bell'
    PRODUCT = 'product'


class RoundTag(Enum):
    TEST = 'test'
    GENERATE = 'generate'


class Verdict(Enum):
    PASS = 'pass'
    FAIL = 'fail'


@dataclass
class RoundRecord:
    """
    Full record of one self-test round.

    ``ct`` is the challenge Alice's component received; ``ct_b`` is set only
    when Bob's component received a different one (two-verifier mode).
    ``y`` is the basis actually put to Bob's component, ``y_question`` the
    one the verifier asked for.
    """

    index: int
    theta_a: Basis = None
    theta_b: Basis = None
    key_a: object = None
    key_b: object = None
    c_a: str = None
    c_b: str = None
    ct: ChallengeType = None
    ct_b: ChallengeType = None
    z_a: str = None
    z_b: str = None
    d_a: str = None
    d_b: str = None
    x: Basis = None
    y: Basis = None
    y_question: Basis = None
    a_bit: int = None
    b_bit: int = None
    h_a: int = None
    h_b: int = None
    rt: RoundType = None
    t: RoundTag = None
    in_I: bool = False
    w: Verdict = None

    def ct_of(self, side):
        if side == 'A':
            return self.ct
        return self.ct_b if self.ct_b is not None else self.ct

    def trapdoors(self):
        out = {}
        if self.key_a is not None:
            out['A'] = self.key_a.trapdoor
        if self.key_b is not None:
            out['B'] = self.key_b.trapdoor
        return out

    def to_dict(self):
        def bits(value):
            return encode_hex(value) if value is not None else None

        def enum(value):
            return None if value is None else (int(value) if isinstance(value, Basis) else value.value)

        def blob(keypair):
            return serialize_keypair(keypair).hex() if keypair is not None else None

        return {
            'index': self.index,
            'theta_a': enum(self.theta_a), 'theta_b': enum(self.theta_b),
            'key_a': blob(self.key_a), 'key_b': blob(self.key_b),
            'c_a': bits(self.c_a), 'c_b': bits(self.c_b),
            'ct': enum(self.ct), 'ct_b': enum(self.ct_b),
            'z_a': bits(self.z_a), 'z_b': bits(self.z_b),
            'd_a': bits(self.d_a), 'd_b': bits(self.d_b),
            'x': enum(self.x), 'y': enum(self.y), 'y_question': enum(self.y_question),
            'a_bit': self.a_bit, 'b_bit': self.b_bit, 'h_a': self.h_a, 'h_b': self.h_b,
            'rt': enum(self.rt), 't': enum(self.t), 'in_I': self.in_I, 'w': enum(self.w),
        }

    @classmethod
    def from_dict(cls, document):
        def bits(value):
            return decode_hex(value) if value is not None else None

        def basis(value):
            return Basis(value) if value is not None else None

        def member(enum_cls, value):
            return enum_cls(value) if value is not None else None

        def keypair(value):
            return deserialize_keypair(bytes.fromhex(value)) if value is not None else None

        try:
            return cls(
                index=int(document['index']),
                theta_a=basis(document['theta_a']), theta_b=basis(document['theta_b']),
                key_a=keypair(document['key_a']), key_b=keypair(document['key_b']),
                c_a=bits(document['c_a']), c_b=bits(document['c_b']),
                ct=member(ChallengeType, document['ct']), ct_b=member(ChallengeType, document['ct_b']),
                z_a=bits(document['z_a']), z_b=bits(document['z_b']),
                d_a=bits(document['d_a']), d_b=bits(document['d_b']),
                x=basis(document['x']), y=basis(document['y']), y_question=basis(document['y_question']),
                a_bit=document['a_bit'], b_bit=document['b_bit'],
                h_a=document['h_a'], h_b=document['h_b'],
                rt=member(RoundType, document['rt']), t=member(RoundTag, document['t']),
                in_I=bool(document['in_I']), w=member(Verdict, document['w']),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedRecordError(f"cannot rebuild round record: {e}") from e


def classify_round(record):
    """Bell iff both components got CT=b and both state bases are Hadamard."""
    if record.theta_a is None or record.theta_b is None or record.ct is None:
        raise MalformedRecordError(f"round {record.index} lacks θ or CT")
    both_b = record.ct_of('A') is ChallengeType.B and record.ct_of('B') is ChallengeType.B
    both_hadamard = record.theta_a is Basis.HADAMARD and record.theta_b is Basis.HADAMARD
    return RoundType.BELL if both_b and both_hadamard else RoundType.PRODUCT


def _side_fields(record, side):
    if side == 'A':
        return record.key_a, record.c_a, record.z_a, record.d_a, record.x, record.a_bit, record.h_a
    return record.key_b, record.c_b, record.z_b, record.d_b, record.y, record.b_bit, record.h_b


def _require(record):
    for side in ('A', 'B'):
        key, c, z, d, basis, answer, h = _side_fields(record, side)
        if key is None or c is None:
            raise MalformedRecordError(f"round {record.index}: side {side} lacks key or commitment")
        ct = record.ct_of(side)
        if ct is ChallengeType.A and z is None:
            raise MalformedRecordError(f"round {record.index}: CT=a without z on side {side}")
        if ct is ChallengeType.B and (d is None or basis is None or answer is None or h is None):
            raise MalformedRecordError(f"round {record.index}: CT=b record incomplete on side {side}")


def _trapdoor(trapdoors, side):
    trapdoor = trapdoors.get(side) if trapdoors else None
    if trapdoor is None:
        raise MissingTrapdoorError(f"side {side} trapdoor is required")
    return trapdoor


def image_check(keypair, c, z):
    """f_{k, z1}(z_r) = c."""
    return evaluate(keypair.key, int(z[0]), z[1:]) == c


def prepared_qubit(trapdoor, c, d):
    """The honest single-qubit state left after the CT=b challenge."""
    if trapdoor.family is Family.CLAW_FREE:
        return hadamard_state(str(hardcore_bit(trapdoor, c, d)))
    b_hat, _ = invert_injective(trapdoor, c)
    return computational_state(str(b_hat))


def predicted_product_state(record, trapdoors):
    """Honest two-qubit state right before the answers are measured."""
    psi_a = prepared_qubit(_trapdoor(trapdoors, 'A'), record.c_a, record.d_a)
    psi_b = prepared_qubit(_trapdoor(trapdoors, 'B'), record.c_b, record.d_b)
    framed = pauli_frame_cz(tensor_product(psi_a, psi_b), record.h_a, record.h_b)
    return apply_gate(framed, H, [1])


def _deterministic_outcomes(state, x, y):
    dist = outcome_distribution(state, [x, y])
    expected = []
    for position in (0, 1):
        p_zero = sum(p for outcome, p in dist.items() if outcome[position] == '0')
        if p_zero > 1 - _DETERMINISTIC:
            expected.append(0)
        elif p_zero < _DETERMINISTIC:
            expected.append(1)
        else:
            expected.append(None)
    return expected


def winning_check(record, trapdoors=None):
    """
    Verify one round.

    Args:
        record: RoundRecord complete for its challenge types
        trapdoors: mapping side ('A'/'B') → Trapdoor

    Returns:
        Verdict
    """
    _require(record)
    ct_a, ct_b = record.ct_of('A'), record.ct_of('B')
    if ct_a is ChallengeType.A and not image_check(record.key_a, record.c_a, record.z_a):
        return Verdict.FAIL
    if ct_b is ChallengeType.A and not image_check(record.key_b, record.c_b, record.z_b):
        return Verdict.FAIL
    if ct_a is not ChallengeType.B or ct_b is not ChallengeType.B:
        return Verdict.PASS
    try:
        return _check_answers(record, trapdoors)
    except NotInImageError:
        logger.debug(f"round {record.index}: commitment outside the image")
        return Verdict.FAIL


def _check_answers(record, trapdoors):
    parity = record.a_bit ^ record.b_bit
    if classify_round(record) is RoundType.BELL:
        if record.x is not record.y:
            return Verdict.PASS
        if record.x is Basis.COMPUTATIONAL:
            v_beta = hardcore_bit(_trapdoor(trapdoors, 'B'), record.c_b, record.d_b)
            return Verdict.PASS if parity == v_beta else Verdict.FAIL
        v_alpha = hardcore_bit(_trapdoor(trapdoors, 'A'), record.c_a, record.d_a)
        return Verdict.PASS if parity == v_alpha else Verdict.FAIL
    expected = _deterministic_outcomes(predicted_product_state(record, trapdoors), record.x, record.y)
    for predicted, answer in zip(expected, (record.a_bit, record.b_bit)):
        if predicted is not None and predicted != answer:
            return Verdict.FAIL
    return Verdict.PASS


@dataclass(frozen=True)
class RoundChoices:
    """
    Verifier-side choices of one round; ``ct_b``/``y`` concern Bob's component.

    With ``two_verifier`` set, Bob also owns ``theta_b`` and the key of
    component B.
    """

    theta_a: Basis
    theta_b: Basis
    ct: ChallengeType
    x: Basis
    y: Basis
    ct_b: ChallengeType = None
    two_verifier: bool = False

    @classmethod
    def draw(cls, mode, alice, bob):
        theta_a = Basis(alice.bit())
        if mode == 'two_verifier':
            ct = ChallengeType.A if alice.bit() == 0 else ChallengeType.B
            x = Basis(alice.bit())
            theta_b = Basis(bob.bit())
            ct_b = ChallengeType.A if bob.bit() == 0 else ChallengeType.B
            return cls(theta_a, theta_b, ct, x, Basis(bob.bit()), ct_b if ct_b is not ct else None, True)
        theta_b = Basis(alice.bit())
        ct = ChallengeType.A if alice.bit() == 0 else ChallengeType.B
        x = Basis(alice.bit())
        return cls(theta_a, theta_b, ct, x, Basis(alice.bit()))


def play_round(choices, cfg, device, rng, index=0, link=None):
    """
    Run one round with fixed verifier choices.

    Component A's key comes from the sender substream; component B's from
    the sender substream too, or from the receiver substream in two-verifier
    rounds. The device draws from the device substream. Component A answers
    before component B.
    """
    link = link if link is not None else DeviceLink()
    alice = rng.child('sender', 'keys')
    bob = rng.child('receiver', 'keys') if choices.two_verifier else alice
    record = RoundRecord(index, theta_a=choices.theta_a, theta_b=choices.theta_b,
                         ct=choices.ct, ct_b=choices.ct_b)
    record.key_a = keygen(record.theta_a, cfg.domain_bits, alice)
    record.key_b = keygen(record.theta_b, cfg.domain_bits, bob)
    port_a, port_b = open_ports(device, index, rng.child('device'), link, cfg.domain_bits)
    record.c_a = port_a.commit(record.key_a.key)
    record.c_b = port_b.commit(record.key_b.key)
    for side, port in (('A', port_a), ('B', port_b)):
        ct = record.ct_of(side)
        response = port.challenge(ct)
        setattr(record, f"{'z' if ct is ChallengeType.A else 'd'}_{side.lower()}", response)
    if record.ct_of('A') is ChallengeType.B:
        record.x = choices.x
        record.a_bit, record.h_a = port_a.answer(record.x)
    if record.ct_of('B') is ChallengeType.B:
        record.y = record.y_question = choices.y
        record.b_bit, record.h_b = port_b.answer(record.y)
    record.rt = classify_round(record)
    record.w = winning_check(record, record.trapdoors())
    logger.debug(f"self-test round {index}: ct={record.ct.value} rt={record.rt.value} w={record.w.value}")
    return record


def run_selftest_round(mode, cfg, device, rng, index=0, link=None):
    """
    Execute one self-test round.

    single_verifier: Alice picks both state bases, keys, the challenge type
    and both basis questions; Bob only relays. two_verifier: Bob picks the
    state basis and key of component B, its challenge type and its question
    from the receiver substream.

    Args:
        mode: 'single_verifier' or 'two_verifier'
        cfg: ProtocolConfig
        device: DeviceStrategy
        rng: DeterministicRNG for this round
        index: round index
        link: DeviceLink collecting device traffic (a fresh one if omitted)

    Returns:
        RoundRecord with ``rt`` and ``w`` filled in
    """
    if mode not in MODES:
        raise ValueError(f"unknown self-test mode '{mode}'")
    choices = RoundChoices.draw(mode, rng.child('sender'), rng.child('receiver'))
    return play_round(choices, cfg, device, rng, index, link)


@dataclass(frozen=True)
class DeltaEstimate:
    delta_prime: float
    confidence: float
    failures: int
    rounds: int


def estimate_delta(device, n_estimation, cfg, rng):
    """
    δ′ = F/N over N single-verifier rounds.

    Args:
        device: DeviceStrategy (a SyntheticFailureDevice yields verdicts only)
        n_estimation: N ≥ 1
        cfg: ProtocolConfig (τ, m)
        rng: DeterministicRNG

    Returns:
        DeltaEstimate with confidence 1 − 2·exp(−τ²N/3)
    """
    if n_estimation < 1:
        raise ValueError("N must be at least 1")
    if isinstance(device, SyntheticFailureDevice):
        failures = int((rng.uniform_array(n_estimation) < device.failure_rate).sum())
    else:
        failures = 0
        link = DeviceLink()
        for i in range(n_estimation):
            record = run_selftest_round('single_verifier', cfg, device, rng.child(i), index=i, link=link)
            failures += record.w is Verdict.FAIL
    delta_prime = failures / n_estimation
    return DeltaEstimate(delta_prime, chernoff_confidence(cfg.tau, n_estimation), failures, n_estimation)
