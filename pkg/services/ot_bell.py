"""
Bell-Pair Oblivious Transfer Service

Randomized 1-out-of-2 string OT from n uniformly random Bell pairs:
- a Bell-pair source hands the first qubit of each pair plus v^α to the
  sender, the second qubit plus v^β to the receiver
- the receiver measures everything in the basis named by its choice bit
- the sender measures in random bases, announces them with two hash
  functions and outputs s0, s1
- the receiver outputs s_c

The run never aborts. Receivers declare their storage capacity; the driver
checks it right before the announcement.

Author: DIOT Lab Development Team
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from middleware.error_handlers import ProtocolViolation, StorageExceeded
from services.hashing import HashFunction, apply_hash, sample_hash
from services.qsim import Basis, BellLabel, make_bell, measure_qubit
from services.transcript import Transcript
from utils.bits import encode_hex

logger = logging.getLogger(__name__)


@dataclass
class OtOutcome:
    """Result of one OT run; ``index_sets`` maps a set name to sorted round indices."""

    aborted: bool
    choice_bit: int
    s0: str = None
    s1: str = None
    receiver_output: str = None
    index_sets: dict = field(default_factory=dict)
    reason: str = None

    @property
    def strings(self):
        return (self.s0, self.s1)

    @property
    def success(self):
        """Not aborted and the receiver holds s_c."""
        return not self.aborted and self.receiver_output is not None and \
            self.receiver_output == self.strings[self.choice_bit]

    def to_dict(self):
        return {
            'aborted': self.aborted,
            'choice_bit': self.choice_bit,
            's0': self.s0,
            's1': self.s1,
            'receiver_output': self.receiver_output,
            'index_sets': self.index_sets,
            'reason': self.reason,
            'success': self.success,
        }


# ---------------------------------------------------------------------------
# Bell-pair sources
# ---------------------------------------------------------------------------

class _PairRegister:
    """Both qubits of one Bell pair; each position may be measured once."""

    def __init__(self, label):
        self.label = label
        self.state = make_bell(label)
        self.outcomes = {}

    def measure(self, position, basis, sample):
        if position in self.outcomes:
            raise ProtocolViolation(f"qubit {position} of this pair was already measured")
        outcome, self.state = measure_qubit(self.state, position, basis, sample)
        self.outcomes[position] = outcome
        return outcome


class QubitHandle:
    """One party's half of a Bell pair."""

    def __init__(self, register, position, round_index):
        self._register = register
        self.position = position
        self.round_index = round_index
        self.basis = None

    @property
    def measured(self):
        return self.position in self._register.outcomes

    def measure(self, basis, sample):
        outcome = self._register.measure(self.position, basis, sample)
        self.basis = basis
        return outcome


class BellPairSource(ABC):

    name = 'source'

    @abstractmethod
    def label(self, round_index, rng):
        """BellLabel of the pair prepared in this round."""

    def prepare(self, n, rng):
        """
        Prepare n pairs.

        Returns:
            (sender handles, receiver handles, labels)
        """
        sender_side, receiver_side, labels = [], [], []
        for i in range(n):
            label = self.label(i, rng)
            register = _PairRegister(label)
            sender_side.append(QubitHandle(register, 0, i))
            receiver_side.append(QubitHandle(register, 1, i))
            labels.append(label)
        return sender_side, receiver_side, labels


class HonestBellSource(BellPairSource):
    """Uniformly random Bell label per pair."""

    name = 'honest'

    def label(self, round_index, rng):
        return BellLabel(rng.bit(), rng.bit())


class FixedLabelSource(BellPairSource):
    """Every pair carries the same label; (0, 0) gives the plain EPR pair."""

    def __init__(self, label=BellLabel(0, 0)):
        self.fixed = label
        self.name = f'fixed({label.v_alpha},{label.v_beta})'

    def label(self, round_index, rng):
        return self.fixed


# ---------------------------------------------------------------------------
# Corrections and outputs
# ---------------------------------------------------------------------------

def sender_correction(x, v_alpha):
    """w^α: v^α on Hadamard rounds, 0 on Computational ones."""
    return v_alpha if x is Basis.HADAMARD else 0


def receiver_correction(y, v_beta):
    """w^β: v^β on Computational rounds, 0 on Hadamard ones."""
    return v_beta if y is Basis.COMPUTATIONAL else 0


def split_by_basis(indices, bases):
    """I_r = {i : bases[i] = [Computational, Hadamard]_r} for r = 0, 1."""
    return tuple([i for i in indices if bases[i] is Basis(r)] for r in (0, 1))


def corrected_string(outcomes, corrections, indices):
    """(outcome ⊕ correction) restricted to the given rounds, in index order."""
    return ''.join(str(outcomes[i] ^ corrections[i]) for i in sorted(indices))


@dataclass(frozen=True)
class Announcement:
    """Sender's public message: bases per announced round and the two hash functions."""

    bases: dict
    f0: HashFunction
    f1: HashFunction

    def hashes(self):
        return (self.f0, self.f1)

    def to_payload(self):
        rounds = sorted(self.bases)
        return {
            'rounds': rounds,
            'bases': encode_hex(''.join(str(int(self.bases[i])) for i in rounds)) if rounds else None,
            'f0': self.f0.to_dict(),
            'f1': self.f1.to_dict(),
        }


# ---------------------------------------------------------------------------
# Parties
# ---------------------------------------------------------------------------

class HonestBellSender:
    """Measures its halves in uniformly random bases and hashes the corrected outcomes."""

    def __init__(self):
        self.x = []
        self.a = []
        self.w_alpha = []
        self.outputs = None

    def choose_bases(self, n, rng):
        return [Basis(rng.bit()) for _ in range(n)]

    def on_pairs(self, handles, v_alpha, rng):
        self.x = self.choose_bases(len(handles), rng)
        samples = rng.samples(len(handles))
        self.a = [h.measure(basis, s) for h, basis, s in zip(handles, self.x, samples)]
        self.w_alpha = [sender_correction(basis, v) for basis, v in zip(self.x, v_alpha)]

    def announce(self, n, l, rng):
        hash_rng = rng.child('hash')
        f0, f1 = sample_hash(n, l, hash_rng), sample_hash(n, l, hash_rng)
        index_sets = split_by_basis(range(len(self.x)), self.x)
        self.outputs = tuple(apply_hash(f, corrected_string(self.a, self.w_alpha, rounds))
                             for f, rounds in zip((f0, f1), index_sets))
        return Announcement(dict(enumerate(self.x)), f0, f1)


class ReceiverStrategy(ABC):
    """Bell-pair OT receiver; ``storage_capacity`` None means unbounded."""

    storage_capacity = None

    def __init__(self, choice_bit):
        if choice_bit not in (0, 1):
            raise ValueError(f"choice bit must be 0 or 1, got {choice_bit!r}")
        self.choice_bit = choice_bit

    @abstractmethod
    def on_pairs(self, handles, v_beta, rng):
        """Step before the storage checkpoint; unmeasured handles count as stored."""

    @abstractmethod
    def on_announcement(self, announcement, rng):
        """Return the ℓ-bit output string."""


class HonestBellReceiver(ReceiverStrategy):
    """Measures every qubit in [Computational, Hadamard]_c right away."""

    storage_capacity = 0

    def __init__(self, choice_bit):
        super().__init__(choice_bit)
        self.y = None
        self.b = []
        self.w_beta = []

    def on_pairs(self, handles, v_beta, rng):
        self.y = Basis(self.choice_bit)
        samples = rng.samples(len(handles))
        self.b = [h.measure(self.y, s) for h, s in zip(handles, samples)]
        self.w_beta = [receiver_correction(self.y, v) for v in v_beta]

    def on_announcement(self, announcement, rng):
        index_sets = split_by_basis(range(len(self.b)), announcement.bases)
        rounds = index_sets[self.choice_bit]
        return apply_hash(announcement.hashes()[self.choice_bit], corrected_string(self.b, self.w_beta, rounds))


def _check_storage(receiver, handles):
    held = sum(1 for h in handles if not h.measured)
    capacity = receiver.storage_capacity
    if capacity is not None and held > capacity:
        raise StorageExceeded(f"receiver holds {held} qubits at the checkpoint, capacity {capacity}")
    return held


def run_bell_ot(cfg, sender, receiver, source, rng):
    """
    Execute one run of Bell-pair Rand 1-2 OT.

    Args:
        cfg: ProtocolConfig (n, ℓ)
        sender: HonestBellSender or a subclass
        receiver: ReceiverStrategy
        source: BellPairSource
        rng: DeterministicRNG for the run

    Returns:
        (OtOutcome, Transcript)
    """
    n, l = cfg.n, cfg.l
    transcript = Transcript('ot1', cfg.to_dict())
    sender_rng, receiver_rng = rng.child('sender'), rng.child('receiver')

    sender_side, receiver_side, labels = source.prepare(n, rng.child('device'))
    v_alpha = [label.v_alpha for label in labels]
    v_beta = [label.v_beta for label in labels]
    transcript.send('pairs', 'device_a', 'sender', {'v_alpha': encode_hex(''.join(map(str, v_alpha)))})
    transcript.send('pairs', 'device_b', 'receiver', {'v_beta': encode_hex(''.join(map(str, v_beta)))})

    receiver.on_pairs(receiver_side, v_beta, receiver_rng)
    held = _check_storage(receiver, receiver_side)
    logger.debug(f"storage checkpoint: receiver holds {held} of {n} qubits")

    sender.on_pairs(sender_side, v_alpha, sender_rng)
    announcement = sender.announce(n, l, sender_rng)
    transcript.send('announce', 'sender', 'receiver', announcement.to_payload())
    receiver_output = receiver.on_announcement(announcement, receiver_rng)

    I0, I1 = split_by_basis(range(n), announcement.bases)
    s0, s1 = sender.outputs
    outcome = OtOutcome(False, receiver.choice_bit, s0, s1, receiver_output, {'I0': I0, 'I1': I1})

    y = getattr(receiver, 'y', None)
    b = getattr(receiver, 'b', None)
    for i in range(n):
        transcript.records.append({
            'index': i,
            'v_alpha': v_alpha[i],
            'v_beta': v_beta[i],
            'x': int(sender.x[i]),
            'y': int(y) if y is not None else None,
            'a': sender.a[i],
            'b': b[i] if b else None,
        })
    transcript.inputs = {'choice_bit': receiver.choice_bit, 'f0': announcement.f0.to_dict(),
                         'f1': announcement.f1.to_dict()}
    transcript.derived = {
        'w_alpha': ''.join(map(str, sender.w_alpha)),
        'w_beta': ''.join(map(str, getattr(receiver, 'w_beta', []))),
        's0': s0,
        's1': s1,
        'receiver_output': receiver_output,
    }
    logger.debug(f"bell ot run: |I0|={len(I0)} |I1|={len(I1)} success={outcome.success}")
    return outcome, transcript
