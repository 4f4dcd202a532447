"""
Adversary Service

Dishonest strategies that turn the security claims into measurable
experiments:
- BoundedStorage and bounded/unbounded Bell-pair OT receivers
- a Device-independent OT receiver that postpones its component's measurements
- classical (entanglement-free) devices and their measured failure rates
- scripted dishonest senders and the exact receiver-security experiment

Every experiment reports seeds, trial counts and binomial intervals.

Author: DIOT Lab Development Team
"""

import itertools
import logging
from fractions import Fraction

import numpy as np

from middleware.error_handlers import ConfigurationError, StorageExceeded
from services.device import DeviceComponent, DeviceLink, DeviceStrategy, HonestDevice
from services.entcf import ChallengeType, deserialize_keypair, evaluate
from services.hashing import apply_hash
from services.ot_bell import (
    Announcement, HonestBellSource, HonestBellReceiver, HonestBellSender, ReceiverStrategy, corrected_string,
    receiver_correction, run_bell_ot, split_by_basis,
)
from services.ot_device_independent import HonestDiReceiver, HonestDiSender, correction_bit, run_device_independent_ot
from services.qsim import Basis, BellLabel, make_bell, project_outcome
from services.selftest import RoundChoices, RoundTag, Verdict, play_round
from utils.file_utils import canonical_json
from utils.rng import DeterministicRNG
from utils.stats import Estimate

logger = logging.getLogger(__name__)

MEASUREMENT_POLICIES = ('random_bases', 'computational', 'hadamard', 'choice_basis')
CLASSICAL_KINDS = ('random_answers', 'image_honest_bell_random', 'best_known')
OT4_SCRIPTS = ('honest', 'always_b', 'claw_free_keys', 'injective_keys', 'all_test', 'fixed_questions',
               'malformed_types')
OT1_SCRIPTS = ('honest', 'fixed_questions', 'same_hashes')
MAX_ENUMERATED_ROUNDS = 8


# ---------------------------------------------------------------------------
# Bounded quantum storage
# ---------------------------------------------------------------------------

class BoundedStorage:
    """Quantum memory holding at most ``capacity`` unmeasured qubits at the checkpoint."""

    def __init__(self, capacity):
        if capacity < 0:
            raise ConfigurationError(f"storage capacity must be non-negative, got {capacity}")
        self.capacity = capacity
        self.stored = {}

    def store(self, index, handle):
        if len(self.stored) >= self.capacity:
            raise StorageExceeded(f"cannot store round {index}: capacity {self.capacity} reached")
        self.stored[index] = handle

    def release(self):
        """Hand back every stored qubit, emptying the memory."""
        stored, self.stored = self.stored, {}
        return stored

    def checkpoint(self):
        held = sum(1 for h in self.stored.values() if not h.measured)
        if held > self.capacity:
            raise StorageExceeded(f"{held} qubits held at the checkpoint, capacity {self.capacity}")
        return held


class BoundedReceiver(ReceiverStrategy):
    """
    Bell-pair OT receiver with ``capacity`` qubits of memory.

    It stores the first ``capacity`` qubits, measures the rest according to
    ``policy``, and after the announcement measures its stored qubits in the
    sender's bases. ``recovered`` holds its guesses of (s0, s1);
    ``effective_choice`` is the index whose rounds it measured in the matching
    basis more often.
    """

    def __init__(self, choice_bit, capacity, policy='random_bases'):
        super().__init__(choice_bit)
        if policy not in MEASUREMENT_POLICIES:
            raise ConfigurationError(f"unknown measurement policy '{policy}'")
        self.storage = BoundedStorage(capacity)
        self.policy = policy
        self.used_bases = {}
        self.outcomes = {}
        self.v_beta = []
        self.recovered = None
        self.effective_choice = choice_bit

    @property
    def storage_capacity(self):
        return self.storage.capacity

    def _policy_basis(self, rng):
        if self.policy == 'random_bases':
            return Basis(rng.bit())
        if self.policy == 'computational':
            return Basis.COMPUTATIONAL
        if self.policy == 'hadamard':
            return Basis.HADAMARD
        return Basis(self.choice_bit)

    def on_pairs(self, handles, v_beta, rng):
        self.v_beta = list(v_beta)
        keep = min(self.storage.capacity, len(handles))
        for handle in handles[:keep]:
            self.storage.store(handle.round_index, handle)
        for handle in handles[keep:]:
            basis = self._policy_basis(rng)
            self.used_bases[handle.round_index] = basis
            self.outcomes[handle.round_index] = handle.measure(basis, rng.random())
        self.storage.checkpoint()

    def on_announcement(self, announcement, rng):
        for index, handle in sorted(self.storage.release().items()):
            basis = announcement.bases[index]
            self.used_bases[index] = basis
            self.outcomes[index] = handle.measure(basis, rng.random())
        n = len(self.v_beta)
        w_beta = [receiver_correction(self.used_bases[i], self.v_beta[i]) for i in range(n)]
        index_sets = split_by_basis(range(n), announcement.bases)
        self.recovered = tuple(apply_hash(f, corrected_string(self.outcomes, w_beta, rounds))
                               for f, rounds in zip(announcement.hashes(), index_sets))
        matched = []
        for rounds in index_sets:
            hits = sum(1 for i in rounds if self.used_bases[i] is announcement.bases[i])
            matched.append(hits / len(rounds) if rounds else 0.0)
        if matched[0] != matched[1]:
            self.effective_choice = int(matched[1] > matched[0])
        return self.recovered[self.choice_bit]


def bounded_receiver_strategy(capacity, policy='random_bases', choice_bit=0):
    """Receiver measuring all but ``capacity`` qubits before the checkpoint."""
    return BoundedReceiver(choice_bit, capacity, policy)


def unbounded_receiver_attack(cfg, rng, capacity=None):
    """
    Store every qubit until the sender announces its bases, then copy them.

    Args:
        cfg: ProtocolConfig
        rng: DeterministicRNG for the run
        capacity: storage override (None stores all n qubits)

    Returns:
        report dict with recovery flags for s0 and s1
    """
    capacity = cfg.n if capacity is None else capacity
    choice_bit = rng.child('receiver', 'shared').bit()
    receiver = BoundedReceiver(choice_bit, capacity, 'random_bases')
    outcome, _ = run_bell_ot(cfg, HonestBellSender(), receiver, HonestBellSource(), rng)
    report = {
        'seed': rng.seed,
        'capacity': capacity,
        'choice_bit': choice_bit,
        's0_recovered': receiver.recovered[0] == outcome.s0,
        's1_recovered': receiver.recovered[1] == outcome.s1,
    }
    report['both_recovered'] = report['s0_recovered'] and report['s1_recovered']
    return report


def guessing_trial(cfg, capacity, policy, rng):
    """
    One bounded-receiver run.

    Returns:
        (chosen-string hit, other-string hit) relative to the effective choice C′
    """
    receiver = BoundedReceiver(rng.child('receiver', 'shared').bit(), capacity, policy)
    outcome, _ = run_bell_ot(cfg, HonestBellSender(), receiver, HonestBellSource(), rng)
    c_eff = receiver.effective_choice
    return (receiver.recovered[c_eff] == outcome.strings[c_eff],
            receiver.recovered[1 - c_eff] == outcome.strings[1 - c_eff])


def guessing_report(cfg, capacity, policy, chosen_hits, other_hits, trials, seed):
    target = 2.0 ** -cfg.l
    other = Estimate(other_hits, trials)
    return {
        'seed': seed,
        'trials': trials,
        'capacity': capacity,
        'policy': policy,
        'target': target,
        'other_string': other.to_dict(),
        'chosen_string': Estimate(chosen_hits, trials).to_dict(),
        'consistent_with_target': other.consistent_with(target),
    }


def guessing_experiment(cfg, trials, capacity, policy, rng):
    """
    Success rate of a bounded receiver on the string it did not effectively choose.

    Returns:
        report dict with Estimates for s_{C′} and s_{1−C′} and the 2^{-ℓ} target
    """
    hits = [guessing_trial(cfg, capacity, policy, rng.child(t)) for t in range(trials)]
    chosen_hits = sum(1 for chosen, _ in hits if chosen)
    other_hits = sum(1 for _, other in hits if other)
    report = guessing_report(cfg, capacity, policy, chosen_hits, other_hits, trials, rng.seed)
    logger.info(f"guessing experiment ({policy}, capacity {capacity}): "
                f"s_(1-C') rate {report['other_string']['rate']:.4f} vs {report['target']}")
    return report


# ---------------------------------------------------------------------------
# Device-independent OT receiver with postponed measurements
# ---------------------------------------------------------------------------

class DelayedMeasurementReceiver(HonestDiReceiver):
    """
    Does not query its component on rounds in I until the sender has announced
    its bases, then asks for exactly those bases. Without published trapdoors
    it guesses v^β on Computational rounds.
    """

    name = 'delayed_measurement'

    def __init__(self, choice_bit, override_coins=None):
        super().__init__(choice_bit, override_coins)
        self.ports = {}
        self.recovered = None
        self.guessed_rounds = 0

    def on_question(self, state, port_b, cfg, rng):
        state.in_I = self._override(state.index, cfg, rng)
        if state.in_I:
            self.ports[state.index] = port_b
            return None, None
        state.y = state.y_question
        state.b_bit, state.h_b = port_b.answer(state.y)
        return state.y, (state.b_bit, state.h_b)

    def on_announcement(self, announcement, generation, rng):
        for i in generation.rounds:
            state = self.rounds[i]
            state.y = announcement.bases[i]
            state.b_bit, state.h_b = self.ports[i].answer(state.y)
        self.w_beta = {}
        self.guessed_rounds = 0
        for i in generation.rounds:
            state = self.rounds[i]
            blob = generation.trapdoors.get(i)
            if blob or state.y is Basis.HADAMARD:
                trapdoor = deserialize_keypair(bytes.fromhex(blob)).trapdoor if blob else None
                self.w_beta[i] = correction_bit('B', state.y, trapdoor, state.c_b, state.d_b)
            else:
                self.w_beta[i] = rng.bit()
                self.guessed_rounds += 1
        b = {i: self.rounds[i].b_bit for i in generation.rounds}
        self.recovered = tuple(
            apply_hash(f, corrected_string(b, self.w_beta, [i for i in generation.rounds
                                                             if announcement.bases[i] is Basis(r)]))
            for r, f in enumerate(announcement.hashes()))
        return self.recovered[self.choice_bit]


def delayed_measurement_attack(cfg, rng, use_trapdoors=True):
    """
    Device-independent OT against a receiver with unbounded storage.

    Returns:
        report dict: recovery flags, guessed corrections k and the predicted
        success 2^{-k} + (1 − 2^{-k})·2^{-ℓ} for the Computational-basis string
    """
    choice_bit = rng.child('receiver', 'shared').bit()
    receiver = DelayedMeasurementReceiver(choice_bit)
    sender = HonestDiSender(publish_trapdoors=use_trapdoors)
    outcome, _ = run_device_independent_ot(cfg, sender, receiver, HonestDevice(), rng)
    report = {'seed': rng.seed, 'use_trapdoors': use_trapdoors, 'aborted': outcome.aborted}
    if outcome.aborted:
        return report
    k = receiver.guessed_rounds
    report.update({
        'I_tilde': len(outcome.index_sets['I_tilde']),
        'guessed_rounds': k,
        's0_recovered': receiver.recovered[0] == outcome.s0,
        's1_recovered': receiver.recovered[1] == outcome.s1,
        'predicted_s0_success': 2.0 ** -k + (1 - 2.0 ** -k) * 2.0 ** -cfg.l,
    })
    return report


# ---------------------------------------------------------------------------
# Classical devices
# ---------------------------------------------------------------------------

class ClassicalComponent(DeviceComponent):
    """Component holding only classical data; ``table`` is shared with its partner."""

    def __init__(self, side, kind, rng, table):
        super().__init__(side)
        self.kind = kind
        self.rng = rng
        self.table = table
        self.domain_bits = None
        self.preimage = None

    def commit(self, key):
        self.domain_bits = key.domain_bits
        if self.kind == 'random_answers':
            return self.rng.bits(key.domain_bits + 1)
        b, x = self.rng.bit(), self.rng.bits(key.domain_bits)
        self.preimage = (b, x)
        return evaluate(key, b, x)

    def challenge(self, ct):
        if ct is ChallengeType.A:
            if self.preimage is None:
                return self.rng.bits(self.domain_bits + 1)
            b, x = self.preimage
            return f'{b}{x}'
        return self.rng.bits(self.domain_bits)

    def answer(self, basis):
        if self.kind == 'best_known':
            return self.table[int(basis)], self.table[2]
        return self.rng.bit(), self.rng.bit()


class ClassicalDevice(DeviceStrategy):
    """Device that never prepares entanglement."""

    def __init__(self, kind):
        if kind not in CLASSICAL_KINDS:
            raise ConfigurationError(f"unknown classical device kind '{kind}'")
        self.kind = kind
        self.name = f'classical({kind})'

    def open_round(self, round_index, rng, link):
        shared = rng.child('shared')
        table = (shared.bit(), shared.bit(), shared.bit())
        return (ClassicalComponent('A', self.kind, rng.child('device_a'), table),
                ClassicalComponent('B', self.kind, rng.child('device_b'), table))


def classical_device_strategy(kind):
    return ClassicalDevice(kind)


def forced_bell_round(device, cfg, rng, index=0, link=None):
    """Play one Bell round with x = y drawn by the sender; returns the Verdict."""
    basis = Basis(rng.child('sender').bit())
    choices = RoundChoices(Basis.HADAMARD, Basis.HADAMARD, ChallengeType.B, basis, basis)
    return play_round(choices, cfg, device, rng, index, link).w


def measure_bell_failure_rate(kind, rounds, cfg, rng):
    """
    Failure rate of a classical device on checked Bell rounds (x = y).

    Returns:
        Estimate over ``rounds`` forced Bell rounds
    """
    device = classical_device_strategy(kind)
    link = DeviceLink()
    failures = sum(1 for i in range(rounds) if forced_bell_round(device, cfg, rng.child(i), i, link) is Verdict.FAIL)
    estimate = Estimate(failures, rounds)
    logger.info(f"{device.name}: Bell-round failure rate {estimate.rate:.4f} over {rounds} rounds")
    return estimate


# ---------------------------------------------------------------------------
# Scripted dishonest senders
# ---------------------------------------------------------------------------

class ScriptedDiSender(HonestDiSender):
    """Device-independent OT sender deviating from the honest message policy by script."""

    def __init__(self, script):
        if script not in OT4_SCRIPTS:
            raise ConfigurationError(f"unknown sender script '{script}'")
        super().__init__()
        self.script = script
        self.name = f'scripted({script})'

    def round_choices(self, index, rng):
        choices = super().round_choices(index, rng)
        if self.script == 'always_b':
            return RoundChoices(choices.theta_a, choices.theta_b, ChallengeType.B, choices.x, choices.y)
        if self.script == 'claw_free_keys':
            return RoundChoices(Basis.HADAMARD, Basis.HADAMARD, choices.ct, choices.x, choices.y)
        if self.script == 'injective_keys':
            return RoundChoices(Basis.COMPUTATIONAL, Basis.COMPUTATIONAL, choices.ct, choices.x, choices.y)
        if self.script == 'fixed_questions':
            return RoundChoices(choices.theta_a, choices.theta_b, choices.ct, Basis.COMPUTATIONAL,
                                Basis.COMPUTATIONAL)
        if self.script == 'malformed_types':
            return RoundChoices(choices.theta_a, choices.theta_b, 'c', choices.x, choices.y)
        return choices

    def assign_tags(self, round_types, rng):
        if self.script == 'all_test':
            return [RoundTag.TEST] * len(round_types)
        return super().assign_tags(round_types, rng)


class ScriptedBellSender(HonestBellSender):
    """Bell-pair OT sender with scripted bases or hash choice."""

    def __init__(self, script):
        if script not in OT1_SCRIPTS:
            raise ConfigurationError(f"unknown sender script '{script}' for ot1")
        super().__init__()
        self.script = script

    def choose_bases(self, n, rng):
        if self.script == 'fixed_questions':
            return [Basis.COMPUTATIONAL] * n
        return super().choose_bases(n, rng)

    def announce(self, n, l, rng):
        announcement = super().announce(n, l, rng)
        if self.script != 'same_hashes':
            return announcement
        f0 = announcement.f0
        index_sets = split_by_basis(range(len(self.x)), self.x)
        self.outputs = tuple(apply_hash(f0, corrected_string(self.a, self.w_alpha, rounds)) for rounds in index_sets)
        return Announcement(announcement.bases, f0, f0)


def scripted_dishonest_sender(script, protocol='ot4'):
    if protocol == 'ot1':
        return ScriptedBellSender(script)
    if protocol == 'ot4':
        return ScriptedDiSender(script)
    raise ConfigurationError(f"unknown protocol '{protocol}'")


# ---------------------------------------------------------------------------
# Exact receiver security
# ---------------------------------------------------------------------------

def _reduced_first_qubit(state):
    rho = state.density().reshape(2, 2, 2, 2)
    return np.einsum('ijkj->ik', rho)


def sender_marginal(label, y):
    """
    State of the sender's half after the receiver measured its half in ``y``
    and kept the outcome, as seen by the sender.
    """
    total = np.zeros((2, 2), dtype=complex)
    for outcome in (0, 1):
        probability, post = project_outcome(make_bell(label), 1, y, outcome)
        if post is not None:
            total += probability * _reduced_first_qubit(post)
    return total


def _rounded(matrix):
    return [[[round(float(v.real), 9) + 0.0, round(float(v.imag), 9) + 0.0] for v in row] for row in matrix]


def _total_variation(left, right):
    keys = set(left) | set(right)
    return sum((abs(left.get(k, Fraction(0)) - right.get(k, Fraction(0))) for k in keys), Fraction(0)) / 2


def _ot4_views(cfg, script, choice_bit, seed):
    p = Fraction(cfg.override_probability).limit_denominator(1 << 16)
    views = {}
    for coins in itertools.product((0, 1), repeat=cfg.n):
        weight = Fraction(1)
        for coin in coins:
            weight *= p if coin else 1 - p
        receiver = HonestDiReceiver(choice_bit, override_coins=coins)
        sender = scripted_dishonest_sender(script, 'ot4')
        _, transcript = run_device_independent_ot(cfg, sender, receiver, HonestDevice(), DeterministicRNG(seed))
        key = transcript.view_key('sender')
        views[key] = views.get(key, Fraction(0)) + weight
    return views


def _ot1_views(cfg, script, choice_bit, seed):
    receiver = HonestBellReceiver(choice_bit)
    _, transcript = run_bell_ot(cfg, scripted_dishonest_sender(script, 'ot1'), receiver, HonestBellSource(),
                                DeterministicRNG(seed))
    quantum = [_rounded(sender_marginal(BellLabel(r['v_alpha'], r['v_beta']), Basis(choice_bit)))
               for r in transcript.records]
    key = canonical_json({'messages': transcript.view_key('sender'), 'qubits': quantum})
    return {key: Fraction(1)}


def receiver_security_experiment(cfg, script, protocol='ot4', seed=None):
    """
    Exact distance between the sender's views for c = 0 and c = 1.

    Every receiver coin is enumerated with its exact weight; device and
    sender randomness stay fixed by ``seed``.

    Returns:
        report dict with the total-variation distance as a Fraction
    """
    if cfg.n > MAX_ENUMERATED_ROUNDS:
        raise ConfigurationError(f"exact enumeration needs n ≤ {MAX_ENUMERATED_ROUNDS}, got {cfg.n}")
    if protocol not in ('ot1', 'ot4'):
        raise ConfigurationError(f"unknown protocol '{protocol}'")
    seed = cfg.seed if seed is None else seed
    build = _ot4_views if protocol == 'ot4' else _ot1_views
    views = [build(cfg, script, c, seed) for c in (0, 1)]
    distance = _total_variation(*views)
    logger.info(f"receiver security ({protocol}, {script}): TV distance {distance}")
    return {
        'seed': seed,
        'protocol': protocol,
        'script': script,
        'n': cfg.n,
        'distinct_views': [len(v) for v in views],
        'tv_distance': distance,
    }
