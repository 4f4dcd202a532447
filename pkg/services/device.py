"""
Device Strategy Service

The untrusted device is split into two components, one held by each
verifier. Every verifier↔component exchange passes through a
ComponentPort that checks message shapes and records the message on the
run's DeviceLink. Components never see key families, trapdoors or the
other side's questions; anything one component passes to the other must go
through DeviceLink.leak(), which is recorded.

The honest device:
- prepares the ENTCF superposition and answers challenges exactly
- on CT=b rounds holds one qubit per side in a shared register, applies the
  EPR-assisted CZ replacement followed by a Hadamard on the second qubit,
  then each component measures its own qubit in the basis it was asked

Author: DIOT Lab Development Team
"""

import logging
from abc import ABC, abstractmethod

from middleware.error_handlers import DeviceInterfaceError, ProtocolViolation
from services.entcf import ChallengeType, honest_device_challenge, honest_device_prepare
from services.qsim import (
    Basis, H, apply_cz_replacement, apply_gate, computational_state, measure_qubit, tensor_product,
)

logger = logging.getLogger(__name__)

SIDES = ('A', 'B')


class DeviceLink:
    """Message log of one run's verifier↔component traffic plus the leakage hook."""

    def __init__(self):
        self.messages = []
        self.leakage = []

    def deliver(self, round_index, side, kind, payload):
        entry = {'round_index': round_index, 'side': side, 'kind': kind, 'payload': payload}
        self.messages.append(entry)
        logger.debug(f"round {round_index} → device {side}: {kind}")

    def leak(self, round_index, source, target, payload):
        """Cross-component channel; every use is recorded."""
        self.leakage.append({'round_index': round_index, 'source': source, 'target': target, 'payload': payload})
        logger.warning(f"round {round_index}: component {source} leaked to component {target}")


class DeviceComponent(ABC):
    """One half of the device."""

    def __init__(self, side):
        self.side = side

    @abstractmethod
    def commit(self, key):
        """Receive a PublicKey handle, return the (m+1)-bit commitment c."""

    @abstractmethod
    def challenge(self, ct):
        """Return z (CT=a, m+1 bits) or d (CT=b, m bits)."""

    @abstractmethod
    def answer(self, basis):
        """Return (answer bit, correction bit h)."""


class DeviceStrategy(ABC):
    """Factory of per-round component pairs."""

    name = 'device'

    @abstractmethod
    def open_round(self, round_index, rng, link):
        """Return (component_a, component_b) for one round."""


class ComponentPort:
    """Verifier-side wrapper that validates and logs every exchange with a component."""

    def __init__(self, component, link, round_index, domain_bits):
        self.component = component
        self.link = link
        self.round_index = round_index
        self.domain_bits = domain_bits
        self.side = component.side

    def _bits(self, value, length, what):
        if not isinstance(value, str) or len(value) != length or any(ch not in '01' for ch in value):
            raise ProtocolViolation(f"device {self.side} sent a malformed {what}: {value!r}")
        return value

    def commit(self, key):
        self.link.deliver(self.round_index, self.side, 'key', {'key_id': key.key_id, 'domain_bits': key.domain_bits})
        return self._bits(self.component.commit(key), self.domain_bits + 1, 'commitment')

    def challenge(self, ct):
        self.link.deliver(self.round_index, self.side, 'challenge', {'ct': ct.value})
        length = self.domain_bits + 1 if ct is ChallengeType.A else self.domain_bits
        return self._bits(self.component.challenge(ct), length, f'{ct.value}-response')

    def answer(self, basis):
        self.link.deliver(self.round_index, self.side, 'question', {'basis': int(basis)})
        result = self.component.answer(basis)
        if not (isinstance(result, tuple) and len(result) == 2 and all(v in (0, 1) for v in result)):
            raise ProtocolViolation(f"device {self.side} sent a malformed answer: {result!r}")
        return int(result[0]), int(result[1])


class _SharedRegister:
    """Joint two-qubit register of the honest device on CT=b rounds."""

    def __init__(self, rng):
        self.rng = rng
        self.qubits = {}
        self.state = None
        self.h = {}

    def entangle(self):
        if self.state is not None:
            return
        # A side that answered CT=a contributes an idle qubit
        qa = self.qubits.get('A') or computational_state('0')
        qb = self.qubits.get('B') or computational_state('0')
        h_a, h_b, post = apply_cz_replacement(tensor_product(qa, qb), self.rng.samples(2))
        self.state = apply_gate(post, H, [1])
        self.h = {'A': h_a, 'B': h_b}

    def measure(self, side, basis, sample):
        outcome, self.state = measure_qubit(self.state, SIDES.index(side), basis, sample)
        return outcome


class HonestComponent(DeviceComponent):

    def __init__(self, side, register, rng):
        super().__init__(side)
        self.register = register
        self.rng = rng
        self.residual = None

    def commit(self, key):
        c, self.residual = honest_device_prepare(key, self.rng.random())
        return c

    def challenge(self, ct):
        if self.residual is None:
            raise DeviceInterfaceError("challenge before commitment")
        q = self.residual.qubit_count
        count = q if ct is ChallengeType.A else q - 1
        response = honest_device_challenge(self.residual, ct, self.rng.samples(count))
        if ct is ChallengeType.A:
            return response.z
        self.register.qubits[self.side] = response.qubit
        return response.d

    def answer(self, basis):
        self.register.entangle()
        return self.register.measure(self.side, basis, self.rng.random()), self.register.h[self.side]


class HonestDevice(DeviceStrategy):
    """Exactly simulated honest quantum device."""

    name = 'honest'

    def open_round(self, round_index, rng, link):
        register = _SharedRegister(rng.child('shared'))
        return (HonestComponent('A', register, rng.child('device_a')),
                HonestComponent('B', register, rng.child('device_b')))


class SyntheticFailureDevice(DeviceStrategy):
    """
    Verdict-only device for estimation experiments: each round fails
    independently with ``failure_rate``. It has no message interface.
    """

    def __init__(self, failure_rate):
        if not 0.0 <= failure_rate <= 1.0:
            raise ValueError(f"failure rate must lie in [0, 1], got {failure_rate}")
        self.failure_rate = failure_rate
        self.name = f'synthetic({failure_rate})'

    def open_round(self, round_index, rng, link):
        raise DeviceInterfaceError("a synthetic device only produces verdicts")


def open_ports(device, round_index, rng, link, domain_bits):
    """Open a round and wrap both components in validating ports."""
    component_a, component_b = device.open_round(round_index, rng, link)
    if component_a.side != 'A' or component_b.side != 'B':
        raise DeviceInterfaceError("device returned components for the wrong sides")
    return (ComponentPort(component_a, link, round_index, domain_bits),
            ComponentPort(component_b, link, round_index, domain_bits))
