"""
Quantum Simulation Service

Exact simulation of few-qubit registers:
- Pure states (state vectors) and mixed states (density operators)
- Computational / Hadamard measurements driven by explicit randomness samples
- The four Bell states and their measurement correlations
- The EPR-assisted replacement circuit for the controlled-Z gate
- Trace distance and fidelity
- Classical-quantum (cq) states

Qubit 0 is the most significant bit of a basis index: for two qubits,
index 2 is |10⟩.

Author: DIOT Lab Development Team
"""

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from config.settings import ALGEBRA_TOLERANCE, MAX_QUBITS
from middleware.error_handlers import DimensionMismatchError, QubitIndexError, SimulationLimitError
from utils.validators import validate_unit_sample

logger = logging.getLogger(__name__)

# Outcomes below this probability are never selected by a sample
_NEGLIGIBLE = 1e-14

SQRT_HALF = 1.0 / np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex)
CNOT = np.array([[1, 0, 0, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1],
                 [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


class Basis(IntEnum):
    """Measurement / state basis; ``Basis(c)`` follows the [Computational, Hadamard]_c convention."""

    COMPUTATIONAL = 0
    HADAMARD = 1


@dataclass(frozen=True)
class BellLabel:
    """Label (v^α, v^β) of the Bell state (Z^{v^α} X^{v^β} ⊗ 1)(|00⟩+|11⟩)/√2."""

    v_alpha: int
    v_beta: int

    def __post_init__(self):
        if self.v_alpha not in (0, 1) or self.v_beta not in (0, 1):
            raise ValueError(f"Bell label bits must be 0 or 1, got ({self.v_alpha}, {self.v_beta})")

    @classmethod
    def all(cls):
        return [cls(a, b) for a in (0, 1) for b in (0, 1)]


@dataclass(frozen=True, eq=False)
class QuantumState:
    """
    Exact state of a q-qubit register.

    ``data`` is a length-2^q vector (pure) or a 2^q×2^q Hermitian,
    unit-trace matrix (mixed).
    """

    data: np.ndarray
    qubit_count: int

    def __post_init__(self):
        if self.qubit_count < 1:
            raise DimensionMismatchError("a state needs at least one qubit")
        if self.qubit_count > MAX_QUBITS:
            raise SimulationLimitError(f"{self.qubit_count} qubits exceeds the limit of {MAX_QUBITS}")
        dim = 1 << self.qubit_count
        data = np.asarray(self.data, dtype=complex)
        if data.shape == (dim,):
            norm = float(np.vdot(data, data).real)
        elif data.shape == (dim, dim):
            if not np.allclose(data, data.conj().T, atol=ALGEBRA_TOLERANCE):
                raise DimensionMismatchError("density operator is not Hermitian")
            lowest = float(np.linalg.eigvalsh(data).min())
            if lowest < -ALGEBRA_TOLERANCE:
                raise DimensionMismatchError(f"density operator is not positive semidefinite (eigenvalue {lowest:.3e})")
            norm = float(np.trace(data).real)
        else:
            raise DimensionMismatchError(f"shape {data.shape} does not match {self.qubit_count} qubits")
        if abs(norm - 1.0) > ALGEBRA_TOLERANCE:
            raise DimensionMismatchError(f"state is not normalized (norm {norm:.12f})")
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_vector(cls, vector):
        vector = np.asarray(vector, dtype=complex)
        q = int(round(np.log2(vector.shape[0])))
        return cls(vector / np.linalg.norm(vector), q)

    @classmethod
    def from_density(cls, matrix):
        matrix = np.asarray(matrix, dtype=complex)
        q = int(round(np.log2(matrix.shape[0])))
        return cls(matrix, q)

    @property
    def is_pure(self):
        return self.data.ndim == 1

    @property
    def dimension(self):
        return 1 << self.qubit_count

    def density(self):
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def vector(self):
        if not self.is_pure:
            raise DimensionMismatchError("mixed state has no state vector")
        return self.data


@dataclass(frozen=True)
class CqBranch:
    values: tuple
    probability: float
    state: QuantumState


@dataclass(frozen=True)
class CqState:
    """Classical-quantum state Σ p_v |v⟩⟨v| ⊗ ρ_v with equal-sized quantum parts."""

    branches: tuple

    def __post_init__(self):
        branches = tuple(self.branches)
        if not branches:
            raise DimensionMismatchError("a cq-state needs at least one branch")
        total = sum(b.probability for b in branches)
        if abs(total - 1.0) > ALGEBRA_TOLERANCE:
            raise DimensionMismatchError(f"branch probabilities sum to {total}")
        if any(b.probability < 0 for b in branches):
            raise DimensionMismatchError("negative branch probability")
        if len({b.values for b in branches}) != len(branches):
            raise DimensionMismatchError("cq-state repeats a classical value")
        sizes = {b.state.qubit_count for b in branches}
        if len(sizes) != 1:
            raise DimensionMismatchError("branches carry registers of different sizes")
        object.__setattr__(self, 'branches', branches)

    @property
    def quantum_qubits(self):
        return self.branches[0].state.qubit_count

    def blocks(self):
        """Map classical value → p·ρ (unnormalized block)."""
        return {branch.values: branch.probability * branch.state.density() for branch in self.branches}

    def density(self):
        """Block-diagonal density operator, classical values in sorted order."""
        blocks = self.blocks()
        keys = sorted(blocks)
        dim = 1 << self.quantum_qubits
        full = np.zeros((dim * len(keys), dim * len(keys)), dtype=complex)
        for i, key in enumerate(keys):
            full[i * dim:(i + 1) * dim, i * dim:(i + 1) * dim] = blocks[key]
        return full

    def sample(self, randomness):
        """Pick a branch by inverse-CDF on a unit sample."""
        sample = validate_unit_sample(randomness)
        cumulative = 0.0
        candidates = [b for b in self.branches if b.probability > _NEGLIGIBLE]
        for branch in candidates:
            cumulative += branch.probability
            if sample < cumulative:
                return branch
        return candidates[-1]


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def computational_state(bits):
    """|bits⟩ for a bit string."""
    vector = np.zeros(1 << len(bits), dtype=complex)
    vector[int(bits, 2)] = 1.0
    return QuantumState(vector, len(bits))


def hadamard_state(bits):
    """H^{⊗q}|bits⟩, i.e. |+⟩ for '0' and |−⟩ for '1'."""
    state = computational_state(bits)
    for index in range(len(bits)):
        state = apply_gate(state, H, [index])
    return state


def random_pure_state(qubit_count, rng):
    """Haar-random pure state from a DeterministicRNG."""
    dim = 1 << qubit_count
    raw = rng.normal(dim) + 1j * rng.normal(dim)
    return QuantumState(raw / np.linalg.norm(raw), qubit_count)


def tensor_product(*states):
    """Joint state of independent registers, in argument order."""
    if all(s.is_pure for s in states):
        data = states[0].data
        for s in states[1:]:
            data = np.kron(data, s.data)
    else:
        data = states[0].density()
        for s in states[1:]:
            data = np.kron(data, s.density())
    return QuantumState(data, sum(s.qubit_count for s in states))


def make_bell(label):
    """(Z^{v^α} X^{v^β} ⊗ 1)(|00⟩+|11⟩)/√2."""
    state = QuantumState(np.array([SQRT_HALF, 0, 0, SQRT_HALF], dtype=complex), 2)
    if label.v_beta:
        state = apply_gate(state, X, [0])
    if label.v_alpha:
        state = apply_gate(state, Z, [0])
    return state


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------

def _check_indices(state, indices):
    for index in indices:
        if not 0 <= index < state.qubit_count:
            raise QubitIndexError(f"qubit {index} outside a {state.qubit_count}-qubit register")
    if len(set(indices)) != len(indices):
        raise QubitIndexError(f"repeated qubit in {list(indices)}")


def _contract(tensor, gate, axes):
    k = len(axes)
    g = gate.reshape((2,) * (2 * k))
    out = np.tensordot(g, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_gate(state, gate, targets):
    """
    Apply a 2^k×2^k unitary to the listed qubits.

    Args:
        state: QuantumState
        gate: unitary matrix; its first tensor factor acts on targets[0]
        targets: qubit indices

    Returns:
        QuantumState
    """
    targets = list(targets)
    _check_indices(state, targets)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (1 << len(targets),) * 2:
        raise DimensionMismatchError(f"gate shape {gate.shape} does not act on {len(targets)} qubits")
    q = state.qubit_count
    if state.is_pure:
        tensor = _contract(state.data.reshape((2,) * q), gate, targets)
        return QuantumState(tensor.reshape(-1), q)
    tensor = state.data.reshape((2,) * (2 * q))
    tensor = _contract(tensor, gate, targets)
    tensor = _contract(tensor, gate.conj(), [q + t for t in targets])
    return QuantumState(tensor.reshape(1 << q, 1 << q), q)


def pauli_frame_cz(state, h_a, h_b):
    """(X^{h_a} Z^{h_b} ⊗ X^{h_b} Z^{h_a}) · CZ · state."""
    if state.qubit_count != 2:
        raise DimensionMismatchError("the Pauli frame acts on two qubits")
    out = apply_gate(state, CZ, [0, 1])
    if h_b:
        out = apply_gate(out, Z, [0])
    if h_a:
        out = apply_gate(out, X, [0])
        out = apply_gate(out, Z, [1])
    if h_b:
        out = apply_gate(out, X, [1])
    return out


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------

def _project(state, index, outcome):
    """Unnormalized projection of qubit ``index`` onto |outcome⟩; returns (probability, data)."""
    q = state.qubit_count
    if state.is_pure:
        tensor = state.data.reshape((2,) * q).copy()
        selector = [slice(None)] * q
        selector[index] = 1 - outcome
        tensor[tuple(selector)] = 0
        data = tensor.reshape(-1)
        return float(np.vdot(data, data).real), data
    tensor = state.data.reshape((2,) * (2 * q)).copy()
    selector = [slice(None)] * (2 * q)
    selector[index] = 1 - outcome
    tensor[tuple(selector)] = 0
    selector = [slice(None)] * (2 * q)
    selector[q + index] = 1 - outcome
    tensor[tuple(selector)] = 0
    data = tensor.reshape(1 << q, 1 << q)
    return float(np.trace(data).real), data


def _normalized(data, probability, q):
    if data.ndim == 1:
        return QuantumState(data / np.sqrt(probability), q)
    return QuantumState(data / probability, q)


def project_outcome(state, index, basis, outcome):
    """
    Force a measurement outcome.

    Returns:
        (probability, post_state); post_state is None when the outcome is impossible
    """
    _check_indices(state, [index])
    work = state if basis is Basis.COMPUTATIONAL else apply_gate(state, H, [index])
    probability, data = _project(work, index, outcome)
    if probability < _NEGLIGIBLE:
        return probability, None
    post = _normalized(data, probability, state.qubit_count)
    if basis is Basis.HADAMARD:
        post = apply_gate(post, H, [index])
    return probability, post


def measure_qubit(state, index, basis, randomness):
    """
    Measure one qubit in the given basis.

    Args:
        state: QuantumState
        index: qubit index
        basis: Basis
        randomness: unit-interval sample; outcome 0 iff sample < Pr[0]

    Returns:
        (outcome, post_state)
    """
    _check_indices(state, [index])
    sample = validate_unit_sample(randomness)
    p0, post0 = project_outcome(state, index, basis, 0)
    outcome = 0 if sample < p0 else 1
    if outcome == 1:
        p1, post1 = project_outcome(state, index, basis, 1)
        if post1 is None:
            return 0, post0
        return 1, post1
    if post0 is None:
        return 1, project_outcome(state, index, basis, 1)[1]
    return 0, post0


def measure_qubits(state, indices, bases, randomness):
    """Measure several qubits in turn; returns (outcome bit string, post_state)."""
    if not (len(indices) == len(bases) == len(randomness)):
        raise DimensionMismatchError("indices, bases and samples must have equal length")
    outcomes = []
    for index, basis, sample in zip(indices, bases, randomness):
        outcome, state = measure_qubit(state, index, basis, sample)
        outcomes.append(str(outcome))
    return ''.join(outcomes), state


def discard_qubits(state, indices, outcomes, bases):
    """
    Remove qubits known to sit in basis eigenstates.

    Args:
        state: post-measurement QuantumState
        indices: qubits to remove
        outcomes: their eigenvalue labels (bit string or list)
        bases: the basis each was measured in

    Returns:
        QuantumState on the remaining qubits, original order kept
    """
    _check_indices(state, list(indices))
    for index, basis in zip(indices, bases):
        if basis is Basis.HADAMARD:
            state = apply_gate(state, H, [index])
    q = state.qubit_count
    keep = q - len(indices)
    if keep < 1:
        raise DimensionMismatchError("cannot discard every qubit")
    picks = {index: int(bit) for index, bit in zip(indices, outcomes)}
    if state.is_pure:
        selector = tuple(picks.get(i, slice(None)) for i in range(q))
        data = state.data.reshape((2,) * q)[selector].reshape(-1)
        norm = float(np.vdot(data, data).real)
    else:
        row = [picks.get(i, slice(None)) for i in range(q)]
        data = state.data.reshape((2,) * (2 * q))[tuple(row + row)]
        data = data.reshape(1 << keep, 1 << keep)
        norm = float(np.trace(data).real)
    if norm < _NEGLIGIBLE:
        raise ValueError("discarded qubits are not in the stated eigenstates")
    return _normalized(data, norm, keep)


def outcome_distribution(state, bases):
    """
    Exact joint outcome probabilities.

    Args:
        state: QuantumState
        bases: one Basis per qubit

    Returns:
        dict mapping every q-bit outcome string to its probability
    """
    if len(bases) != state.qubit_count:
        raise DimensionMismatchError(f"{len(bases)} bases for {state.qubit_count} qubits")
    work = state
    for index, basis in enumerate(bases):
        if basis is Basis.HADAMARD:
            work = apply_gate(work, H, [index])
    if work.is_pure:
        probabilities = np.abs(work.data) ** 2
    else:
        probabilities = np.real(np.diag(work.data))
    q = state.qubit_count
    return {format(i, f'0{q}b'): float(max(p, 0.0)) for i, p in enumerate(probabilities)}


# ---------------------------------------------------------------------------
# Controlled-Z replacement circuit
# ---------------------------------------------------------------------------

def _cz_replacement_register(state):
    """Registers ordered A, B, E1, E2 after the EPR-side gates."""
    if state.qubit_count != 2:
        raise DimensionMismatchError(f"circuit acts on 2 qubits, got {state.qubit_count}")
    joint = tensor_product(state, make_bell(BellLabel(0, 0)))
    joint = apply_gate(joint, H, [3])
    joint = apply_gate(joint, CNOT, [2, 0])
    joint = apply_gate(joint, CNOT, [3, 1])
    return joint


def apply_cz_replacement(state, randomness):
    """
    Replace CZ by a fresh EPR pair, two CNOTs and two measurements.

    Args:
        state: two-qubit QuantumState (A, B)
        randomness: two unit-interval samples for the A and B measurements

    Returns:
        (h_a, h_b, post_state) with post_state equal, up to global phase, to
        (X^{h_a} Z^{h_b} ⊗ X^{h_b} Z^{h_a}) · CZ · state
    """
    r_a, r_b = randomness
    joint = _cz_replacement_register(state)
    h_a, joint = measure_qubit(joint, 0, Basis.COMPUTATIONAL, r_a)
    h_b, joint = measure_qubit(joint, 1, Basis.COMPUTATIONAL, r_b)
    post = discard_qubits(joint, [0, 1], [h_a, h_b], [Basis.COMPUTATIONAL] * 2)
    logger.debug(f"CZ replacement circuit measured h_a={h_a}, h_b={h_b}")
    return h_a, h_b, post


def cz_replacement_branches(state):
    """All four (h_a, h_b, probability, post_state) branches of the circuit."""
    joint = _cz_replacement_register(state)
    branches = []
    for h_a in (0, 1):
        p_a, after_a = project_outcome(joint, 0, Basis.COMPUTATIONAL, h_a)
        for h_b in (0, 1):
            p_b, after_b = project_outcome(after_a, 1, Basis.COMPUTATIONAL, h_b)
            post = discard_qubits(after_b, [0, 1], [h_a, h_b], [Basis.COMPUTATIONAL] * 2)
            branches.append((h_a, h_b, p_a * p_b, post))
    return branches


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def _as_density(value):
    if isinstance(value, QuantumState):
        return value.density()
    matrix = np.asarray(value, dtype=complex)
    if matrix.ndim == 1:
        return np.outer(matrix, matrix.conj())
    return matrix


def trace_distance(rho, sigma):
    """½·tr|ρ − σ| from the eigenvalues of the Hermitian difference."""
    a = _as_density(rho)
    b = _as_density(sigma)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cannot compare {a.shape} with {b.shape}")
    eigenvalues = np.linalg.eigvalsh((a - b + (a - b).conj().T) / 2)
    return float(min(1.0, max(0.0, 0.5 * np.sum(np.abs(eigenvalues)))))


def _sqrt_psd(matrix):
    values, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


def fidelity(left, right):
    """Squared fidelity; |⟨ψ|φ⟩|² for pure states, Uhlmann otherwise."""
    if left.dimension != right.dimension:
        raise DimensionMismatchError("fidelity of states with different dimensions")
    if left.is_pure and right.is_pure:
        return float(abs(np.vdot(left.data, right.data)) ** 2)
    if left.is_pure or right.is_pure:
        pure, mixed = (left, right) if left.is_pure else (right, left)
        return float(np.real(np.vdot(pure.data, mixed.data @ pure.data)))
    root = _sqrt_psd(left.data)
    inner = root @ right.data @ root
    values = np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0.0, None)
    return float(np.sum(np.sqrt(values)) ** 2)
