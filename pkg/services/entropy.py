"""
Entropy Service

Exact entropic quantities on small finite distributions and numerical
checks of the inequalities the OT security argument relies on:
- min-, max-, Rényi and smooth min-entropy (conditional forms)
- chain rule for smooth min-entropy
- uncertainty relation for conjugate-basis measurements
- min-entropy splitting
- privacy amplification bound and its exact left-hand side
- exact sender-security distance for tiny bounded-storage instances

Logarithms are base 2.

Author: DIOT Lab Development Team
"""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from config.protocol import uncertainty_epsilon
from middleware.error_handlers import EntropyInputError, HypothesisViolation
from services.qsim import Basis, outcome_distribution
from utils import gf2
from utils.bits import from_int

logger = logging.getLogger(__name__)

_TOLERANCE = 1e-9
MAX_PA_X_BITS = 6
MAX_PA_E_DIM = 4
MAX_UNCERTAINTY_QUBITS = 6


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """
    P(x, y) as a |X|×|Y| table. A single-column table is the unconditional
    form (Y trivial).
    """

    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.ndim == 1:
            table = table.reshape(-1, 1)
        if table.ndim != 2 or table.size == 0:
            raise EntropyInputError(f"expected a 2-D probability table, got shape {table.shape}")
        if np.any(table < -_TOLERANCE):
            raise EntropyInputError("negative probability")
        table = np.clip(table, 0.0, None)
        total = float(table.sum())
        if total <= 0.0:
            raise EntropyInputError("empty support")
        if abs(total - 1.0) > 1e-9:
            raise EntropyInputError(f"probabilities sum to {total}")
        object.__setattr__(self, 'table', table)

    @classmethod
    def unconditional(cls, probabilities):
        return cls(np.asarray(probabilities, dtype=float).reshape(-1, 1))

    @classmethod
    def from_mapping(cls, mapping):
        """Build from {(x, y): p}; labels are sorted."""
        xs = sorted({x for x, _ in mapping})
        ys = sorted({y for _, y in mapping})
        table = np.zeros((len(xs), len(ys)))
        for (x, y), p in mapping.items():
            table[xs.index(x), ys.index(y)] += p
        return cls(table)

    @property
    def p_y(self):
        return self.table.sum(axis=0)

    def joint(self):
        """(X, Y) viewed as one variable with trivial conditioning."""
        return JointDistribution(self.table.reshape(-1, 1))

    def y_marginal(self):
        return JointDistribution(self.p_y.reshape(-1, 1))


@dataclass(frozen=True)
class SplitResult:
    choice: tuple
    achieved_bound: float
    bound: float
    hypothesis: float
    holds: bool


@dataclass(frozen=True)
class ChainRuleCheck:
    lhs: float
    rhs: float
    holds: bool

    def __bool__(self):
        return self.holds


@dataclass(frozen=True)
class UncertaintyCheck:
    h_eps: float
    bound: float
    epsilon: float
    holds: bool


@dataclass(frozen=True)
class PaResult:
    distance: float
    stderr: float
    members: int
    exhaustive: bool


def _ratios(d):
    p_y = d.p_y
    mask = d.table > 0
    weights = d.table[mask]
    denominators = np.broadcast_to(p_y, d.table.shape)[mask]
    return weights, denominators


def min_entropy(d):
    """H∞(X|Y) = −log max_y max_x P(x|y)."""
    weights, denominators = _ratios(d)
    return float(-math.log2(np.max(weights / denominators)))


def max_entropy(d):
    """H0(X|Y) = max_y log |supp P_{X|Y=y}|."""
    support = (d.table > 0).sum(axis=0)
    if support.max() == 0:
        raise EntropyInputError("empty support")
    return float(math.log2(support.max()))


def renyi_entropy(probabilities, alpha):
    """Rényi entropy of order α ∈ [0, ∞] of an unconditional distribution."""
    p = np.asarray(probabilities, dtype=float).reshape(-1)
    p = p[p > 0]
    if p.size == 0:
        raise EntropyInputError("empty support")
    if alpha < 0:
        raise EntropyInputError(f"Rényi order must be non-negative, got {alpha}")
    if alpha == 0:
        return float(math.log2(p.size))
    if alpha == 1:
        return float(-np.sum(p * np.log2(p)))
    if math.isinf(alpha):
        return float(-math.log2(p.max()))
    return float(math.log2(np.sum(p ** alpha)) / (1.0 - alpha))


def _water_level(weights, denominators, eps):
    """Smallest cap t with Σ max(0, w − t·q) ≤ ε."""
    ratios = weights / denominators
    order = np.argsort(-ratios, kind='stable')
    r = ratios[order]
    cum_w = np.cumsum(weights[order])
    cum_q = np.cumsum(denominators[order])
    for k in range(r.size):
        level = (cum_w[k] - eps) / cum_q[k]
        next_ratio = r[k + 1] if k + 1 < r.size else 0.0
        if level >= next_ratio:
            return float(level)
    return float((cum_w[-1] - eps) / cum_q[-1])


def _check_budget(eps):
    if not 0.0 <= eps < 1.0:
        raise EntropyInputError(f"smoothing budget must lie in [0, 1), got {eps}")


def smooth_min_entropy(d, eps):
    """
    H^ε∞(X|Y) by water-filling.

    The event may remove at most ε of the mass; P_Y stays fixed in the
    denominator. The optimum caps every ratio P(x,y)/P_Y(y) at a common
    level t, so the result is −log t for the smallest affordable t.

    Args:
        d: JointDistribution
        eps: smoothing budget in [0, 1)

    Returns:
        float
    """
    _check_budget(eps)
    weights, denominators = _ratios(d)
    return float(-math.log2(_water_level(weights, denominators, eps)))


def smooth_min_entropy_bisection(d, eps, iterations=200):
    """Independent bisection on the cap level, used to cross-check water-filling."""
    _check_budget(eps)
    weights, denominators = _ratios(d)
    low, high = 0.0, float(np.max(weights / denominators))
    for _ in range(iterations):
        mid = (low + high) / 2
        trimmed = np.sum(np.clip(weights - mid * denominators, 0.0, None))
        if trimmed <= eps:
            high = mid
        else:
            low = mid
    return float(-math.log2(high))


def check_chain_rule(d, eps, eps_prime):
    """
    H^{ε+ε′}∞(X|Y) > H^ε∞(XY) − H0(Y) − log(1/ε′).

    Returns:
        ChainRuleCheck (truthy when the inequality holds)
    """
    if eps <= 0 or eps_prime <= 0:
        raise EntropyInputError("ε and ε′ must be positive")
    _check_budget(eps + eps_prime)
    lhs = smooth_min_entropy(d, eps + eps_prime)
    rhs = smooth_min_entropy(d.joint(), eps) - max_entropy(d.y_marginal()) - math.log2(1.0 / eps_prime)
    return ChainRuleCheck(lhs, rhs, lhs > rhs - _TOLERANCE)


def check_uncertainty_relation(state, n, lam):
    """
    H^ε∞(X|Θ) ≥ (1/2 − 2λ)n for outcomes of measuring ``state`` in uniform Θ.

    Args:
        state: n-qubit QuantumState
        n: number of qubits (≤ 6)
        lam: λ in (0, 1/2)

    Returns:
        UncertaintyCheck
    """
    if n > MAX_UNCERTAINTY_QUBITS:
        raise EntropyInputError(f"n={n} exceeds the exhaustive limit of {MAX_UNCERTAINTY_QUBITS}")
    if state.qubit_count != n:
        raise EntropyInputError(f"state has {state.qubit_count} qubits, expected {n}")
    if not 0.0 < lam < 0.5:
        raise EntropyInputError(f"λ must lie in (0, 1/2), got {lam}")
    columns = []
    for theta in itertools.product((Basis.COMPUTATIONAL, Basis.HADAMARD), repeat=n):
        dist = outcome_distribution(state, list(theta))
        columns.append([dist[from_int(x, n)] / (1 << n) for x in range(1 << n)])
    table = np.array(columns).T
    table = table / table.sum()
    epsilon = uncertainty_epsilon(lam, n)
    h_eps = smooth_min_entropy(JointDistribution(table), min(epsilon, 1.0 - 1e-15))
    bound = (0.5 - 2 * lam) * n
    return UncertaintyCheck(h_eps, bound, epsilon, h_eps >= bound - _TOLERANCE)


def _split_table(p, choice):
    nx0, nx1, nz = p.shape
    size = max(nx0, nx1)
    table = np.zeros((size, nz))
    for z in range(nz):
        if choice[z] == 1:
            table[:nx0, z] = p[:, :, z].sum(axis=1)
        else:
            table[:nx1, z] = p[:, :, z].sum(axis=0)
    return JointDistribution(table)


def _split_inputs(distribution, alpha, eps, eps_prime):
    p = np.asarray(distribution, dtype=float)
    if p.ndim != 3:
        raise EntropyInputError(f"expected a (X0, X1, Z) table, got shape {p.shape}")
    if eps_prime <= 0:
        raise EntropyInputError("ε′ must be positive")
    _check_budget(eps + eps_prime)
    nx0, nx1, nz = p.shape
    hypothesis = smooth_min_entropy(JointDistribution(p.reshape(nx0 * nx1, nz)), eps)
    if hypothesis < alpha - _TOLERANCE:
        raise HypothesisViolation(f"H^ε∞(X0X1|Z) = {hypothesis:.6f} < α = {alpha}")
    bound = alpha / 2.0 - 1.0 - math.log2(1.0 / eps_prime)
    return p, hypothesis, bound


def split_choice_bit(distribution, alpha, eps, eps_prime):
    """
    Threshold witness for min-entropy splitting.

    C(z) = 1 when X0 keeps at least α/2 bits of min-entropy given Z = z
    (so X_{1−C} = X0), otherwise C(z) = 0.

    Args:
        distribution: array P[x0, x1, z]
        alpha: hypothesis level for H^ε∞(X0X1|Z)
        eps, eps_prime: smoothing budgets

    Returns:
        SplitResult; ``holds`` reports whether
        H^{ε+ε′}∞(X_{1−C}|ZC) ≥ α/2 − 1 − log(1/ε′)
    """
    p, hypothesis, bound = _split_inputs(distribution, alpha, eps, eps_prime)
    p_z = p.sum(axis=(0, 1))
    choice = []
    for z in range(p.shape[2]):
        if p_z[z] <= 0:
            choice.append(0)
            continue
        x0_given_z = p[:, :, z].sum(axis=1) / p_z[z]
        choice.append(1 if -math.log2(x0_given_z.max()) >= alpha / 2.0 else 0)
    achieved = smooth_min_entropy(_split_table(p, choice), eps + eps_prime)
    holds = achieved >= bound - _TOLERANCE
    if not holds:
        logger.warning(f"threshold witness misses the splitting bound: {achieved:.4f} < {bound:.4f}")
    return SplitResult(tuple(choice), achieved, bound, hypothesis, holds)


def split_choice_oracle(distribution, alpha, eps, eps_prime):
    """Best deterministic C: Z → {0,1} by exhaustive search; returns (choice, achieved, bound)."""
    p, _, bound = _split_inputs(distribution, alpha, eps, eps_prime)
    best = None
    for choice in itertools.product((0, 1), repeat=p.shape[2]):
        achieved = smooth_min_entropy(_split_table(p, choice), eps + eps_prime)
        if best is None or achieved > best[1]:
            best = (choice, achieved)
    return best[0], best[1], bound


def pa_bound(h_smooth, q, l, eps):
    """½·2^{−(h − q − ℓ)/2} + 2ε."""
    return 0.5 * 2.0 ** (-(h_smooth - q - l) / 2.0) + 2.0 * eps


def _trace_norm(matrix):
    return float(np.sum(np.abs(np.linalg.eigvalsh((matrix + matrix.conj().T) / 2))))


def pa_exact_lhs(state, family, exhaustive=True):
    """
    Exact distance between (F(X), F, U, E) and (uniform, F, U, E).

    Args:
        state: CqState with branch values (x_bits, u)
        family: iterable of HashFunction, equally weighted
        exhaustive: whether ``family`` is the whole family (stderr is 0)

    Returns:
        PaResult with the family average and its standard error
    """
    blocks = state.blocks()
    xs = sorted({x for x, _ in blocks})
    n = len(xs[0])
    if n > MAX_PA_X_BITS:
        raise EntropyInputError(f"X alphabet 2^{n} exceeds 2^{MAX_PA_X_BITS}")
    dim = 1 << state.quantum_qubits
    if dim > MAX_PA_E_DIM:
        raise EntropyInputError(f"E dimension {dim} exceeds {MAX_PA_E_DIM}")
    us = sorted({u for _, u in blocks})
    zero = np.zeros((dim, dim), dtype=complex)
    marginal = {u: sum((blocks.get((x, u), zero) for x in xs), zero) for u in us}
    distances = []
    for f in family:
        l = f.output_bits
        outputs = {x: f(x) for x in xs}
        total = 0.0
        for u in us:
            grouped = {}
            for x in xs:
                if (x, u) in blocks:
                    s = outputs[x]
                    grouped[s] = grouped.get(s, zero) + blocks[(x, u)]
            ideal = marginal[u] / (1 << l)
            for s in range(1 << l):
                total += 0.5 * _trace_norm(grouped.get(from_int(s, l), zero) - ideal)
        distances.append(total)
    if not distances:
        raise EntropyInputError("empty hash family")
    values = np.array(distances)
    stderr = 0.0 if exhaustive or values.size < 2 else float(values.std(ddof=1) / math.sqrt(values.size))
    return PaResult(float(values.mean()), stderr, int(values.size), exhaustive)


def conditioning_penalty(pr_not_abort):
    """Min-entropy lost by conditioning on not aborting: 2·log(1/Pr(Z=1))."""
    if not 0.0 < pr_not_abort <= 1.0:
        raise EntropyInputError(f"Pr(Z=1) must lie in (0, 1], got {pr_not_abort}")
    return 2.0 * math.log2(1.0 / pr_not_abort)


def sender_security_tail(kappa, n, eps, eps_prime):
    """½·2^{−κn/2} + 2ε + 4ε′."""
    return 0.5 * 2.0 ** (-kappa * n / 2.0) + 2.0 * eps + 4.0 * eps_prime


def _mean_span_fraction(rows, l):
    """E over uniform rows×ℓ matrices of 2^{rank − ℓ}."""
    if rows == 0:
        return 2.0 ** (-l)
    total = 0.0
    count = 0
    for entries in itertools.product((0, 1), repeat=rows * l):
        matrix = np.array(entries, dtype=np.uint8).reshape(rows, l)
        total += 2.0 ** (gf2.rank(matrix) - l)
        count += 1
    return total / count


SENDER_POLICIES = ('random_bases', 'computational', 'hadamard')


def exact_sender_security_distance(n, l, policy):
    """
    Exact sender-security distance for a storage-free receiver in the
    Bell-pair OT at micro scale.

    The receiver measures every qubit before the bases are announced. For
    positions it measured in the wrong basis its key bits are uniform, so
    S_{1−C′} is uniform on a coset of the row span of the hash matrix
    restricted to those positions, giving a local distance of
    1 − 2^{rank − ℓ}. C′ is the index whose positions the receiver matched
    more often (ties → 0).

    Args:
        n: rounds (≤ 4)
        l: output bits
        policy: 'random_bases', 'computational' or 'hadamard'

    Returns:
        float distance
    """
    if n > 4:
        raise EntropyInputError("exact sender-security distance is limited to n ≤ 4")
    if policy not in SENDER_POLICIES:
        raise EntropyInputError(f"unknown policy '{policy}'")
    if l > n:
        raise EntropyInputError(f"ℓ={l} exceeds n={n}")
    span = {k: _mean_span_fraction(k, l) for k in range(n + 1)}
    if policy == 'random_bases':
        receiver_bases = list(itertools.product((0, 1), repeat=n))
    else:
        fixed = 0 if policy == 'computational' else 1
        receiver_bases = [(fixed,) * n]
    total = 0.0
    count = 0
    for x in itertools.product((0, 1), repeat=n):
        for y in receiver_bases:
            matched = [0, 0]
            missed = [0, 0]
            for xi, yi in zip(x, y):
                if xi == yi:
                    matched[xi] += 1
                else:
                    missed[xi] += 1
            c_prime = 1 if matched[1] > matched[0] else 0
            total += 1.0 - span[missed[1 - c_prime]]
            count += 1
    return total / count
