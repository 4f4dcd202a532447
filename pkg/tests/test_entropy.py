"""
Tests for the entropy service.

Tests:
    - Min-, max- and Rényi entropies on known distributions
    - Smooth min-entropy: water-filling against bisection
    - Chain rule and uncertainty relation checks
    - Min-entropy splitting witness and oracle
    - Privacy amplification bound and its exact left-hand side
    - Conditioning penalty and exact sender-security distance
"""
import math

import numpy as np
import pytest

from middleware.error_handlers import EntropyInputError, HypothesisViolation
from services.entropy import (
    JointDistribution, check_chain_rule, check_uncertainty_relation, conditioning_penalty,
    exact_sender_security_distance, max_entropy, min_entropy, pa_bound, pa_exact_lhs, renyi_entropy,
    sender_security_tail, smooth_min_entropy, smooth_min_entropy_bisection, split_choice_bit,
    split_choice_oracle,
)
from services.hashing import enumerate_family
from services.qsim import CqBranch, CqState, computational_state, random_pure_state
from utils.rng import DeterministicRNG


def _random_table(rng, shape):
    weights = rng.uniform_array(int(np.prod(shape))) ** 3
    return (weights / weights.sum()).reshape(shape)


# =============================================================================
# Basic Entropies
# =============================================================================

def test_min_entropy_of_uniform():
    assert min_entropy(JointDistribution.unconditional([0.25] * 4)) == pytest.approx(2.0)


def test_min_entropy_when_side_information_determines_x():
    d = JointDistribution(np.array([[0.5, 0.0], [0.0, 0.5]]))
    assert min_entropy(d) == pytest.approx(0.0)


def test_from_mapping_sorts_labels():
    d = JointDistribution.from_mapping({('b', 0): 0.5, ('a', 0): 0.25, ('a', 1): 0.25})
    assert np.allclose(d.table, [[0.25, 0.25], [0.5, 0.0]])
    assert min_entropy(d) == pytest.approx(-np.log2(0.75))


def test_max_entropy_counts_support():
    d = JointDistribution(np.array([[0.25, 0.5], [0.25, 0.0]]))
    assert max_entropy(d) == pytest.approx(1.0)


def test_renyi_orders():
    p = [0.5, 0.25, 0.25]
    assert renyi_entropy(p, 0) == pytest.approx(math.log2(3))
    assert renyi_entropy(p, 1) == pytest.approx(1.5)
    assert renyi_entropy(p, 2) == pytest.approx(-math.log2(0.375))
    assert renyi_entropy(p, math.inf) == pytest.approx(1.0)


def test_distribution_must_be_normalized():
    with pytest.raises(EntropyInputError):
        JointDistribution(np.array([[0.5, 0.2]]))


# =============================================================================
# Smooth Min-Entropy
# =============================================================================

def test_smooth_min_entropy_without_smoothing():
    d = JointDistribution(_random_table(DeterministicRNG(1), (8, 3)))
    assert smooth_min_entropy(d, 0.0) == pytest.approx(min_entropy(d))


def test_smoothing_removes_the_peak():
    d = JointDistribution.unconditional([0.5, 0.25, 0.25])
    assert smooth_min_entropy(d, 0.25) == pytest.approx(2.0)


def test_water_filling_matches_bisection():
    rng = DeterministicRNG(2)
    for i in range(20):
        d = JointDistribution(_random_table(rng.child(i), (8, 4)))
        for eps in (0.0, 0.01, 0.1, 0.3):
            assert smooth_min_entropy(d, eps) == pytest.approx(smooth_min_entropy_bisection(d, eps), abs=1e-6)


def test_smoothing_is_monotone():
    d = JointDistribution(_random_table(DeterministicRNG(3), (16, 2)))
    values = [smooth_min_entropy(d, eps) for eps in (0.0, 0.01, 0.05, 0.2)]
    assert values == sorted(values)


def test_smoothing_budget_range():
    with pytest.raises(EntropyInputError):
        smooth_min_entropy(JointDistribution.unconditional([1.0]), 1.0)


# =============================================================================
# Chain Rule and Uncertainty Relation
# =============================================================================

def test_chain_rule_on_random_tables():
    rng = DeterministicRNG(4)
    for i in range(25):
        d = JointDistribution(_random_table(rng.child(i), (16, 2)))
        check = check_chain_rule(d, 0.01, 0.01)
        assert check.holds
        assert check


def test_uncertainty_relation_on_random_states():
    rng = DeterministicRNG(5)
    for i in range(5):
        check = check_uncertainty_relation(random_pure_state(3, rng.child(i)), 3, 0.01)
        assert check.holds
        assert check.bound == pytest.approx((0.5 - 0.02) * 3)


def test_uncertainty_relation_size_limit():
    with pytest.raises(EntropyInputError):
        check_uncertainty_relation(computational_state('0' * 7), 7, 0.01)


# =============================================================================
# Min-Entropy Splitting
# =============================================================================

def test_split_picks_the_high_entropy_part():
    p = np.full((4, 1, 1), 0.25)
    result = split_choice_bit(p, 2.0, 0.01, 0.01)
    assert result.choice == (1,)
    assert result.holds


def test_split_hypothesis_violation():
    p = np.full((4, 1, 1), 0.25)
    with pytest.raises(HypothesisViolation):
        split_choice_bit(p, 3.0, 0.01, 0.01)


def test_split_oracle_dominates_witness():
    rng = DeterministicRNG(6)
    for i in range(10):
        p = _random_table(rng.child(i), (4, 4, 3))
        alpha = smooth_min_entropy(JointDistribution(p.reshape(16, 3)), 0.01)
        witness = split_choice_bit(p, alpha, 0.01, 0.01)
        _, achieved, bound = split_choice_oracle(p, alpha, 0.01, 0.01)
        assert achieved >= witness.achieved_bound - 1e-12
        assert achieved >= bound


def _flat_split_table(rng):
    weights = rng.uniform_array(16 * 16 * 3)
    return (weights / weights.sum()).reshape(16, 16, 3)


def _assert_split_bound_met(p):
    alpha = smooth_min_entropy(JointDistribution(p.reshape(256, 3)), 0.01)
    witness = split_choice_bit(p, alpha, 0.01, 0.25)
    _, achieved, bound = split_choice_oracle(p, alpha, 0.01, 0.25)
    assert bound > 0.0
    assert witness.bound == pytest.approx(bound)
    assert witness.holds
    assert witness.achieved_bound >= bound
    assert achieved >= witness.achieved_bound - 1e-12


def test_split_bound_positive_and_met():
    rng = DeterministicRNG(8)
    for i in range(5):
        _assert_split_bound_met(_flat_split_table(rng.child(i)))


@pytest.mark.slow
def test_split_bound_positive_and_met_many_instances():
    rng = DeterministicRNG(9)
    for i in range(200):
        _assert_split_bound_met(_flat_split_table(rng.child(i)))


# =============================================================================
# Privacy Amplification
# =============================================================================

def test_pa_bound_value():
    assert pa_bound(10.0, 1, 3, 0.01) == pytest.approx(0.5 * 2 ** -3 + 0.02)


def test_pa_exact_lhs_with_trivial_side_information():
    """Only the all-zero member of the 2→1 family is biased."""
    branches = tuple(CqBranch((x, 0), 0.25, computational_state('0')) for x in ('00', '01', '10', '11'))
    result = pa_exact_lhs(CqState(branches), enumerate_family(2, 1))
    assert result.members == 4
    assert result.distance == pytest.approx(0.125)
    assert result.distance <= pa_bound(2.0, 0, 1, 0.0)


def test_pa_bound_holds_with_quantum_side_information():
    rng = DeterministicRNG(7)
    table = _random_table(rng, (16, 2))
    branches = tuple(CqBranch((format(x, '04b'), u), float(table[x, u]), random_pure_state(1, rng.child(x, u)))
                     for x in range(16) for u in range(2))
    h = smooth_min_entropy(JointDistribution(table), 0.01)
    lhs = pa_exact_lhs(CqState(branches), enumerate_family(4, 2)).distance
    assert lhs <= pa_bound(h, 1, 2, 0.01)


# =============================================================================
# Penalties and Sender Security
# =============================================================================

def test_conditioning_penalty():
    assert conditioning_penalty(0.25) == pytest.approx(4.0)
    assert conditioning_penalty(1.0) == pytest.approx(0.0)
    with pytest.raises(EntropyInputError):
        conditioning_penalty(0.0)


def test_sender_security_tail():
    assert sender_security_tail(0.5, 8, 0.01, 0.01) == pytest.approx(0.5 * 2 ** -2 + 0.02 + 0.04)


def test_exact_sender_security_distance_for_computational_receiver():
    assert exact_sender_security_distance(2, 1, 'computational') == pytest.approx(0.28125)


def test_exact_sender_security_limits():
    with pytest.raises(EntropyInputError):
        exact_sender_security_distance(5, 1, 'random_bases')
    with pytest.raises(EntropyInputError):
        exact_sender_security_distance(2, 1, 'diagonal')
