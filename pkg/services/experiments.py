"""
Experiment Harness Service

Runs batches of seeded trials and emits JSON-lines reports:
- one record per trial, written in trial order
- a closing summary record with estimates and acceptance assertions
- optional per-trial transcripts for later replay

Every record embeds the resolved protocol configuration and the
parameter-relation diagnostics, so a report file is self-describing.
The same seed and experiment settings give byte-identical report files.

Author: DIOT Lab Development Team
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from config.protocol import ProtocolConfig
from middleware.error_handlers import EXIT_ASSERTION, EXIT_OK, ConfigurationError
from services.adversary import (
    CLASSICAL_KINDS, MEASUREMENT_POLICIES, OT1_SCRIPTS, OT4_SCRIPTS, classical_device_strategy,
    delayed_measurement_attack, forced_bell_round, guessing_report, guessing_trial, receiver_security_experiment,
    scripted_dishonest_sender, unbounded_receiver_attack,
)
from services.device import DeviceLink, HonestDevice, SyntheticFailureDevice
from services.entropy import (
    JointDistribution, check_chain_rule, check_uncertainty_relation, pa_bound, pa_exact_lhs, smooth_min_entropy,
    split_choice_bit, split_choice_oracle,
)
from services.hashing import enumerate_family
from services.ot_bell import HonestBellSource, HonestBellReceiver, run_bell_ot
from services.ot_device_independent import HonestDiReceiver, expected_generate_fraction, run_device_independent_ot
from services.qsim import CqBranch, CqState, computational_state, random_pure_state
from services.selftest import MODES, Verdict, estimate_delta, run_selftest_round
from services.transcript import Transcript, save_transcript
from utils.bits import from_int
from utils.file_utils import write_json_lines
from utils.rng import DeterministicRNG
from utils.stats import Estimate
from utils.validators import validate_int_range

logger = logging.getLogger(__name__)

KINDS = ('ot1', 'selftest', 'estimate_delta', 'ot4', 'attack', 'bounds_check')
ATTACKS = ('unbounded', 'guessing', 'delayed_measurement', 'bell_failure', 'receiver_security')
SUITES = ('chain_rule', 'uncertainty', 'split', 'privacy_amplification')

# Recognised options per kind, with defaults
OPTION_DEFAULTS = {
    'ot1': {'sender': 'honest'},
    'selftest': {'mode': 'single_verifier', 'device': 'honest'},
    'estimate_delta': {'device': 'synthetic', 'failure_rate': 0.2},
    'ot4': {'device': 'honest', 'sender': 'honest', 'min_abort_rate': 0.99},
    'attack': {
        'attack': 'unbounded',
        'capacity': None,
        'policy': 'random_bases',
        'use_trapdoors': True,
        'device': 'image_honest_bell_random',
        'expected_rate': 0.5,
        'protocol': 'ot4',
        'scripts': None,
    },
    'bounds_check': {'suites': list(SUITES), 'bits': 4, 'output_bits': 2, 'side_values': 2, 'z_values': 3,
                     'split_bits': 8, 'split_epsilon_prime': 0.25},
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: kind, resolved config, trial count and output targets."""

    kind: str
    config: ProtocolConfig
    trials: int = 1
    output: str = None
    options: dict = field(default_factory=dict)
    transcripts_dir: str = None
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind '{self.kind}' (expected one of {', '.join(KINDS)})")
        validate_int_range(self.trials, 'trials', low=1)
        validate_int_range(self.workers, 'workers', low=1)
        unknown = set(self.options) - set(OPTION_DEFAULTS[self.kind])
        if unknown:
            raise ConfigurationError(f"unknown option(s) for {self.kind}: {', '.join(sorted(unknown))}")
        self._validate_options()
        if self.config.require_security_relations:
            self.config.check_relations(self.effective_rounds())

    def option(self, name):
        return self.options.get(name, OPTION_DEFAULTS[self.kind][name])

    def effective_rounds(self):
        """Round count the parameter relations are evaluated at."""
        if self.kind == 'ot4':
            return self.config.n * expected_generate_fraction(self.config)
        return self.config.n

    def _validate_options(self):
        kind = self.kind
        if kind == 'ot1' and self.option('sender') not in OT1_SCRIPTS:
            raise ConfigurationError(f"unknown ot1 sender '{self.option('sender')}'")
        if kind == 'selftest':
            if self.option('mode') not in MODES:
                raise ConfigurationError(f"unknown self-test mode '{self.option('mode')}'")
            _check_device(self.option('device'))
        if kind == 'estimate_delta':
            device = self.option('device')
            if device != 'synthetic':
                _check_device(device)
            rate = self.option('failure_rate')
            if not 0.0 <= rate <= 1.0:
                raise ConfigurationError(f"failure_rate must lie in [0, 1], got {rate}")
        if kind == 'ot4':
            _check_device(self.option('device'))
            if self.option('sender') not in OT4_SCRIPTS:
                raise ConfigurationError(f"unknown ot4 sender '{self.option('sender')}'")
        if kind == 'attack':
            attack = self.option('attack')
            if attack not in ATTACKS:
                raise ConfigurationError(f"unknown attack '{attack}' (expected one of {', '.join(ATTACKS)})")
            if self.option('policy') not in MEASUREMENT_POLICIES:
                raise ConfigurationError(f"unknown measurement policy '{self.option('policy')}'")
            if attack == 'bell_failure' and self.option('device') not in CLASSICAL_KINDS:
                raise ConfigurationError(f"unknown classical device '{self.option('device')}'")
            if attack == 'receiver_security' and self.option('protocol') not in ('ot1', 'ot4'):
                raise ConfigurationError(f"unknown protocol '{self.option('protocol')}'")
        if kind == 'bounds_check':
            unknown = set(self.option('suites')) - set(SUITES)
            if unknown:
                raise ConfigurationError(f"unknown bounds suite(s): {', '.join(sorted(unknown))}")
            split_bits = self.option('split_bits')
            if split_bits % 2 or not 2 <= split_bits <= 10:
                raise ConfigurationError(f"split_bits must be an even number in [2, 10], got {split_bits}")
            eps_prime = self.option('split_epsilon_prime')
            if not 0.0 < eps_prime < 1.0 - self.config.epsilon:
                raise ConfigurationError(f"split_epsilon_prime must lie in (0, 1 - epsilon), got {eps_prime}")


@dataclass
class ExperimentReport:
    records: list
    summary: dict
    transcripts: list = field(default_factory=list)

    @property
    def passed(self):
        return self.summary['passed']

    @property
    def exit_status(self):
        return EXIT_OK if self.passed else EXIT_ASSERTION

    def failed_assertions(self):
        return sorted(name for name, ok in self.summary['assertions'].items() if not ok)


def _check_device(name):
    if name != 'honest' and name not in CLASSICAL_KINDS:
        raise ConfigurationError(f"unknown device '{name}'")


def _device(name):
    if name == 'honest':
        return HonestDevice()
    return classical_device_strategy(name)


def _trial_rng(cfg, trial):
    return DeterministicRNG(cfg.seed).child(trial)


# ---------------------------------------------------------------------------
# Trials: (spec, t) -> (record, transcript or None)
# ---------------------------------------------------------------------------

def _ot1_trial(spec, t):
    cfg = spec.config
    rng = _trial_rng(cfg, t)
    receiver = HonestBellReceiver(rng.child('receiver', 'shared').bit())
    sender = scripted_dishonest_sender(spec.option('sender'), 'ot1')
    outcome, transcript = run_bell_ot(cfg, sender, receiver, HonestBellSource(), rng)
    record = {
        'choice_bit': outcome.choice_bit,
        'success': outcome.success,
        'I0': len(outcome.index_sets['I0']),
        'I1': len(outcome.index_sets['I1']),
    }
    return record, transcript


def _selftest_trial(spec, t):
    cfg = spec.config
    device = _device(spec.option('device'))
    record = run_selftest_round(spec.option('mode'), cfg, device, _trial_rng(cfg, t), index=t)
    transcript = Transcript('selftest', cfg.to_dict())
    transcript.records = [record.to_dict()]
    transcript.derived = {'passes': int(record.w is Verdict.PASS)}
    row = record.to_dict()
    return {k: row[k] for k in ('theta_a', 'theta_b', 'ct', 'ct_b', 'x', 'y', 'rt', 'w')}, transcript


def _delta_device(spec):
    name = spec.option('device')
    if name == 'synthetic':
        return SyntheticFailureDevice(spec.option('failure_rate')), spec.option('failure_rate')
    return _device(name), (0.0 if name == 'honest' else None)


def _estimate_delta_trial(spec, t):
    cfg = spec.config
    device, delta = _delta_device(spec)
    estimate = estimate_delta(device, cfg.n_estimation, cfg, _trial_rng(cfg, t))
    record = {
        'delta_prime': estimate.delta_prime,
        'failures': estimate.failures,
        'rounds': estimate.rounds,
        'confidence': estimate.confidence,
    }
    if delta is not None:
        record['within_tau'] = abs(estimate.delta_prime - delta) < cfg.tau
    return record, None


def _ot4_trial(spec, t):
    cfg = spec.config
    rng = _trial_rng(cfg, t)
    receiver = HonestDiReceiver(rng.child('receiver', 'shared').bit())
    sender = scripted_dishonest_sender(spec.option('sender'), 'ot4')
    outcome, transcript = run_device_independent_ot(cfg, sender, receiver, _device(spec.option('device')), rng)
    derived = transcript.derived
    record = {
        'choice_bit': outcome.choice_bit,
        'aborted': outcome.aborted,
        'reason': outcome.reason,
        'success': outcome.success,
        'failures': derived.get('failures'),
        'tested': derived.get('tested'),
        'I_tilde': len(outcome.index_sets.get('I_tilde', [])),
    }
    return record, transcript


def _attack_trial(spec, t):
    cfg = spec.config
    rng = _trial_rng(cfg, t)
    attack = spec.option('attack')
    capacity = spec.option('capacity')
    if attack == 'unbounded':
        return unbounded_receiver_attack(cfg, rng, capacity), None
    if attack == 'guessing':
        capacity = 0 if capacity is None else capacity
        chosen, other = guessing_trial(cfg, capacity, spec.option('policy'), rng)
        return {'chosen_hit': chosen, 'other_hit': other}, None
    if attack == 'delayed_measurement':
        return delayed_measurement_attack(cfg, rng, spec.option('use_trapdoors')), None
    if attack == 'bell_failure':
        device = classical_device_strategy(spec.option('device'))
        verdict = forced_bell_round(device, cfg, rng, t, DeviceLink())
        return {'failed': verdict is Verdict.FAIL}, None
    protocol = spec.option('protocol')
    scripts = spec.option('scripts') or list(OT4_SCRIPTS if protocol == 'ot4' else OT1_SCRIPTS)
    distances = {}
    for script in scripts:
        report = receiver_security_experiment(cfg, script, protocol, seed=cfg.seed + t)
        distances[script] = str(report['tv_distance'])
    return {'protocol': protocol, 'tv_distance': distances}, None


def _random_table(rng, shape, skew=3):
    """Random joint distribution; ``skew`` > 1 spreads min-entropy between instances."""
    weights = rng.uniform_array(int(np.prod(shape))) ** skew
    return (weights / weights.sum()).reshape(shape)


def _chain_rule_case(spec, rng):
    cfg = spec.config
    d = JointDistribution(_random_table(rng, (1 << spec.option('bits'), spec.option('side_values'))))
    check = check_chain_rule(d, cfg.epsilon, cfg.epsilon_prime)
    return {'lhs': check.lhs, 'rhs': check.rhs, 'holds': check.holds}


def _uncertainty_case(spec, rng):
    bits = spec.option('bits')
    check = check_uncertainty_relation(random_pure_state(bits, rng), bits, spec.config.lambda_)
    return {'h_eps': check.h_eps, 'bound': check.bound, 'holds': check.holds}


def _split_case(spec, rng):
    cfg = spec.config
    eps_prime = spec.option('split_epsilon_prime')
    half = 1 << (spec.option('split_bits') // 2)
    p = _random_table(rng, (half, half, spec.option('z_values')), skew=1)
    alpha = smooth_min_entropy(JointDistribution(p.reshape(half * half, -1)), cfg.epsilon)
    witness = split_choice_bit(p, alpha, cfg.epsilon, eps_prime)
    _, achieved, bound = split_choice_oracle(p, alpha, cfg.epsilon, eps_prime)
    return {
        'alpha': alpha,
        'bound': bound,
        'witness': witness.achieved_bound,
        'oracle': achieved,
        'informative': bound > 0.0,
        'holds': witness.holds and achieved >= bound - 1e-9,
    }


def _privacy_amplification_case(spec, rng, t):
    cfg = spec.config
    bits, l, sides = spec.option('bits'), spec.option('output_bits'), spec.option('side_values')
    q = t % 3
    table = _random_table(rng, (1 << bits, sides))
    branches = []
    for x in range(1 << bits):
        for u in range(sides):
            state = random_pure_state(q, rng) if q else computational_state('0')
            branches.append(CqBranch((from_int(x, bits), u), float(table[x, u]), state))
    h = smooth_min_entropy(JointDistribution(table), cfg.epsilon)
    lhs = pa_exact_lhs(CqState(tuple(branches)), enumerate_family(bits, l)).distance
    bound = pa_bound(h, q, l, cfg.epsilon)
    return {'q': q, 'h_smooth': h, 'lhs': lhs, 'bound': bound, 'holds': lhs <= bound + 1e-9}


def _bounds_check_trial(spec, t):
    rng = _trial_rng(spec.config, t)
    cases = {
        'chain_rule': lambda: _chain_rule_case(spec, rng.child(0)),
        'uncertainty': lambda: _uncertainty_case(spec, rng.child(1)),
        'split': lambda: _split_case(spec, rng.child(2)),
        'privacy_amplification': lambda: _privacy_amplification_case(spec, rng.child(3), t),
    }
    return {suite: cases[suite]() for suite in spec.option('suites')}, None


_TRIALS = {
    'ot1': _ot1_trial,
    'selftest': _selftest_trial,
    'estimate_delta': _estimate_delta_trial,
    'ot4': _ot4_trial,
    'attack': _attack_trial,
    'bounds_check': _bounds_check_trial,
}


# ---------------------------------------------------------------------------
# Summaries: (spec, rows) -> (statistics, assertions)
# ---------------------------------------------------------------------------

def _count(rows, key):
    return sum(1 for row in rows if row.get(key))


def _ot1_summary(spec, rows):
    success = Estimate(_count(rows, 'success'), len(rows))
    stats = {'success': success.to_dict(), 'success_rate': success.rate}
    if spec.option('sender') == 'honest':
        return stats, {'completeness': success.successes == len(rows)}
    return stats, {}


def _selftest_summary(spec, rows):
    passes = Estimate(sum(1 for r in rows if r['w'] == Verdict.PASS.value), len(rows))
    stats = {'passes': passes.to_dict(), 'pass_rate': passes.rate}
    if spec.option('device') == 'honest':
        return stats, {'honest_device_passes': passes.successes == len(rows)}
    return stats, {}


def _estimate_delta_summary(spec, rows):
    stats = {
        'delta_prime': float(np.mean([r['delta_prime'] for r in rows])),
        'confidence': rows[0]['confidence'],
    }
    if 'within_tau' not in rows[0]:
        return stats, {}
    coverage = Estimate(_count(rows, 'within_tau'), len(rows))
    stats['coverage'] = coverage.to_dict()
    return stats, {'chernoff_coverage': coverage.rate >= stats['confidence']}


def _ot4_summary(spec, rows):
    cfg = spec.config
    aborts = Estimate(_count(rows, 'aborted'), len(rows))
    completed = [r for r in rows if not r['aborted']]
    successes = _count(completed, 'success')
    stats = {
        'aborts': aborts.to_dict(),
        'abort_rate': aborts.rate,
        'success_among_completed': Estimate(successes, len(completed)).to_dict(),
        'mean_I_tilde': float(np.mean([r['I_tilde'] for r in completed])) if completed else None,
        'expected_I_tilde': cfg.n * expected_generate_fraction(cfg),
    }
    if spec.option('sender') != 'honest':
        return stats, {}
    if spec.option('device') == 'honest':
        return stats, {'no_aborts': aborts.successes == 0, 'correct_outputs': successes == len(completed)}
    return stats, {'detects_classical_device': aborts.rate >= spec.option('min_abort_rate')}


def _attack_summary(spec, rows):
    cfg = spec.config
    attack = spec.option('attack')
    if attack == 'unbounded':
        both = Estimate(_count(rows, 'both_recovered'), len(rows))
        assertions = {}
        if spec.option('capacity') is None or spec.option('capacity') >= cfg.n:
            assertions['both_strings_recovered'] = both.successes == len(rows)
        return {'both_recovered': both.to_dict()}, assertions
    if attack == 'guessing':
        capacity = spec.option('capacity') or 0
        report = guessing_report(cfg, capacity, spec.option('policy'), _count(rows, 'chosen_hit'),
                                 _count(rows, 'other_hit'), len(rows), cfg.seed)
        return report, {'other_string_at_guessing_rate': report['consistent_with_target']}
    if attack == 'delayed_measurement':
        completed = [r for r in rows if not r['aborted']]
        s0 = Estimate(_count(completed, 's0_recovered'), len(completed))
        s1 = Estimate(_count(completed, 's1_recovered'), len(completed))
        stats = {
            's0_recovered': s0.to_dict(),
            's1_recovered': s1.to_dict(),
            'mean_predicted_s0': float(np.mean([r['predicted_s0_success'] for r in completed])) if completed else None,
        }
        assertions = {'s1_recovered': s1.successes == len(completed)}
        if spec.option('use_trapdoors'):
            assertions['s0_recovered'] = s0.successes == len(completed)
        return stats, assertions
    if attack == 'bell_failure':
        failures = Estimate(_count(rows, 'failed'), len(rows))
        expected = spec.option('expected_rate')
        return {'failures': failures.to_dict(), 'expected_rate': expected}, \
            {'failure_rate_matches': failures.consistent_with(expected)}
    nonzero = sorted({script for r in rows for script, tv in r['tv_distance'].items() if tv != '0'})
    return {'nonzero_scripts': nonzero}, {'perfect_receiver_security': not nonzero}


def _bounds_check_summary(spec, rows):
    violations = {suite: sum(1 for r in rows if not r[suite]['holds']) for suite in spec.option('suites')}
    assertions = {f'{suite}_holds': count == 0 for suite, count in violations.items()}
    if 'split' in violations:
        assertions['split_bound_positive'] = all(r['split']['informative'] for r in rows)
    return {'violations': violations}, assertions


_SUMMARIES = {
    'ot1': _ot1_summary,
    'selftest': _selftest_summary,
    'estimate_delta': _estimate_delta_summary,
    'ot4': _ot4_summary,
    'attack': _attack_summary,
    'bounds_check': _bounds_check_summary,
}


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def _transcript_path(spec, t):
    return os.path.join(spec.transcripts_dir, f'{spec.kind}-trial{t:05d}.json')


def run_experiment(spec):
    """
    Execute every trial of an experiment and write its report.

    Trials run on a thread pool of ``spec.workers``; records come back in
    trial order whatever the completion order.

    Args:
        spec: ExperimentSpec

    Returns:
        ExperimentReport; ``exit_status`` is 0 when every assertion holds
    """
    cfg = spec.config
    envelope = {'kind': spec.kind, 'config': cfg.to_dict(), 'relations': cfg.relations(spec.effective_rounds())}
    options = {name: spec.option(name) for name in OPTION_DEFAULTS[spec.kind]}
    logger.info(f"running {spec.kind}: {spec.trials} trial(s), seed {cfg.seed}, {spec.workers} worker(s)")
    cfg.log_relations(spec.effective_rounds())

    trial = partial(_TRIALS[spec.kind], spec)
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        results = list(pool.map(trial, range(spec.trials)))

    rows = [row for row, _ in results]
    records = [{'type': 'trial', 'trial': t, **envelope, **row} for t, row in enumerate(rows)]
    stats, assertions = _SUMMARIES[spec.kind](spec, rows)
    summary = {
        'type': 'summary',
        'trials': spec.trials,
        'seed': cfg.seed,
        'options': options,
        **envelope,
        **stats,
        'assertions': assertions,
        'passed': all(assertions.values()),
    }

    saved = []
    if spec.transcripts_dir:
        for t, (_, transcript) in enumerate(results):
            if transcript is not None:
                path = _transcript_path(spec, t)
                save_transcript(transcript, path)
                saved.append(path)
    if spec.output:
        write_json_lines(spec.output, records + [summary])
        logger.info(f"report written to {spec.output}")

    report = ExperimentReport(records, summary, saved)
    if report.passed:
        logger.info(f"{spec.kind}: all {len(assertions)} assertion(s) hold")
    else:
        logger.warning(f"{spec.kind}: failed assertion(s): {', '.join(report.failed_assertions())}")
    return report
