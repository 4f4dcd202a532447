"""
Tests for the experiment harness.

Tests:
    - ExperimentSpec validation and parameter relations
    - Reports are byte-identical across runs and worker counts
    - Each experiment kind produces a passing summary on small inputs
    - Saved transcripts replay
    - Failed assertions surface in the exit status
"""
import pytest

from config.protocol import ProtocolConfig
from middleware.error_handlers import EXIT_ASSERTION, EXIT_OK, ConfigurationError
from services.experiments import ExperimentSpec, run_experiment
from services.replay import replay_transcript
from utils.file_utils import read_json_lines


def _run(kind, cfg, trials=1, **kwargs):
    return run_experiment(ExperimentSpec(kind, cfg, trials, **kwargs))


# =============================================================================
# ExperimentSpec Validation
# =============================================================================

def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        ExperimentSpec('ot7', ProtocolConfig())


def test_trial_count():
    with pytest.raises(ConfigurationError):
        ExperimentSpec('ot1', ProtocolConfig(), trials=0)


def test_unknown_option():
    with pytest.raises(ConfigurationError):
        ExperimentSpec('ot1', ProtocolConfig(), options={'colour': 'blue'})


@pytest.mark.parametrize('kind,options', [
    ('attack', {'attack': 'bribery'}),
    ('selftest', {'mode': 'three_verifier'}),
    ('ot4', {'device': 'oracle'}),
    ('bounds_check', {'suites': ['triangle']}),
    ('bounds_check', {'split_bits': 5}),
    ('bounds_check', {'split_epsilon_prime': 0.995}),
])
def test_invalid_option_values(kind, options):
    with pytest.raises(ConfigurationError):
        ExperimentSpec(kind, ProtocolConfig(), options=options)


def test_relations_use_expected_generate_rounds():
    cfg = ProtocolConfig(n=64, l=4, require_security_relations=True)
    ExperimentSpec('ot1', cfg)
    with pytest.raises(ConfigurationError) as excinfo:
        ExperimentSpec('ot4', cfg)
    assert 'parameter relation violated' in str(excinfo.value)


# =============================================================================
# Determinism
# =============================================================================

def test_reports_are_byte_identical(tmp_path):
    cfg = ProtocolConfig(n=16, l=2, seed=3)
    paths = [tmp_path / name for name in ('a.jsonl', 'b.jsonl', 'c.jsonl')]
    _run('ot1', cfg, 6, output=str(paths[0]))
    _run('ot1', cfg, 6, output=str(paths[1]))
    _run('ot1', cfg, 6, output=str(paths[2]), workers=3)
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()


def test_report_layout(tmp_path):
    path = tmp_path / 'ot1.jsonl'
    report = _run('ot1', ProtocolConfig(n=16, l=2), 3, output=str(path))
    lines = read_json_lines(str(path))
    assert [line['type'] for line in lines] == ['trial', 'trial', 'trial', 'summary']
    assert [line['trial'] for line in lines[:3]] == [0, 1, 2]
    assert lines[0]['config']['lambda'] == 0.01
    assert 'storage_k_max' in lines[-1]['relations']
    assert report.summary['success_rate'] == 1.0
    assert report.exit_status == EXIT_OK


# =============================================================================
# Kinds
# =============================================================================

def test_selftest_transcripts_replay(tmp_path, small_cfg):
    report = _run('selftest', small_cfg, 4, transcripts_dir=str(tmp_path / 'transcripts'))
    assert report.passed
    assert len(report.transcripts) == 4
    assert report.transcripts[0].endswith('selftest-trial00000.json')
    for path in report.transcripts:
        assert replay_transcript(path).protocol == 'selftest'


def test_ot1_transcripts_replay(tmp_path):
    report = _run('ot1', ProtocolConfig(n=24, l=2), 2, transcripts_dir=str(tmp_path))
    assert [replay_transcript(p).protocol for p in report.transcripts] == ['ot1', 'ot1']


def test_ot1_completeness_only_for_honest_sender():
    cfg = ProtocolConfig(n=24, l=2)
    assert _run('ot1', cfg, 2).summary['assertions'] == {'completeness': True}
    for sender in ('same_hashes', 'fixed_questions'):
        report = _run('ot1', cfg, 2, options={'sender': sender})
        assert report.summary['assertions'] == {}
        assert report.exit_status == EXIT_OK


def test_estimate_delta_synthetic():
    cfg = ProtocolConfig(n_estimation=1000, domain_bits=3)
    report = _run('estimate_delta', cfg, 2, options={'failure_rate': 0.3})
    assert report.passed
    assert all(r['within_tau'] for r in report.records)
    assert report.summary['delta_prime'] == pytest.approx(0.3, abs=cfg.tau)


def test_ot4_honest(ot4_cfg):
    report = _run('ot4', ot4_cfg, 2)
    assert report.passed
    assert report.summary['abort_rate'] == 0.0


def test_ot4_detects_classical_device():
    cfg = ProtocolConfig(n=256, l=2, domain_bits=3)
    report = _run('ot4', cfg, 2, options={'device': 'random_answers'})
    assert report.passed
    assert report.summary['assertions'] == {'detects_classical_device': True}


def test_unbounded_attack():
    report = _run('attack', ProtocolConfig(n=16, l=2), 2, options={'attack': 'unbounded'})
    assert report.passed
    assert report.summary['both_recovered']['rate'] == 1.0


def test_receiver_security_attack():
    cfg = ProtocolConfig(n=2, l=1, domain_bits=2)
    options = {'attack': 'receiver_security', 'protocol': 'ot4', 'scripts': ['honest', 'always_b']}
    report = _run('attack', cfg, 1, options=options)
    assert report.passed
    assert report.records[0]['tv_distance'] == {'honest': '0', 'always_b': '0'}


def test_bounds_check():
    report = _run('bounds_check', ProtocolConfig(seed=5), 3)
    assert report.passed
    assert set(report.records[0]) >= {'chain_rule', 'uncertainty', 'split', 'privacy_amplification'}
    assert report.summary['violations'] == {
        'chain_rule': 0, 'uncertainty': 0, 'split': 0, 'privacy_amplification': 0,
    }
    assert report.summary['assertions']['split_bound_positive']
    assert all(r['split']['bound'] > 0.0 for r in report.records)


def test_failed_assertion_sets_exit_status():
    cfg = ProtocolConfig(domain_bits=3)
    options = {'attack': 'bell_failure', 'expected_rate': 0.0}
    report = _run('attack', cfg, 20, options=options)
    assert not report.passed
    assert report.failed_assertions() == ['failure_rate_matches']
    assert report.exit_status == EXIT_ASSERTION


# =============================================================================
# Acceptance Runs
# =============================================================================

@pytest.mark.slow
def test_guessing_acceptance():
    report = _run('attack', ProtocolConfig(n=64, l=2, seed=1), 1000, options={'attack': 'guessing'})
    assert report.passed


@pytest.mark.slow
def test_bell_failure_acceptance():
    report = _run('attack', ProtocolConfig(domain_bits=3, seed=2), 2000, options={'attack': 'bell_failure'})
    assert report.passed
