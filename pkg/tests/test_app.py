"""
Tests for the command-line application.

Tests:
    - Experiment commands write reports and exit 0
    - Configuration and transcript errors exit 2
    - Failed assertions and replay mismatches exit 1
    - An unusable log file is reported, not swallowed
"""
import json
import logging

import pytest

from app import create_app
from config.settings import TestingConfig
from middleware.error_handlers import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK
from utils.file_utils import canonical_json, read_json, read_json_lines, write_atomic


@pytest.fixture
def app():
    return create_app(TestingConfig)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'protocol': {'n': 16, 'l': 2}, 'experiment': {'trials': 2}}), encoding='utf-8')
    return path


# =============================================================================
# Experiment Commands
# =============================================================================

def test_ot1_command(app, config_file, tmp_path):
    out = tmp_path / 'report.jsonl'
    assert app.run(['ot1', '--config', str(config_file), '--seed', '4', '--out', str(out)]) == EXIT_OK
    lines = read_json_lines(str(out))
    assert len(lines) == 3
    assert lines[-1]['seed'] == 4
    assert lines[-1]['config']['n'] == 16


def test_option_flags(app, tmp_path):
    out = tmp_path / 'attack.jsonl'
    argv = ['attack', '--trials', '2', '--out', str(out), '--option', 'attack=unbounded',
            '--option', 'colour=blue']
    assert app.run(argv[:7]) == EXIT_OK
    assert read_json_lines(str(out))[-1]['options']['attack'] == 'unbounded'
    assert app.run(argv) == EXIT_CONFIG


def test_missing_config_file(app, tmp_path):
    assert app.run(['ot1', '--config', str(tmp_path / 'absent.json')]) == EXIT_CONFIG


def test_invalid_protocol_value(app, tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'protocol': {'n': -3}}), encoding='utf-8')
    assert app.run(['ot1', '--config', str(path), '--out', str(tmp_path / 'r.jsonl')]) == EXIT_CONFIG


def test_failed_assertion_exit(app, tmp_path):
    argv = ['attack', '--trials', '20', '--out', str(tmp_path / 'r.jsonl'),
            '--option', 'attack=bell_failure', '--option', 'expected_rate=0.0']
    assert app.run(argv) == EXIT_ASSERTION


def test_unknown_command(app):
    with pytest.raises(SystemExit) as excinfo:
        app.run(['ot9'])
    assert excinfo.value.code == 2


# =============================================================================
# Replay Command
# =============================================================================

def _transcripts(app, tmp_path):
    directory = tmp_path / 'transcripts'
    argv = ['ot1', '--trials', '1', '--out', str(tmp_path / 'r.jsonl'), '--transcripts', str(directory)]
    assert app.run(argv) == EXIT_OK
    return directory / 'ot1-trial00000.json'


def test_replay_ok(app, tmp_path, capsys):
    path = _transcripts(app, tmp_path)
    capsys.readouterr()
    assert app.run(['replay', '--replay', str(path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)['verdict'] == 'ok'


def test_replay_mismatch_exit(app, tmp_path):
    path = _transcripts(app, tmp_path)
    document = read_json(str(path))
    document['derived']['w_alpha'] = ''.join('1' if c == '0' else '0' for c in document['derived']['w_alpha'])
    write_atomic(str(path), canonical_json(document))
    assert app.run(['replay', '--replay', str(path)]) == EXIT_ASSERTION


def test_replay_unreadable(app, tmp_path):
    path = tmp_path / 'junk.json'
    path.write_text('{"version": 1', encoding='utf-8')
    assert app.run(['replay', '--replay', str(path)]) == EXIT_CONFIG


# =============================================================================
# Logging
# =============================================================================

def test_unwritable_log_file_is_reported(monkeypatch, tmp_path, caplog):
    monkeypatch.setattr(TestingConfig, 'LOG_FILE', str(tmp_path))
    with caplog.at_level(logging.WARNING, logger='app'):
        create_app(TestingConfig)
    assert any(r.levelno == logging.WARNING and 'could not open log file' in r.getMessage()
               for r in caplog.records)
