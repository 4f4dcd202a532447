"""
Experiment Commands

Provides one subcommand per experiment kind:
- ot1, ot4: oblivious-transfer batches
- selftest, estimate_delta: device self-testing and δ′ estimation
- attack: dishonest-party experiments
- bounds_check: numerical suites for the entropy inequalities

Author: DIOT Lab Development Team
"""

import json
import logging
import os

from commands.group import CommandGroup
from config.protocol import ProtocolConfig
from middleware.error_handlers import EXIT_OK, AssertionFailure, ConfigurationError
from services.experiments import ExperimentSpec, run_experiment
from utils.file_utils import read_json

logger = logging.getLogger(__name__)

# Create command group
experiment_cmds = CommandGroup('experiment')


def _experiment_arguments(parser):
    parser.add_argument('--config', default=None,
                        help='JSON document with "protocol" and "experiment" sections')
    parser.add_argument('--seed', type=int, default=None, help='overrides protocol.seed')
    parser.add_argument('--trials', type=int, default=None, help='overrides experiment.trials (default 1)')
    parser.add_argument('--out', default=None, help='JSON-lines report (default REPORT_DIR/<kind>-seed<seed>.jsonl)')
    parser.add_argument('--workers', type=int, default=None, help='trial worker pool size (default WORKERS)')
    parser.add_argument('--transcripts', default=None, help='directory receiving one transcript per trial')
    parser.add_argument('--option', action='append', default=[], metavar='KEY=VALUE',
                        help='experiment option; VALUE is parsed as JSON when possible')


def _load_document(path):
    if path is None:
        return {}
    try:
        document = read_json(path)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    if not isinstance(document, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return document


def _parse_option(text):
    key, sep, raw = text.partition('=')
    if not sep or not key:
        raise ConfigurationError(f"option '{text}' is not of the form KEY=VALUE")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def build_spec(app, kind, args):
    """
    Resolve CLI flags and the config document into an ExperimentSpec.

    Flags win over the document; the document wins over settings.
    """
    document = _load_document(args.config)
    protocol = dict(document.get('protocol', {}))
    experiment = document.get('experiment', {})
    if not isinstance(experiment, dict):
        raise ConfigurationError("experiment section must be a JSON object")
    if args.seed is not None:
        protocol['seed'] = args.seed
    elif 'seed' not in protocol:
        protocol['seed'] = app.config.default_seed()
    config = ProtocolConfig.from_dict(protocol)

    options = dict(experiment.get('options', {}))
    options.update(_parse_option(text) for text in args.option)
    trials = args.trials if args.trials is not None else experiment.get('trials', 1)
    workers = args.workers if args.workers is not None else experiment.get('workers', app.config.WORKERS)
    output = args.out or experiment.get('output') or \
        os.path.join(app.config.get_report_dir(), f'{kind}-seed{config.seed}.jsonl')
    transcripts = args.transcripts or experiment.get('transcripts_dir')
    return ExperimentSpec(kind, config, trials, output, options, transcripts, workers)


def run_kind(app, kind, args):
    spec = build_spec(app, kind, args)
    logger.debug(f"{kind}: options {spec.options}, output {spec.output}")
    report = run_experiment(spec)
    verdict = 'PASS' if report.passed else 'FAIL'
    print(f"{kind}: {verdict} ({spec.trials} trial(s), seed {spec.config.seed}) -> {spec.output}")
    if not report.passed:
        raise AssertionFailure(f"{kind}: {', '.join(report.failed_assertions())}")
    return EXIT_OK


@experiment_cmds.command('ot1', help='Bell-pair OT runs with an honest receiver', configure=_experiment_arguments)
def ot1(app, args):
    return run_kind(app, 'ot1', args)


@experiment_cmds.command('selftest', help='Single self-test rounds against a device', configure=_experiment_arguments)
def selftest(app, args):
    return run_kind(app, 'selftest', args)


@experiment_cmds.command('estimate_delta', help='Estimate the device failure rate δ′',
                         configure=_experiment_arguments)
def estimate_delta(app, args):
    return run_kind(app, 'estimate_delta', args)


@experiment_cmds.command('ot4', help='Device-independent OT runs', configure=_experiment_arguments)
def ot4(app, args):
    return run_kind(app, 'ot4', args)


@experiment_cmds.command('attack', help='Dishonest-party experiments (option attack=...)',
                         configure=_experiment_arguments)
def attack(app, args):
    return run_kind(app, 'attack', args)


@experiment_cmds.command('bounds_check', help='Numerical suites for the entropy inequalities',
                         configure=_experiment_arguments)
def bounds_check(app, args):
    return run_kind(app, 'bounds_check', args)
