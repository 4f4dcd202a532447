"""
Replay Commands

Re-derives every recorded value of a saved transcript.

Author: DIOT Lab Development Team
"""

from commands.group import CommandGroup
from middleware.error_handlers import EXIT_OK
from services.replay import replay_transcript
from utils.file_utils import canonical_json


# Create command group
replay_cmds = CommandGroup('replay')


def _replay_arguments(parser):
    parser.add_argument('--replay', required=True, metavar='FILE', help='transcript written with --transcripts')


@replay_cmds.command('replay', help='Replay a saved transcript and confirm bit-exact agreement',
                     configure=_replay_arguments)
def replay(app, args):
    verdict = replay_transcript(args.replay)
    print(canonical_json(verdict.to_dict()))
    return EXIT_OK
