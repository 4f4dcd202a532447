"""
Commands Package

This package contains all CLI command groups organized by functionality.
Register groups in the application factory.

Author: DIOT Lab Development Team
"""

from commands.experiment_commands import experiment_cmds
from commands.replay_commands import replay_cmds


def register_commands(app):
    """
    Register all command groups with the application.

    Args:
        app: DiotApp instance
    """
    # Experiment kinds
    app.register_group(experiment_cmds)

    # Transcript replay
    app.register_group(replay_cmds)
