"""
Command groups: the CLI counterpart of route blueprints.

A group collects subcommands with their argument setup; the application
registers groups and builds one argparse subparser per command.

Author: DIOT Lab Development Team
"""

from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class Command:
    name: str
    handler: Callable
    help: str
    configure: Callable = None

    def add_to(self, subparsers, formatter_class):
        parser = subparsers.add_parser(self.name, help=self.help, description=self.help,
                                       formatter_class=formatter_class)
        if self.configure is not None:
            self.configure(parser)
        parser.set_defaults(command_handler=self.handler)
        return parser


class CommandGroup:
    """Named collection of subcommands."""

    def __init__(self, name):
        self.name = name
        self.commands = {}

    def command(self, name, help, configure=None):
        """
        Register the decorated function as subcommand ``name``.

        The handler is called as handler(app, args) and returns an exit code.
        """
        def decorator(handler):
            if name in self.commands:
                raise ValueError(f"command '{name}' is already registered in group '{self.name}'")
            self.commands[name] = Command(name, handler, help, configure)
            return handler
        return decorator
