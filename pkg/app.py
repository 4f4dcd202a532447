"""
DIOT Lab - Device-Independent Oblivious Transfer Simulation Stack

Command-line entry point. The application object carries the resolved
settings, the registered command groups and the error handlers that map
exceptions to exit codes.

Usage:
    python app.py <kind> [--config FILE] [--seed N] [--trials N] [--out FILE]
    python app.py replay --replay FILE

Author: DIOT Lab Development Team
"""

import argparse
import logging
import sys

# Import configuration
from config.settings import get_config

# Import middleware
from middleware.error_handlers import EXIT_OK, register_error_handlers

# Import commands
from commands import register_commands

logger = logging.getLogger(__name__)


class DiotApp:
    """Registry of command groups and error handlers around a settings object."""

    def __init__(self, config):
        self.config = config
        self.commands = {}
        self.error_handlers = {}

    def errorhandler(self, exception_class):
        """Register the decorated function as handler for ``exception_class`` and its subclasses."""
        def decorator(handler):
            self.error_handlers[exception_class] = handler
            return handler
        return decorator

    def register_group(self, group):
        for name, command in group.commands.items():
            if name in self.commands:
                raise ValueError(f"command '{name}' registered twice")
            self.commands[name] = command

    def build_parser(self):
        parser = argparse.ArgumentParser(
            prog='diot',
            description='Device-independent oblivious transfer simulations',
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        subparsers = parser.add_subparsers(dest='command', required=True, metavar='command')
        for command in self.commands.values():
            command.add_to(subparsers, argparse.ArgumentDefaultsHelpFormatter)
        return parser

    def handle_error(self, error):
        """Dispatch to the most specific registered handler; re-raise when none applies."""
        for cls in type(error).__mro__:
            handler = self.error_handlers.get(cls)
            if handler is not None:
                return handler(error)
        raise error

    def run(self, argv=None):
        """
        Parse ``argv`` and execute the selected command.

        Returns:
            process exit code
        """
        args = self.build_parser().parse_args(argv)
        try:
            status = args.command_handler(self, args)
        except Exception as e:
            return self.handle_error(e)
        return EXIT_OK if status is None else status


def create_app(config_class=None):
    """
    Application factory for creating DiotApp instances.

    Args:
        config_class: Configuration class to use (default from environment)

    Returns:
        DiotApp instance
    """
    # Load configuration
    if config_class is None:
        config = get_config()
    else:
        config = config_class()

    app = DiotApp(config)

    # Configure logging
    _configure_logging(config)

    # Register error handlers
    register_error_handlers(app)

    # Register command groups
    register_commands(app)

    logger.debug(f"application initialized ({config.DIOT_ENV}, {len(app.commands)} commands)")
    return app


def _configure_logging(config):
    """Configure application logging."""
    if config.LOG_LEVEL:
        log_level = getattr(logging, config.LOG_LEVEL.upper(), logging.INFO)
    else:
        log_level = logging.INFO if config.IS_PRODUCTION else logging.DEBUG

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handlers = [logging.StreamHandler()]
    file_error = None
    if config.LOG_FILE:
        try:
            handlers.append(logging.FileHandler(config.LOG_FILE))
        except OSError as e:
            file_error = e
    for handler in handlers:
        handler.setFormatter(formatter)

    logging.basicConfig(level=log_level, handlers=handlers)
    if file_error is not None:
        logger.warning(f"could not open log file {config.LOG_FILE}, logging to stderr only: {file_error}")

    # Reduce noise from the standard library's own loggers
    logging.getLogger('asyncio').setLevel(logging.WARNING)
    logging.getLogger('concurrent.futures').setLevel(logging.WARNING)


def main(argv=None):
    return create_app().run(argv)


if __name__ == '__main__':
    sys.exit(main())
