"""
Error Handlers for the DIOT Lab command-line application

Provides centralized error handling including:
- The exception hierarchy raised by the simulation services
- Mapping of exceptions to process exit codes
- Logging of failures before the process exits

Exit codes: 0 pass, 1 assertion failure or replay mismatch,
2 configuration or transcript parse error.

Author: DIOT Lab Development Team
"""

import logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2


class DiotError(Exception):
    """Base class for every error raised by the simulation stack."""
    pass


class ConfigurationError(DiotError):
    """Raised when a configuration document or parameter relation is invalid."""
    pass


class SimulationLimitError(DiotError):
    """Raised when a state would exceed the simulator's qubit limit."""
    pass


class DimensionMismatchError(DiotError):
    """Raised when two states or operators have incompatible dimensions."""
    pass


class QubitIndexError(DiotError):
    """Raised when a qubit index is outside the register."""
    pass


class KeyFamilyError(DiotError):
    """Raised when a trapdoor operation is applied to the wrong key family."""
    pass


class UnknownKeyError(DiotError):
    """Raised when a key handle is not registered."""
    pass


class NotInImageError(DiotError):
    """Raised when a point has no preimage under the key's functions."""
    pass


class BitStringError(DiotError):
    """Raised when a bit string has the wrong alphabet or length."""
    pass


class HashDomainError(DiotError):
    """Raised when a hash input or output length is out of range."""
    pass


class EntropyInputError(DiotError):
    """Raised when a distribution or smoothing parameter is malformed."""
    pass


class HypothesisViolation(DiotError):
    """Raised when an entropy bound is evaluated on an input that violates its hypothesis."""
    pass


class MissingTrapdoorError(DiotError):
    """Raised when a check needs a trapdoor that was not supplied."""
    pass


class MalformedRecordError(DiotError):
    """Raised when a round record is missing the fields its challenge type requires."""
    pass


class ProtocolViolation(DiotError):
    """Raised when a party receives a structurally invalid protocol message."""
    pass


class StorageExceeded(DiotError):
    """Raised when a receiver holds more qubits than its storage capacity."""
    pass


class DeviceInterfaceError(DiotError):
    """Raised when a device strategy is driven through an unsupported interface."""
    pass


class TranscriptError(DiotError):
    """Raised when a transcript file cannot be parsed or has an unknown version."""
    pass


class ReplayMismatch(DiotError):
    """Raised when a replayed transcript diverges from its recorded values."""

    def __init__(self, field, expected, actual):
        self.field = field
        self.expected = expected
        self.actual = actual
        super().__init__(f"replay diverged at '{field}': recorded {expected!r}, recomputed {actual!r}")


class AssertionFailure(DiotError):
    """Raised when an experiment's acceptance assertions do not hold."""
    pass


def register_error_handlers(app):
    """
    Register all error handlers with the application.

    Args:
        app: DiotApp instance

    Each handler logs the failure and returns the process exit code.
    """

    @app.errorhandler(ConfigurationError)
    def configuration_error(error):
        """Handle invalid configuration."""
        logger.error(f"Configuration error: {error}")
        return EXIT_CONFIG

    @app.errorhandler(TranscriptError)
    def transcript_error(error):
        """Handle unreadable transcripts."""
        logger.error(f"Transcript error: {error}")
        return EXIT_CONFIG

    @app.errorhandler(ReplayMismatch)
    def replay_mismatch(error):
        """Handle replay divergence."""
        logger.error(f"Replay mismatch at field '{error.field}'")
        return EXIT_ASSERTION

    @app.errorhandler(AssertionFailure)
    def assertion_failure(error):
        """Handle failed acceptance assertions."""
        logger.error(f"Assertion failed: {error}")
        return EXIT_ASSERTION

    @app.errorhandler(DiotError)
    def simulation_error(error):
        """Handle any other simulation error."""
        logger.error(f"{type(error).__name__}: {error}")
        return EXIT_ASSERTION

    @app.errorhandler(Exception)
    def handle_exception(error):
        """Handle unexpected exceptions."""
        logger.error(f"Unhandled exception: {error}", exc_info=True)
        return EXIT_ASSERTION
