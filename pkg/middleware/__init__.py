# Middleware Package
from middleware.error_handlers import (
    register_error_handlers, DiotError, ConfigurationError, TranscriptError,
    ReplayMismatch, AssertionFailure, EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG
)
