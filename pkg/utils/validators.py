"""
Input Validation Utilities

Provides checks shared by the configuration layer and the services:
- Unit-interval randomness samples
- Probability and smoothing parameters
- Integer ranges with descriptive errors

Author: DIOT Lab Development Team
"""

import math

from middleware.error_handlers import ConfigurationError


def validate_unit_sample(value, name='randomness'):
    """
    Validate a unit-interval sample.

    Args:
        value: Candidate sample
        name: Parameter name used in the error message

    Returns:
        float: The sample
    """
    sample = float(value)
    if not 0.0 <= sample < 1.0 or math.isnan(sample):
        raise ValueError(f"{name} must lie in [0, 1), got {value!r}")
    return sample


def validate_probability(value, name, open_low=False, open_high=False, error=ConfigurationError):
    """
    Validate a probability-like real.

    Args:
        value: Candidate value
        name: Parameter name used in the error message
        open_low: Exclude 0
        open_high: Exclude 1
        error: Exception class to raise

    Returns:
        float: The value
    """
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise error(f"{name} must be a real number, got {value!r}")
    low_ok = number > 0.0 if open_low else number >= 0.0
    high_ok = number < 1.0 if open_high else number <= 1.0
    if not (low_ok and high_ok):
        low = '(' if open_low else '['
        high = ')' if open_high else ']'
        raise error(f"{name} must lie in {low}0, 1{high}, got {value!r}")
    return number


def validate_int_range(value, name, low=None, high=None, error=ConfigurationError):
    """
    Validate an integer within optional inclusive bounds.

    Returns:
        int: The value
    """
    if isinstance(value, bool) or not isinstance(value, int):
        raise error(f"{name} must be an integer, got {value!r}")
    if low is not None and value < low:
        raise error(f"{name} must be ≥ {low}, got {value}")
    if high is not None and value > high:
        raise error(f"{name} must be ≤ {high}, got {value}")
    return value
