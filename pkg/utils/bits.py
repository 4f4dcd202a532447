"""
Bit-string helpers.

Bit strings are Python ``str`` objects over the characters '0' and '1',
most significant bit first. Integers convert with the same ordering, so
``to_int('0101') == 5``.
"""

from middleware.error_handlers import BitStringError


def validate_bits(bits, length=None):
    """Return ``bits`` unchanged after checking its alphabet and optional length."""
    if not isinstance(bits, str) or any(ch not in '01' for ch in bits):
        raise BitStringError(f"not a bit string: {bits!r}")
    if length is not None and len(bits) != length:
        raise BitStringError(f"expected {length} bits, got {len(bits)}")
    return bits


def to_int(bits):
    return int(bits, 2) if bits else 0


def from_int(value, length):
    if value < 0 or value >= (1 << length):
        raise BitStringError(f"value {value} does not fit in {length} bits")
    return format(value, f'0{length}b') if length else ''


def xor(left, right):
    """Bitwise XOR of two equal-length bit strings."""
    if len(left) != len(right):
        raise BitStringError(f"length mismatch: {len(left)} vs {len(right)}")
    return ''.join('1' if a != b else '0' for a, b in zip(left, right))


def inner_product(left, right):
    """GF(2) inner product of two equal-length bit strings."""
    if len(left) != len(right):
        raise BitStringError(f"length mismatch: {len(left)} vs {len(right)}")
    return sum(1 for a, b in zip(left, right) if a == '1' and b == '1') % 2


def pad_right(bits, length):
    """Zero-pad on the right to ``length`` bits."""
    if len(bits) > length:
        raise BitStringError(f"cannot pad {len(bits)} bits down to {length}")
    return bits + '0' * (length - len(bits))


def encode_hex(bits):
    """
    Encode a bit string for transcripts.

    Args:
        bits: bit string

    Returns:
        dict with ``hex`` (big-endian, left-padded to whole nibbles) and
        ``bits`` (the explicit length)
    """
    validate_bits(bits)
    nibbles = max(1, (len(bits) + 3) // 4)
    return {'hex': format(to_int(bits), f'0{nibbles}x'), 'bits': len(bits)}


def decode_hex(encoded):
    """Inverse of :func:`encode_hex`."""
    try:
        length = int(encoded['bits'])
        value = int(encoded['hex'], 16)
    except (KeyError, TypeError, ValueError) as e:
        raise BitStringError(f"malformed encoded bit string: {encoded!r}") from e
    return from_int(value, length)
