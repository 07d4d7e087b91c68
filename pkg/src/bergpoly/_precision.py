"""Working-precision conventions shared by every module."""

import math

import mpmath as mp

GUARD_BITS = 64


def auto_precision(n_max):
    """Default decimal digits for a run whose largest degree is ``n_max``."""
    return 30 + 3 * int(n_max)


def dps_to_bits(dps):
    return int(math.ceil(dps * math.log2(10))) + 4


def ten_to_minus(e):
    return mp.mpf(10) ** (-e)


def check_same_precision(*digits):
    first = digits[0]
    for d in digits[1:]:
        if d != first:
            raise PrecisionMismatch(f"mixed precision contexts: {first} vs {d} digits")
    return first


class PrecisionMismatch(ValueError):
    """Raised when operands were created under different precision contexts."""
