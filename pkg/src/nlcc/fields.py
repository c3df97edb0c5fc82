"""Prime-field polynomial fingerprints: p_x(t) = sum_i x_i t^(i-1) mod p."""
from __future__ import annotations

import math
from typing import Sequence


def is_prime(k: int) -> bool:
    if k < 2:
        return False
    if k % 2 == 0:
        return k == 2
    d = 3
    while d * d <= k:
        if k % d == 0:
            return False
        d += 2
    return True


def smallest_prime_at_least(k: int) -> int:
    k = max(k, 2)
    while not is_prime(k):
        k += 1
    return k


def fingerprint_modulus(n: int) -> int:
    """Field size used for n-bit strings: the smallest prime >= 3n."""
    if n < 1:
        raise ValueError("string length must be at least 1")
    return smallest_prime_at_least(3 * n)


def poly_eval(bits: Sequence[int], t: int, p: int) -> int:
    """Evaluate p_x(t) with x_1 as the constant coefficient (Horner)."""
    acc = 0
    for b in reversed(bits):
        acc = (acc * t + b) % p
    return acc


def field_bits(p: int) -> int:
    """Bits needed to write one element of F_p."""
    return max(1, math.ceil(math.log2(p)))


def agreement_points(x: Sequence[int], y: Sequence[int], p: int) -> list[int]:
    return [a for a in range(p) if poly_eval(x, a, p) == poly_eval(y, a, p)]
