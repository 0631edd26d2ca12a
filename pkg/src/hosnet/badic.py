"""Exact base-b digit arithmetic and Walsh functions.

Points in [0, 1) are carried as fixed-precision digit arrays; digit ``i``
is the coefficient of ``b**-(i + 1)``.  Walsh values are carried as their
exponent ``e`` in Z_b, standing for ``exp(2*pi*1j*e/b)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "DigitPoint",
    "check_base",
    "is_prime",
    "float_digit_budget",
    "to_digits",
    "from_digits",
    "digit_add",
    "digit_sub",
    "int_digits",
    "digits_to_int",
    "int_digit_add",
    "int_digit_sub",
    "walsh",
    "walsh_multi",
    "walsh_value",
    "digits_to_float",
]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def check_base(b: int) -> int:
    if not isinstance(b, (int, np.integer)) or not is_prime(int(b)):
        raise ValueError(f"base must be a prime integer, got {b!r}")
    return int(b)


def float_digit_budget(b: int) -> int:
    """Largest W with b**W <= 2**52, so W digits convert to float losslessly."""
    w = 0
    while b ** (w + 1) <= 2**52:
        w += 1
    return w


@dataclass(frozen=True)
class DigitPoint:
    """A point of [0, 1) held as ``precision`` base-``base`` digits."""

    base: int
    digits: tuple[int, ...]

    def __post_init__(self):
        check_base(self.base)
        digits = tuple(int(v) for v in self.digits)
        if not digits:
            raise ValueError("a DigitPoint needs at least one digit")
        if any(v < 0 or v >= self.base for v in digits):
            raise ValueError(f"digits must lie in 0..{self.base - 1}: {digits}")
        object.__setattr__(self, "digits", digits)

    @property
    def precision(self) -> int:
        return len(self.digits)

    @classmethod
    def zero(cls, base: int, precision: int) -> DigitPoint:
        return cls(base, (0,) * precision)

    def exact(self) -> Fraction:
        return sum(
            (Fraction(v, self.base ** (i + 1)) for i, v in enumerate(self.digits)),
            Fraction(0),
        )

    def __float__(self) -> float:
        return from_digits(self)


def to_digits(x: float | Fraction, b: int, W: int) -> DigitPoint:
    """First ``W`` digits of ``x`` in base ``b``, truncating the rest.

    The conversion is exact: a float is expanded from its exact rational
    value, so b-adic rationals always get their finite expansion.
    """
    check_base(b)
    if W < 1:
        raise ValueError("precision W must be >= 1")
    q = Fraction(x)
    if not 0 <= q < 1:
        raise ValueError(f"x must lie in [0, 1), got {x!r}")
    digits = []
    for _ in range(W):
        q *= b
        v = int(q)  # floor, q >= 0
        digits.append(v)
        q -= v
    return DigitPoint(b, tuple(digits))


def from_digits(p: DigitPoint) -> float:
    # integer accumulation keeps the result exact while b**W fits a float mantissa
    n = 0
    for v in p.digits:
        n = n * p.base + v
    return n / p.base**p.precision


def _check_compatible(x: DigitPoint, y: DigitPoint) -> None:
    if x.base != y.base:
        raise ValueError(f"base mismatch: {x.base} vs {y.base}")
    if x.precision != y.precision:
        raise ValueError(f"precision mismatch: {x.precision} vs {y.precision}")


def digit_add(x: DigitPoint, y: DigitPoint) -> DigitPoint:
    """Digitwise addition modulo b (no carries)."""
    _check_compatible(x, y)
    b = x.base
    return DigitPoint(b, tuple((u + v) % b for u, v in zip(x.digits, y.digits)))


def digit_sub(x: DigitPoint, y: DigitPoint) -> DigitPoint:
    """Digitwise subtraction modulo b (no borrows)."""
    _check_compatible(x, y)
    b = x.base
    return DigitPoint(b, tuple((u - v) % b for u, v in zip(x.digits, y.digits)))


def int_digits(k: int, b: int, length: int | None = None) -> list[int]:
    """Base-b digits of a nonnegative integer, least significant first."""
    if k < 0:
        raise ValueError("Walsh indices are nonnegative")
    out = []
    while k:
        k, r = divmod(k, b)
        out.append(r)
    if length is not None:
        if len(out) > length:
            raise ValueError(f"{len(out)} digits do not fit in length {length}")
        out.extend([0] * (length - len(out)))
    return out


def digits_to_int(digits: Sequence[int], b: int) -> int:
    """Inverse of :func:`int_digits`."""
    k = 0
    for v in reversed(list(digits)):
        k = k * b + int(v)
    return k


def int_digit_add(k: int, l: int, b: int) -> int:
    a, c = int_digits(k, b), int_digits(l, b)
    n = max(len(a), len(c))
    a += [0] * (n - len(a))
    c += [0] * (n - len(c))
    return digits_to_int([(u + v) % b for u, v in zip(a, c)], b)


def int_digit_sub(k: int, l: int, b: int) -> int:
    a, c = int_digits(k, b), int_digits(l, b)
    n = max(len(a), len(c))
    a += [0] * (n - len(a))
    c += [0] * (n - len(c))
    return digits_to_int([(u - v) % b for u, v in zip(a, c)], b)


def walsh(k: int, x: DigitPoint) -> int:
    """Exponent of the k-th Walsh function at ``x``.

    ``wal_k(x) = omega_b ** walsh(k, x)`` with ``omega_b = exp(2 pi i / b)``.
    """
    kappa = int_digits(k, x.base)
    if len(kappa) > x.precision:
        raise ValueError(
            f"index {k} needs {len(kappa)} digits, point carries {x.precision}"
        )
    return sum(c * v for c, v in zip(kappa, x.digits)) % x.base


def walsh_multi(ks: Sequence[int], xs: Sequence[DigitPoint]) -> int:
    if len(ks) != len(xs):
        raise ValueError(f"length mismatch: {len(ks)} indices, {len(xs)} points")
    if not xs:
        return 0
    b = xs[0].base
    if any(x.base != b for x in xs):
        raise ValueError("all coordinates must share one base")
    return sum(walsh(k, x) for k, x in zip(ks, xs)) % b


def walsh_value(exponent, b: int):
    """Complex value ``omega_b ** exponent``; accepts scalars or arrays."""
    return np.exp(2j * np.pi * np.asarray(exponent) / b)


def digits_to_float(digits: np.ndarray, b: int, center: bool = False) -> np.ndarray:
    """Convert digit arrays of shape ``(..., W)`` to floats.

    With ``center=True`` the value is the midpoint of the b-adic cell of width
    ``b**-W`` rather than its left end.
    """
    digits = np.asarray(digits)
    W = digits.shape[-1]
    if b**W > 2**63:
        raise ValueError(f"{W} base-{b} digits overflow a 64-bit integer")
    n = np.zeros(digits.shape[:-1], dtype=np.int64)
    for i in range(W):
        n = n * b + digits[..., i]
    if center:
        return (2 * n + 1) / (2.0 * b**W)
    return n / float(b**W)
