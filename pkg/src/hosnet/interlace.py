"""Digit interlacing of points and Walsh indices.

``interlace_point`` weaves ``d`` coordinates into one: digit ``a`` of
coordinate ``r`` lands at position ``r + (a - 1) d`` (both 1-based).  On
finite digit arrays the map is a bijection between ``d`` arrays of ``W``
digits and one array of ``d W`` digits.  The infinite-precision map is
injective but not onto: expansions that end in ``b - 1`` on every
``d``-th digit of one residue class have no preimage, because the
matching coordinate would need a non-terminating expansion of a b-adic
rational.  Those patterns cannot be written down with finitely many
digits, so :func:`image_membership` is always true here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .badic import DigitPoint, check_base, digits_to_int, float_digit_budget, int_digits

__all__ = [
    "InterlaceSpec",
    "interlace_point",
    "deinterlace_point",
    "interlace_index",
    "deinterlace_index",
    "image_membership",
    "interlace_digits",
    "deinterlace_digits",
    "interlaced_box_measure",
]


@dataclass(frozen=True)
class InterlaceSpec:
    d: int
    b: int = 2
    w_in: int | None = None

    def __post_init__(self):
        check_base(self.b)
        if self.d < 1:
            raise ValueError("interlacing factor d must be >= 1")
        budget = float_digit_budget(self.b)
        if self.w_in is None:
            object.__setattr__(self, "w_in", budget // self.d)
        if self.w_in < 1 or self.d * self.w_in > budget:
            raise ValueError(
                f"d * W_in = {self.d * self.w_in} exceeds the {budget}-digit float budget for base {self.b}"
            )

    @property
    def w_out(self) -> int:
        return self.d * self.w_in


def interlace_point(xs: Sequence[DigitPoint]) -> DigitPoint:
    if not xs:
        raise ValueError("need at least one coordinate")
    b, W = xs[0].base, xs[0].precision
    if any(x.base != b or x.precision != W for x in xs):
        raise ValueError("all coordinates must share base and precision")
    digits = tuple(x.digits[a] for a in range(W) for x in xs)
    return DigitPoint(b, digits)


def deinterlace_point(y: DigitPoint, d: int) -> list[DigitPoint]:
    if d < 1 or y.precision % d:
        raise ValueError(f"precision {y.precision} is not divisible by d={d}")
    return [DigitPoint(y.base, y.digits[r::d]) for r in range(d)]


def interlace_index(ks: Sequence[int], b: int) -> int:
    """Interlace Walsh indices: digit ``a`` of ``k_r`` goes to position ``r - 1 + a d``."""
    if any(k < 0 for k in ks):
        raise ValueError("negative digits are not supported")
    d = len(ks)
    cols = [int_digits(k, b) for k in ks]
    n = max((len(c) for c in cols), default=0)
    out = [0] * (n * d)
    for r, c in enumerate(cols):
        for a, v in enumerate(c):
            out[r + a * d] = v
    return digits_to_int(out, b)


def deinterlace_index(k: int, d: int, b: int) -> list[int]:
    kappa = int_digits(k, b)
    return [digits_to_int(kappa[r::d], b) for r in range(d)]


def image_membership(y: DigitPoint, d: int) -> bool:
    """True iff ``y`` has a preimage under ``d``-fold interlacing.

    Always true at finite precision; see the module docstring.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    return True


def interlace_digits(digits: np.ndarray, d: int) -> np.ndarray:
    """Vectorized interlacing on arrays of shape ``(..., d*s, W)`` -> ``(..., s, d*W)``."""
    digits = np.asarray(digits)
    ds, W = digits.shape[-2:]
    if ds % d:
        raise ValueError(f"{ds} coordinates are not divisible by d={d}")
    s = ds // d
    lead = digits.shape[:-2]
    x = digits.reshape(lead + (s, d, W))
    x = np.swapaxes(x, -1, -2)  # (..., s, W, d)
    return x.reshape(lead + (s, d * W))


def deinterlace_digits(digits: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`interlace_digits`."""
    digits = np.asarray(digits)
    s, dW = digits.shape[-2:]
    if dW % d:
        raise ValueError(f"precision {dW} is not divisible by d={d}")
    lead = digits.shape[:-2]
    x = digits.reshape(lead + (s, dW // d, d))
    x = np.swapaxes(x, -1, -2)
    return x.reshape(lead + (s * d, dW // d))


def interlaced_box_measure(box: Sequence[tuple[int, int]], b: int, method: str = "cylinder") -> Fraction:
    """Exact Lebesgue measure of the interlaced image of a b-adic box.

    ``box`` lists ``(a_r, nu_r)`` per coordinate for the box
    ``prod [a_r b^-nu_r, (a_r + 1) b^-nu_r)``.

    ``method="cylinder"`` pushes the box's digit constraints through the
    interlacing map position by position: each output position ends up
    either pinned to one digit or free, so the image is a cylinder set
    whose measure is the product of ``|allowed digits| / b``.  A position
    claimed twice would make the image empty or ill-defined and raises.

    ``method="enumerate"`` pushes every preimage digit string through the
    map up to the deepest constrained output position ``L`` and counts the
    distinct length-``L`` prefixes.  It costs ``b**(L - sum(nu))`` and is
    meant as a cross-check on small boxes.
    """
    if method == "cylinder":
        return _cylinder_measure(box, b)
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    d = len(box)
    L = max((r + (nu - 1) * d + 1 for r, (_, nu) in enumerate(box) if nu > 0), default=0)
    if L == 0:
        return Fraction(1)
    # coordinate r contributes output positions r, r + d, ... below L
    depth = [len(range(r, L, d)) for r in range(d)]
    cols = []
    free = []
    for r, (a, nu) in enumerate(box):
        if not 0 <= a < b**nu:
            raise ValueError(f"cell index {a} out of range for depth {nu}")
        head = list(reversed(int_digits(a, b, nu)))
        cols.append(head[: depth[r]])
        free.append(depth[r] - len(cols[-1]))
    F = sum(free)
    combos = np.arange(b**F, dtype=np.int64)
    choice = np.empty((combos.size, F), dtype=np.int64)
    for j in range(F):
        choice[:, j] = combos % b
        combos //= b
    prefix = np.zeros((choice.shape[0], L), dtype=np.int64)
    offset = 0
    for r in range(d):
        coord = np.empty((choice.shape[0], depth[r]), dtype=np.int64)
        coord[:, : len(cols[r])] = cols[r]
        coord[:, len(cols[r]) :] = choice[:, offset : offset + free[r]]
        offset += free[r]
        prefix[:, r::d] = coord
    code = np.zeros(prefix.shape[0], dtype=np.int64)
    for j in range(L):
        code = code * b + prefix[:, j]
    return Fraction(np.unique(code).size, b**L)


def _cylinder_measure(box: Sequence[tuple[int, int]], b: int) -> Fraction:
    d = len(box)
    depth = max((nu for _, nu in box), default=0)
    if depth == 0:
        return Fraction(1)
    # label every input digit (r, a) and route the labels through the map
    labels = np.full((d, depth), -1, dtype=np.int64)
    for r, (a, nu) in enumerate(box):
        if not 0 <= a < b**nu:
            raise ValueError(f"cell index {a} out of range for depth {nu}")
        labels[r, :nu] = np.arange(nu) + r * depth
    routed = interlace_digits(labels, d)[0]
    seen = set()
    allowed = Fraction(1)
    for lab in routed:
        if lab < 0:
            continue
        if lab in seen:
            raise ValueError("interlacing maps two constraints to one position")
        seen.add(int(lab))
        allowed *= Fraction(1, b)
    return allowed
