"""Owen nested scrambling, its order-d form, and the linear matrix scramble.

All randomness flows from a :class:`ScrambleKey`.  Owen permutations are
never stored: the permutation at node ``(coord, xi_1..xi_{k-1})`` of the
permutation tree is derived on demand from a keyed 64-bit mixing function
of the key and the prefix, then used to drive a Fisher-Yates shuffle of
``0..b-1``.  The same key therefore always reproduces the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .badic import DigitPoint, check_base
from .interlace import deinterlace_digits, interlace_digits
from .netgen import DigitalNet

__all__ = [
    "ScrambleKey",
    "PermutationSource",
    "IdentitySource",
    "owen_scramble",
    "owen_scramble_digits",
    "scramble_net",
    "order_d_scramble",
    "linear_scramble",
    "linear_scramble_digits",
    "linear_scramble_net",
    "SCRAMBLE_KINDS",
]

SCRAMBLE_KINDS = ("owen", "linear", "none")

_M64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_REP = np.uint64(0xD1B54A32D192ED03)
_COORD = np.uint64(0x8CB92BA72F3D8DD7)
_PERM = np.uint64(0xA0761D6478BD642F)


def _mix(z):
    """splitmix64 finalizer, elementwise on uint64 arrays (wrapping)."""
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _C1
        z = (z ^ (z >> np.uint64(27))) * _C2
        return z ^ (z >> np.uint64(31))


def _node_roots(seed: int, replication_ids, coords) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed & _M64))
        h = _mix(h ^ (np.asarray(replication_ids, dtype=np.uint64) + np.uint64(1)) * _REP)
        return _mix(h ^ (np.asarray(coords, dtype=np.uint64) + np.uint64(1)) * _COORD)


def _descend(h, digit, depth: int):
    with np.errstate(over="ignore"):
        step = (np.asarray(digit, dtype=np.uint64) + np.uint64(1)) * _GOLDEN + np.uint64(depth)
        return _mix(h ^ step)


def _permute(h, xi, b: int):
    """Apply the permutation of {0..b-1} keyed by ``h`` to digits ``xi``."""
    ph = _mix(h ^ _PERM)
    if b == 2:
        # Fisher-Yates on (0, 1): one swap draw, r == 0 swaps
        with np.errstate(over="ignore"):
            r = _mix(ph + _GOLDEN) & np.uint64(1)
        return np.asarray(xi) ^ (r == 0).astype(np.asarray(xi).dtype)
    perm = _perm_table(ph, b)
    return np.take_along_axis(perm, np.asarray(xi, dtype=np.int64)[..., None], axis=-1)[..., 0]


def _perm_table(ph, b: int) -> np.ndarray:
    ph = np.asarray(ph, dtype=np.uint64)
    perm = np.broadcast_to(np.arange(b, dtype=np.int64), ph.shape + (b,)).copy()
    with np.errstate(over="ignore"):
        for j in range(b - 1, 0, -1):
            r = (_mix(ph + np.uint64(b - j) * _GOLDEN) % np.uint64(j + 1)).astype(np.int64)
            pj = perm[..., j].copy()
            pr = np.take_along_axis(perm, r[..., None], axis=-1)[..., 0]
            perm[..., j] = pr
            np.put_along_axis(perm, r[..., None], pj[..., None], axis=-1)
    return perm


@dataclass(frozen=True)
class ScrambleKey:
    """One realization of the scrambling randomness."""

    seed: int
    replication_id: int = 0
    base: int = 2
    depth: int | None = None

    def __post_init__(self):
        check_base(self.base)
        if self.replication_id < 0:
            raise ValueError("replication_id must be nonnegative")

    def replicate(self, replication_id: int) -> ScrambleKey:
        return ScrambleKey(self.seed, replication_id, self.base, self.depth)


class PermutationSource:
    """Lazily keyed Owen permutation tree for one :class:`ScrambleKey`."""

    def __init__(self, key: ScrambleKey):
        self.key = key

    @property
    def base(self) -> int:
        return self.key.base

    def lookup(self, coord: int, prefix: Sequence[int]) -> tuple[int, ...]:
        """Permutation applied to the digit following ``prefix`` in coordinate ``coord``."""
        b = self.key.base
        h = _node_roots(self.key.seed, [self.key.replication_id], [coord])
        for depth, v in enumerate(prefix):
            h = _descend(h, [v], depth)
        return tuple(int(v) for v in _permute(h[:, None], np.arange(b)[None, :], b)[0])

    def scramble_digits(self, digits: np.ndarray, coords) -> np.ndarray:
        """Owen-scramble digit arrays of shape ``(..., W)``; ``coords`` broadcasts to ``(...)``."""
        digits = np.asarray(digits)
        roots = _node_roots(self.key.seed, self.key.replication_id, coords)
        roots = np.broadcast_to(roots, digits.shape[:-1])
        return owen_scramble_digits(digits, roots, self.key.base)


class IdentitySource(PermutationSource):
    """Test double: every permutation is the identity."""

    def __init__(self, base: int = 2):
        super().__init__(ScrambleKey(0, 0, base))

    def lookup(self, coord, prefix):
        return tuple(range(self.base))

    def scramble_digits(self, digits, coords):
        return np.array(digits, copy=True)


def owen_scramble_digits(digits: np.ndarray, roots: np.ndarray, b: int) -> np.ndarray:
    """Core vectorized Owen scramble; ``roots`` holds the tree root per digit string."""
    digits = np.asarray(digits)
    out = np.empty_like(digits)
    h = np.asarray(roots, dtype=np.uint64)
    for k in range(digits.shape[-1]):
        xi = digits[..., k]
        out[..., k] = _permute(h, xi, b)
        if k + 1 < digits.shape[-1]:
            h = _descend(h, xi, k)
    return out


def _pad(digits: np.ndarray, depth: int | None) -> np.ndarray:
    W = digits.shape[-1]
    if depth is None or depth <= W:
        return digits
    pad = np.zeros(digits.shape[:-1] + (depth - W,), dtype=digits.dtype)
    return np.concatenate([digits, pad], axis=-1)


def owen_scramble(x: DigitPoint, coord: int, src: PermutationSource) -> DigitPoint:
    """Nested uniform scramble of one coordinate.

    Output digit ``k`` is ``pi_{coord, xi_1..xi_{k-1}}(xi_k)``.  When the key
    asks for more depth than ``x`` carries, the zero tail is scrambled too.
    """
    if x.base != src.base:
        raise ValueError(f"point base {x.base} does not match source base {src.base}")
    dg = _pad(np.array([x.digits], dtype=np.int64), src.key.depth)
    return DigitPoint(x.base, tuple(int(v) for v in src.scramble_digits(dg, coord)[0]))


def scramble_net(net: DigitalNet, src: PermutationSource) -> DigitalNet:
    """Scramble every point with one shared permutation tree per coordinate."""
    if net.spec.b != src.base:
        raise ValueError("net and scramble key use different bases")
    dg = _pad(net.digits, src.key.depth)
    coords = np.arange(net.spec.s)[None, :]
    return net.with_digits(src.scramble_digits(dg, coords), construction=f"{net.construction}+owen")


def order_d_scramble(y: Sequence[DigitPoint], d: int, src: PermutationSource) -> list[DigitPoint]:
    """Deinterlace each coordinate into ``d``, Owen-scramble those, re-interlace."""
    if not y:
        return []
    b = y[0].base
    dg = np.array([p.digits for p in y], dtype=np.int64)
    z = deinterlace_digits(dg, d)
    z = _pad(z, src.key.depth)
    w = src.scramble_digits(z, np.arange(z.shape[0]))
    return [DigitPoint(b, tuple(int(v) for v in row)) for row in interlace_digits(w, d)]


def _linear_parts(key: ScrambleKey, coord: int, W: int) -> tuple[np.ndarray, np.ndarray]:
    b = key.base
    rng = np.random.default_rng([key.seed & _M64, key.replication_id, coord, 0x4C494E])
    L = np.tril(rng.integers(0, b, size=(W, W)), k=-1)
    L[np.diag_indices(W)] = rng.integers(1, b, size=W)
    e = rng.integers(0, b, size=W)
    return L, e


def linear_scramble_digits(digits: np.ndarray, coord: int, key: ScrambleKey) -> np.ndarray:
    digits = np.asarray(digits, dtype=np.int64)
    L, e = _linear_parts(key, coord, digits.shape[-1])
    return (digits @ L.T + e) % key.base


def linear_scramble(x: DigitPoint, coord: int, key: ScrambleKey) -> DigitPoint:
    """Random lower-triangular matrix scramble plus digital shift: ``y = L x + e``."""
    if x.base != key.base:
        raise ValueError(f"point base {x.base} does not match key base {key.base}")
    dg = _pad(np.array(x.digits, dtype=np.int64), key.depth)
    return DigitPoint(x.base, tuple(int(v) for v in linear_scramble_digits(dg, coord, key)))


def linear_scramble_net(net: DigitalNet, key: ScrambleKey) -> DigitalNet:
    if net.spec.b != key.base:
        raise ValueError("net and scramble key use different bases")
    dg = _pad(net.digits.astype(np.int64), key.depth)
    out = np.stack(
        [linear_scramble_digits(dg[:, i, :], i, key) for i in range(net.spec.s)], axis=1
    )
    return net.with_digits(out, construction=f"{net.construction}+linear")
