"""Digital nets over Z_b: generation, classical constructions, t-values."""

from __future__ import annotations

import csv
import io
import json
import os
import warnings
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .badic import DigitPoint, check_base, digits_to_float, float_digit_budget, int_digits
from .gf import is_independent, matpow_mod

__all__ = [
    "GuardError",
    "GeneratorMatrixSet",
    "NetSpec",
    "DigitalNet",
    "generate_point",
    "generate_net",
    "builtin_matrices",
    "load_direction_numbers",
    "t_value",
    "verify_net",
    "interlace_matrices",
    "CONSTRUCTIONS",
]

DIRECTION_NUMBERS_ENV = "HOSNET_DIRECTION_NUMBERS"
_DEFAULT_DIRECTION_FILE = Path(__file__).with_name("data") / "new-joe-kuo-32.txt"

# upper bound on rank checks / interval shapes enumerated by the exact routines
EXACT_GUARD = 10**7


class GuardError(RuntimeError):
    """Raised when an exhaustive computation would be too large to run exactly."""


@dataclass(frozen=True)
class GeneratorMatrixSet:
    """``s`` generator matrices over Z_b, stacked as an ``(s, R, m)`` array."""

    base: int
    matrices: np.ndarray

    def __post_init__(self):
        check_base(self.base)
        mats = np.array(self.matrices, dtype=np.int64)
        if mats.ndim != 3:
            raise ValueError("matrices must have shape (s, rows, cols)")
        if mats.size and (mats.min() < 0 or mats.max() >= self.base):
            raise ValueError(f"matrix entries must lie in 0..{self.base - 1}")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def s(self) -> int:
        return self.matrices.shape[0]

    @property
    def row_count(self) -> int:
        return self.matrices.shape[1]

    @property
    def m(self) -> int:
        return self.matrices.shape[2]


@dataclass(frozen=True)
class NetSpec:
    b: int
    m: int
    s: int
    d: int = 1
    t: int | None = None

    def __post_init__(self):
        check_base(self.b)
        if self.m < 0 or self.s < 1 or self.d < 1:
            raise ValueError(f"invalid net parameters: {self}")
        if self.t is not None and not 0 <= self.t <= self.m:
            raise ValueError(f"t must lie in 0..m, got t={self.t}, m={self.m}")

    @property
    def n_points(self) -> int:
        return self.b**self.m


@dataclass(frozen=True)
class DigitalNet:
    """``b**m`` points in ``[0,1)^s``; ``digits`` has shape ``(N, s, W)``."""

    spec: NetSpec
    digits: np.ndarray
    construction: str = "custom"
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        dg = np.asarray(self.digits, dtype=np.uint8)
        if dg.ndim != 3 or dg.shape[0] != self.spec.n_points or dg.shape[1] != self.spec.s:
            raise ValueError(
                f"digits shape {dg.shape} does not match {self.spec.n_points} points in s={self.spec.s}"
            )
        dg.setflags(write=False)
        object.__setattr__(self, "digits", dg)

    @property
    def precision(self) -> int:
        return self.digits.shape[2]

    def point(self, n: int) -> list[DigitPoint]:
        return [DigitPoint(self.spec.b, tuple(row)) for row in self.digits[n]]

    def to_float(self, center: bool = False) -> np.ndarray:
        return digits_to_float(self.digits, self.spec.b, center=center)

    def with_digits(self, digits: np.ndarray, **changes) -> DigitalNet:
        spec = changes.pop("spec", self.spec)
        return DigitalNet(spec, digits, changes.pop("construction", self.construction), self.warnings)

    def to_json(self) -> dict:
        sp = self.spec
        return {
            "b": sp.b,
            "m": sp.m,
            "s": sp.s,
            "d": sp.d,
            "t": sp.t,
            "construction": self.construction,
            "points": self.digits.astype(int).tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(self.spec.s)])
        for row in self.to_float():
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def dumps_json(self) -> str:
        return json.dumps(self.to_json())


def _n_digit_matrix(b: int, m: int, ns: np.ndarray) -> np.ndarray:
    out = np.zeros((len(ns), m), dtype=np.int64)
    rem = np.asarray(ns, dtype=np.int64).copy()
    for j in range(m):
        out[:, j] = rem % b
        rem //= b
    return out


def generate_point(G: GeneratorMatrixSet, n: int, precision: int | None = None) -> list[DigitPoint]:
    """Point ``n`` of the digital net: coordinate ``i`` has digit vector ``C_i n``."""
    b, m = G.base, G.m
    if not 0 <= n < b**m:
        raise ValueError(f"n must lie in [0, {b}**{m}), got {n}")
    W = max(precision or G.row_count, G.row_count, 1)
    nd = np.array(int_digits(n, b, m), dtype=np.int64)
    out = []
    for C in G.matrices:
        y = (C @ nd) % b if m else np.zeros(G.row_count, dtype=np.int64)
        dg = np.zeros(W, dtype=np.int64)
        dg[: G.row_count] = y
        out.append(DigitPoint(b, tuple(int(v) for v in dg)))
    return out


def generate_net(
    G: GeneratorMatrixSet,
    spec: NetSpec | None = None,
    precision: int | None = None,
    construction: str = "custom",
) -> DigitalNet:
    """Enumerate all ``b**m`` points of the net generated by ``G``."""
    b, m = G.base, G.m
    if spec is None:
        spec = NetSpec(b, m, G.s)
    if (spec.b, spec.m, spec.s) != (b, m, G.s):
        raise ValueError(f"NetSpec {spec} does not match matrices (b={b}, m={m}, s={G.s})")
    R = G.row_count
    W = max(precision or R, R, 1)
    nd = _n_digit_matrix(b, m, np.arange(b**m))
    digits = np.zeros((b**m, G.s, W), dtype=np.uint8)
    if m and R:
        # (N, m) @ (s, m, R) -> (s, N, R)
        y = np.einsum("nj,irj->inr", nd, G.matrices) % b
        digits[:, :, :R] = y.transpose(1, 0, 2)
    return DigitalNet(spec, digits, construction)


def load_direction_numbers(path: str | os.PathLike | None = None) -> list[tuple[int, int, list[int]]]:
    """Parse a Joe-Kuo style table ``d s a m_1 ... m_s``.

    Returns ``(s, a, m_list)`` per dimension, starting at dimension 2.  The path
    defaults to the bundled table; ``$HOSNET_DIRECTION_NUMBERS`` overrides it.
    """
    if path is None:
        path = os.environ.get(DIRECTION_NUMBERS_ENV) or _DEFAULT_DIRECTION_FILE
    table = []
    with open(path) as fh:
        for line in fh:
            fields = line.split()
            if not fields or not fields[0].isdigit():
                continue
            deg, a = int(fields[1]), int(fields[2])
            ms = [int(v) for v in fields[3 : 3 + deg]]
            if len(ms) != deg:
                raise ValueError(f"malformed direction-number line: {line.strip()!r}")
            table.append((deg, a, ms))
    return table


def _sobol_matrix(deg: int, a: int, m_init: list[int], m: int) -> np.ndarray:
    mk = list(m_init[:m])
    for k in range(deg, m):
        new = mk[k - deg] ^ (mk[k - deg] << deg)
        for i in range(1, deg):
            if (a >> (deg - 1 - i)) & 1:
                new ^= mk[k - i] << i
        mk.append(new)
    C = np.zeros((m, m), dtype=np.int64)
    for k in range(m):
        # column k holds the binary digits of m_{k+1} / 2^{k+1}
        for i in range(k + 1):
            C[i, k] = (mk[k] >> (k - i)) & 1
    return C


def _pascal(m: int, b: int) -> np.ndarray:
    return np.array([[comb(c, r) % b for c in range(m)] for r in range(m)], dtype=np.int64)


CONSTRUCTIONS = ("van_der_corput", "sobol", "faure")
_ALIASES = {"vdc": "van_der_corput", "identity": "van_der_corput"}


def builtin_matrices(name: str, b: int, s: int, m: int) -> GeneratorMatrixSet:
    """Generator matrices of a classical construction, each ``m x m``."""
    name = _ALIASES.get(name, name)
    check_base(b)
    if s < 1 or m < 0:
        raise ValueError(f"need s >= 1 and m >= 0, got s={s}, m={m}")
    if name == "van_der_corput":
        if s != 1:
            raise ValueError("van_der_corput is one-dimensional")
        return GeneratorMatrixSet(b, np.eye(m, dtype=np.int64)[None])
    if name == "faure":
        if s > b:
            raise ValueError(f"faure needs s <= b, got s={s}, b={b}")
        P = _pascal(m, b)
        return GeneratorMatrixSet(b, np.stack([matpow_mod(P, i, b) for i in range(s)]) if m else np.zeros((s, 0, 0)))
    if name == "sobol":
        if b != 2:
            raise ValueError("sobol is defined in base 2 only")
        table = load_direction_numbers()
        if s > len(table) + 1:
            raise ValueError(f"sobol table supports s <= {len(table) + 1}, got s={s}")
        mats = [np.eye(m, dtype=np.int64)]
        mats += [_sobol_matrix(deg, a, ms, m) for deg, a, ms in table[: s - 1]]
        return GeneratorMatrixSet(2, np.stack(mats) if m else np.zeros((s, 0, 0)))
    raise ValueError(f"unknown construction {name!r}; choose from {CONSTRUCTIONS}")


def _compositions(total: int, parts: int, cap: int):
    """All tuples of ``parts`` nonnegative ints <= cap summing to ``total``."""
    if parts == 1:
        if total <= cap:
            yield (total,)
        return
    for first in range(min(total, cap) + 1):
        for rest in _compositions(total - first, parts - 1, cap):
            yield (first,) + rest


def t_value(G: GeneratorMatrixSet, m: int | None = None) -> int:
    """Exact t-value of the digital net generated by ``G``.

    The smallest ``t`` such that for every ``(d_1, ..., d_s)`` summing to
    ``m - t`` the first ``d_i`` rows of each ``C_i`` are jointly linearly
    independent over Z_b.
    """
    b, s = G.base, G.s
    m = G.m if m is None else m
    R = G.row_count
    work = sum(comb(k + s - 1, s - 1) for k in range(m + 1))
    if work > EXACT_GUARD:
        raise GuardError(f"t_value: {work} rank checks is too large for exact computation")
    for t in range(m + 1):
        ok = True
        for ds in _compositions(m - t, s, min(m, R)):
            rows = np.concatenate([G.matrices[i, : ds[i], :m] for i in range(s)], axis=0)
            if not is_independent(rows, b):
                ok = False
                break
        if ok:
            return t
    return m


def verify_net(net: DigitalNet, t: int, m: int | None = None, s: int | None = None, b: int | None = None):
    """Check the (t, m, s)-net property by exact counting on digit prefixes.

    Every elementary interval of volume ``b**(t - m)`` must hold exactly
    ``b**t`` points.  Returns ``(True, None)`` or ``(False, (shape, cell))``
    naming the first interval whose count is wrong; ``cell`` lists the
    ``a_i`` of that interval.
    """
    b = net.spec.b if b is None else b
    m = net.spec.m if m is None else m
    s = net.spec.s if s is None else s
    if (b, m, s) != (net.spec.b, net.spec.m, net.spec.s) or net.digits.shape[0] != b**m:
        raise ValueError("net parameters disagree with the point set")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t >= m:
        return True, None
    k = m - t
    W = net.precision
    shapes = comb(k + s - 1, s - 1)
    if shapes * b**m > EXACT_GUARD * 10:
        raise GuardError(f"verify_net: {shapes} shapes x {b**m} points exceeds the guard")
    dg = net.digits.astype(np.int64)
    if k > W:
        # digits beyond the stored precision are zero
        dg = np.concatenate([dg, np.zeros(dg.shape[:2] + (k - W,), dtype=np.int64)], axis=2)
    expected = b**t
    for shape in _compositions(k, s, k):
        cell = np.zeros(dg.shape[0], dtype=np.int64)
        for i, di in enumerate(shape):
            for j in range(di):
                cell = cell * b + dg[:, i, j]
        counts = np.bincount(cell, minlength=b**k)
        bad = np.nonzero(counts != expected)[0]
        if bad.size:
            return False, (shape, _split_cell(int(bad[0]), shape, b))
    return True, None


def _split_cell(index: int, shape: tuple[int, ...], b: int) -> tuple[int, ...]:
    a = []
    for di in reversed(shape):
        index, r = divmod(index, b**di)
        a.append(r)
    return tuple(reversed(a))


def interlace_matrices(G: GeneratorMatrixSet, d: int, max_rows: int | None = None) -> GeneratorMatrixSet:
    """Row-interleave each group of ``d`` matrices into one ``dR x m`` matrix.

    Row ``r + (a - 1) d`` (1-based) of block ``i`` is row ``a`` of matrix
    ``(i - 1) d + r``.  Rows past ``max_rows`` (default: the lossless float
    digit budget of the base) are dropped with a warning.
    """
    if d < 1 or G.s % d:
        raise ValueError(f"number of matrices {G.s} is not divisible by d={d}")
    ds, R, m = G.matrices.shape
    s = ds // d
    out = G.matrices.reshape(s, d, R, m).transpose(0, 2, 1, 3).reshape(s, d * R, m)
    cap = float_digit_budget(G.base) if max_rows is None else max_rows
    if out.shape[1] > cap:
        warnings.warn(
            f"interlaced matrices have {out.shape[1]} rows; keeping the first {cap}",
            stacklevel=2,
        )
        out = out[:, :cap, :]
    return GeneratorMatrixSet(G.base, out)

