"""Executable checks of the variance theory for order-d scrambled nets.

Covers the three-case expectation of Walsh products under order-d Owen
scrambling, exact gain coefficients of interlaced digital nets and their
bounds, Walsh-coefficient shells of an integrand, the variance
decomposition, generalized finite differences, and the derivative-norm
form of the order-alpha variation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .badic import DigitPoint, int_digits, walsh
from .estimator import Integrand, randomize_net_digits
from .interlace import deinterlace_index, interlace_digits, interlace_index
from .netgen import DigitalNet, GuardError
from .scramble import _node_roots, owen_scramble_digits

__all__ = [
    "beta_profile",
    "owen_expectation_exact",
    "owen_expectation_mc",
    "OwenCase",
    "owen_case_grid",
    "check_owen_case",
    "canonical_k",
    "gain_coefficient",
    "gain_coefficients",
    "gain_bound",
    "enumerate_ell",
    "walsh_coefficients",
    "sigma_squared_table",
    "gamma_weight",
    "sigma_bound",
    "variance_decomposition_check",
    "finite_difference",
    "derivative_limit_errors",
    "variation_smooth",
]

# b**(2m) point pairs enumerated by the gain-coefficient routine
PAIR_GUARD = 1 << 24


def beta_profile(x: DigitPoint, xp: DigitPoint, d: int) -> list[int]:
    """Leading agreement depth of ``x`` and ``xp`` per residue class.

    Entry ``r`` counts how many of the digits at positions ``r, r + d,
    r + 2d, ...`` (0-based) agree before the first disagreement.  A class
    that agrees on every stored digit reports the number of digits it
    holds; :func:`owen_expectation_exact` treats that as unbounded agreement.
    """
    if x.base != xp.base or x.precision != xp.precision:
        raise ValueError("points must share base and precision")
    out = []
    for r in range(d):
        a, c = x.digits[r::d], xp.digits[r::d]
        depth = 0
        while depth < len(a) and a[depth] == c[depth]:
            depth += 1
        out.append(depth)
    return out


@lru_cache(maxsize=1 << 16)
def _owen_factor(beta: tuple[int, ...], full: tuple[bool, ...], parts: tuple[int, ...], b: int) -> Fraction:
    v = 0
    for depth, whole, kr in zip(beta, full, parts):
        if whole or kr < b**depth:
            continue
        if kr >= b ** (depth + 1):
            return Fraction(0)
        v += 1
    return Fraction(1, (1 - b) ** v) if v else Fraction(1)


def owen_expectation_exact(k: int, kp: int, x: DigitPoint, xp: DigitPoint, d: int) -> Fraction:
    """Exact ``E[wal_k(y) conj(wal_kp(y'))]`` for order-``d`` Owen scrambled ``x, xp``.

    Zero when ``k != kp``.  Otherwise ``k`` splits into per-class parts
    ``k_r`` (the digits of ``k`` at positions ``r, r + d, ...``, compressed);
    the value is zero if some ``k_r >= b**(beta_r + 1)`` and otherwise
    ``(1 - b)**-v`` with ``v`` counting classes with
    ``b**beta_r <= k_r < b**(beta_r + 1)``.
    """
    b = x.base
    if k != kp:
        return Fraction(0)
    if k >= b**x.precision:
        raise ValueError(f"index {k} needs more than {x.precision} digits")
    beta = beta_profile(x, xp, d)
    full = tuple(depth == len(x.digits[r::d]) for r, depth in enumerate(beta))
    parts = tuple(deinterlace_index(k, d, b))
    return _owen_factor(tuple(beta), full, parts, b)


def owen_expectation_mc(
    k: int,
    kp: int,
    x: DigitPoint,
    xp: DigitPoint,
    d: int,
    trials: int = 10_000,
    seed: int = 0,
) -> tuple[complex, float]:
    """Monte Carlo estimate of the same expectation and its standard error.

    Both points are scrambled with a shared order-``d`` permutation tree per
    trial; trials use independent keys ``(seed, trial)``.
    """
    if trials < 100:
        raise ValueError("use at least 100 trials")
    b, W = x.base, x.precision
    if W % d:
        raise ValueError(f"precision {W} is not divisible by d={d}")
    dg = np.array([x.digits, xp.digits], dtype=np.uint8)  # (2, W)
    z = np.stack([dg[:, r::d] for r in range(d)], axis=1)  # (2, d, W/d)
    reps = np.arange(trials)
    roots = _node_roots(seed, reps[:, None, None], np.arange(d)[None, None, :])
    roots = np.broadcast_to(roots, (trials, 2, d))
    w = owen_scramble_digits(np.broadcast_to(z, (trials,) + z.shape), roots, b)
    y = interlace_digits(w, d)[:, :, 0, :].astype(np.int64)  # (trials, 2, W)
    kk = np.array(int_digits(k, b, W), dtype=np.int64)
    kkp = np.array(int_digits(kp, b, W), dtype=np.int64)
    e = (y[:, 0, :] @ kk - y[:, 1, :] @ kkp) % b
    vals = np.exp(2j * np.pi * e / b)
    mean = complex(vals.mean())
    se = math.sqrt((vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / trials)
    return mean, se


@dataclass(frozen=True)
class OwenCase:
    b: int
    d: int
    x: DigitPoint
    xp: DigitPoint
    k: int
    kp: int
    case: str


def owen_case_grid(n: int = 60, seed: int = 0, max_precision: int = 10) -> list[OwenCase]:
    """Random cases spread over the three branches of the expectation formula.

    Cases cycle through ``k != k'`` (branch ``i``), some ``k_r`` past the
    agreement depth (``ii``) and every ``k_r`` within it (``iii``).
    """
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(n):
        case = "i ii iii iii".split()[idx % 4]
        b = int(rng.choice([2, 3]))
        d = int(rng.integers(1, 4))
        per = int(rng.integers(1, max_precision // d + 1))
        if case == "ii":
            per = max(per, 2)
        W = per * d
        x = rng.integers(0, b, size=(d, per))
        xp = x.copy()
        beta = rng.integers(0, per + 1, size=d)
        if case == "ii":
            # room for k_r to carry more digits than the agreement allows
            beta[int(rng.integers(0, d))] = int(rng.integers(0, per - 1))
        for r in range(d):
            if beta[r] < per:
                xp[r, beta[r]] = (x[r, beta[r]] + rng.integers(1, b)) % b
                xp[r, beta[r] + 1 :] = rng.integers(0, b, size=per - beta[r] - 1)
        parts = []
        for r in range(d):
            # largest allowed digit count keeps the branch
            cap = per if beta[r] == per else min(int(beta[r]) + 1, per)
            parts.append(int(rng.integers(0, b**cap)))
        if case == "ii":
            bad = [r for r in range(d) if beta[r] < per - 1]
            r = bad[int(rng.integers(0, len(bad)))]
            parts[r] = int(rng.integers(b ** (int(beta[r]) + 1), b**per))
        k = interlace_index(parts, b)
        kp = k
        if case == "i":
            while kp == k:
                kp = int(rng.integers(0, b**W))
        flat = lambda z: DigitPoint(b, tuple(int(v) for v in z.T.reshape(-1)))
        out.append(OwenCase(b, d, flat(x), flat(xp), k, kp, case))
    return out


def check_owen_case(case: OwenCase, trials: int = 10_000, seed: int = 0, n_se: float = 4.0) -> dict:
    exact = owen_expectation_exact(case.k, case.kp, case.x, case.xp, case.d)
    mc, se = owen_expectation_mc(case.k, case.kp, case.x, case.xp, case.d, trials, seed)
    err = abs(mc - float(exact))
    return {
        "b": case.b,
        "d": case.d,
        "k": case.k,
        "kp": case.kp,
        "case": case.case,
        "exact": str(exact),
        "mc": [mc.real, mc.imag],
        "stderr": se,
        "passed": bool(err <= n_se * se + 1e-12),
    }


def canonical_k(ell: Sequence[int], b: int) -> tuple[int, ...]:
    """Smallest member of the shell: ``b**(l - 1)`` for ``l > 0``, else 0."""
    return tuple(b ** (l - 1) if l > 0 else 0 for l in ell)


def _pair_groups(digits: np.ndarray, b: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Distinct per-coordinate agreement depths over all point pairs, with counts."""
    N, ds, W = digits.shape
    if N * N > PAIR_GUARD:
        raise GuardError(f"{N * N} point pairs exceed the gain-coefficient guard")
    depth = np.empty((N * N, ds), dtype=np.int64)
    for j in range(ds):
        eq = digits[:, None, j, :] == digits[None, :, j, :]
        depth[:, j] = np.cumprod(eq, axis=2).sum(axis=2).reshape(-1)
    groups, counts = np.unique(depth, axis=0, return_counts=True)
    return groups, counts, W


def _block_factor(depths: Sequence[int], W: int, ks: Sequence[int], b: int) -> Fraction:
    # depths are per-coordinate agreement lengths of the d coordinates feeding one block,
    # i.e. the beta profile of the interlaced pair
    return _owen_factor(tuple(depths), tuple(dp == W for dp in depths), tuple(ks), b)


def gain_coefficients(
    net: DigitalNet,
    d: int,
    ells: Sequence[Sequence[int]],
    ks: Sequence[Sequence[int]] | None = None,
) -> list[Fraction]:
    """Exact gain coefficients of order ``d`` for a ``ds``-dimensional net.

    ``net`` is the net before interlacing.  For each ``ell`` the pair sum
    ``b**(-2m) sum_{n,n'} prod_i E_i`` is evaluated with ``E_i`` the exact
    order-``d`` expectation for block ``i`` of the interlaced points.  Pairs
    are grouped by their agreement-depth profile, so each product is formed
    once per distinct profile.  ``ks`` optionally picks a member of each
    shell; the default is :func:`canonical_k`.
    """
    b, ds = net.spec.b, net.spec.s
    if ds % d:
        raise ValueError(f"net dimension {ds} is not divisible by d={d}")
    groups, counts, W = _pair_groups(net.digits, b)
    total = Fraction(1, b ** (2 * net.spec.m))
    out = []
    for idx, ell in enumerate(ells):
        ell = tuple(ell)
        if len(ell) != ds:
            raise ValueError(f"ell must have {ds} entries")
        k = tuple(ks[idx]) if ks is not None else canonical_k(ell, b)
        for kj, lj in zip(k, ell):
            lo = b ** (lj - 1) if lj > 0 else 0
            if not lo <= kj < b**lj:
                raise ValueError(f"k={k} is not in the shell of ell={ell}")
        acc = Fraction(0)
        for g, c in zip(groups, counts):
            prod = Fraction(1)
            for i in range(0, ds, d):
                prod *= _block_factor(g[i : i + d], W, k[i : i + d], b)
                if not prod:
                    break
            acc += int(c) * prod
        out.append(acc * total)
    return out


def gain_coefficient(net: DigitalNet, d: int, ell: Sequence[int], k: Sequence[int] | None = None) -> Fraction:
    return gain_coefficients(net, d, [ell], None if k is None else [k])[0]


def gain_bound(ell: Sequence[int], m: int, t: int, b: int) -> tuple[str, Fraction]:
    """Band and upper bound for a gain coefficient of a digital (t, m, ds)-net.

    ``q`` is the number of nonzero entries of ``ell``.
    """
    norm = sum(ell)
    q = sum(1 for l in ell if l > 0)
    if norm <= m - t:
        return "zero", Fraction(0)
    if norm <= m - t + q:
        return "middle", Fraction(b) ** (q - norm)
    return "upper", Fraction(b) ** (t - m)


def enumerate_ell(ds: int, max_norm: int):
    """All ``ell`` in N_0^ds with ``|ell|_1 <= max_norm``."""
    for ell in itertools.product(range(max_norm + 1), repeat=ds):
        if sum(ell) <= max_norm:
            yield ell


def walsh_coefficients(f: Integrand, b: int, L: int, nodes: int = 8) -> np.ndarray:
    """Walsh coefficients ``fhat(k)`` of a 1-D integrand for ``0 <= k < b**L``.

    Walsh functions with ``k < b**L`` are constant on cells of width
    ``b**-L``, so ``fhat(k)`` is the cell integrals weighted by the Walsh
    values.  Cell integrals use Gauss-Legendre with ``nodes`` points; the
    weighting is a size-``b`` DFT along each digit axis.
    """
    if f.dim != 1:
        raise ValueError("walsh_coefficients handles one-dimensional integrands")
    if b**L > 1 << 24:
        raise GuardError(f"{b}**{L} cells is too many")
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    width = float(b) ** -L
    left = np.arange(b**L) * width
    pts = left[:, None] + (gx[None, :] + 1) * (width / 2)
    cell = (f(pts.reshape(-1, 1)).reshape(pts.shape) @ gw) * (width / 2)
    spec = np.fft.fftn(cell.reshape((b,) * L)) if L else cell.astype(complex)
    # axis j carries kappa_j, so reversing the axes makes the flat index equal k
    return np.ascontiguousarray(np.transpose(spec, tuple(reversed(range(L))))).reshape(-1)


def _digit_count(v: np.ndarray, b: int) -> np.ndarray:
    out = np.zeros(v.shape, dtype=np.int64)
    v = v.copy()
    while np.any(v):
        nz = v > 0
        out[nz] += 1
        v //= b
    return out


def sigma_squared_table(fhat: np.ndarray, b: int, d: int) -> dict[tuple[int, ...], float]:
    """``sigma^2_{d,ell,1}`` for every ``ell`` reachable from ``fhat``'s index range.

    Each ``k`` is split into ``d`` interlaced parts; its energy
    ``|fhat(k)|^2`` is credited to the shell given by the digit counts of
    those parts.
    """
    k = np.arange(fhat.size, dtype=np.int64)
    parts = np.zeros((d, k.size), dtype=np.int64)
    rem = k.copy()
    pos = 0
    while np.any(rem):
        digit = rem % b
        rem //= b
        r, a = pos % d, pos // d
        parts[r] += digit * b**a
        pos += 1
    counts = np.stack([_digit_count(p, b) for p in parts], axis=1)
    energy = np.abs(fhat) ** 2
    keys, inverse = np.unique(counts, axis=0, return_inverse=True)
    sums = np.bincount(inverse.reshape(-1), weights=energy, minlength=len(keys))
    return {tuple(int(v) for v in key): float(val) for key, val in zip(keys, sums)}


def gamma_weight(ell: Sequence[int], d: int, alpha: int, b: int) -> float:
    """Product of the ``alpha_i`` smallest weights ``(b-1) b^{-j-(l_j-1)d}`` per block."""
    ell = list(ell)
    if len(ell) % d:
        raise ValueError("ell length must be a multiple of d")
    out = 1.0
    for start in range(0, len(ell), d):
        block = ell[start : start + d]
        weights = sorted((b - 1) * float(b) ** (-(j + 1) - (l - 1) * d) for j, l in enumerate(block) if l > 0)
        for w in weights[: min(alpha, len(weights))]:
            out *= w
    return out


def sigma_bound(ell: Sequence[int], d: int, alpha: int, variation: float, b: int) -> float:
    s = len(ell) // d
    return 2.0 ** (s * max(d - alpha, 0)) * gamma_weight(ell, d, alpha, b) * variation


@dataclass
class VarianceReport:
    empirical_variance: float
    empirical_stderr: float
    predicted_variance: float
    tail_bound: float | None
    replications: int
    terms: list[dict] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return abs(self.empirical_variance - self.predicted_variance)

    def agrees(self, rel: float = 0.1, n_se: float = 4.0, atol: float = 1e-24) -> bool:
        slack = rel * self.predicted_variance + n_se * self.empirical_stderr + (self.tail_bound or 0.0) + atol
        return self.gap <= slack

    def to_json(self) -> dict:
        return {
            "empirical_variance": self.empirical_variance,
            "empirical_stderr": self.empirical_stderr,
            "predicted_variance": self.predicted_variance,
            "tail_bound": self.tail_bound,
            "replications": self.replications,
            "agrees": self.agrees(),
            "terms": self.terms,
        }


def variance_decomposition_check(
    f: Integrand,
    net: DigitalNet,
    d: int,
    ell_budget: int,
    R: int = 10_000,
    seed: int = 0,
    t: int | None = None,
    L: int | None = None,
) -> VarianceReport:
    """Compare the scrambled-net variance with its shell decomposition.

    The empirical side is the replication variance of the order-``d``
    estimator over ``R`` scrambles of ``net`` (a ``d``-dimensional net
    feeding one interlaced coordinate).  The predicted side sums
    ``sigma^2_ell * Gamma_ell`` over ``0 < |ell|_1 <= ell_budget``.  The tail
    bound covers the shells left out, using the upper-band gain bound when
    the budget reaches past it.
    """
    b, m = net.spec.b, net.spec.m
    if net.spec.s != d or f.dim != 1:
        raise ValueError("the decomposition check covers s = 1 only")
    if L is None:
        L = min(d * ell_budget + 4, 22 if b == 2 else int(22 / math.log2(b)))
    fhat = walsh_coefficients(f, b, L)
    table = sigma_squared_table(fhat, b, d)
    ells = [e for e in table if 0 < sum(e) <= ell_budget]
    gammas = gain_coefficients(net, d, ells)
    terms = []
    predicted = 0.0
    for e, g in zip(ells, gammas):
        contrib = table[e] * float(g)
        predicted += contrib
        terms.append({"ell": list(e), "sigma2": table[e], "gamma": float(g), "contribution": contrib})
    terms.sort(key=lambda r: -r["contribution"])

    gx, gw = np.polynomial.legendre.leggauss(64)
    # composite rule on 64 panels for the integrand's own variance
    edges = np.linspace(0, 1, 65)
    xs = (edges[:-1, None] + (gx[None, :] + 1) / 2 * np.diff(edges)[:, None]).reshape(-1)
    ws = np.tile(gw, 64) / 2 / 64
    fv = f(xs[:, None])
    var_f = float(np.sum(ws * fv**2) - np.sum(ws * fv) ** 2)
    captured = sum(table[e] for e in ells)
    tail = None
    if t is not None and ell_budget >= m - t + d:
        tail = max(var_f - captured, 0.0) * float(b) ** (t - m)

    pts = randomize_net_digits(net.digits, b, d, "owen", seed, range(R))
    ests = f(pts.reshape(-1, 1)).reshape(R, -1).mean(axis=1)
    var = float(ests.var(ddof=1))
    se = var * math.sqrt(2.0 / (R - 1))
    return VarianceReport(var, se, predicted, tail, R, terms)


def finite_difference(f: Integrand, x: Sequence[float], zs: Sequence[Sequence[float]]) -> float:
    """Generalized mixed finite difference.

    ``zs[i]`` holds the steps ``z_{i,1..alpha_i}`` for coordinate ``i``; the
    difference is the signed sum of ``f`` over all subset shifts.
    """
    x = np.asarray(x, dtype=float)
    if len(zs) != x.size:
        raise ValueError("need one step list per coordinate")
    per_coord = []
    for xi, z in zip(x, zs):
        opts = []
        for mask in itertools.product((0, 1), repeat=len(z)):
            shift = sum(zj for zj, bit in zip(z, mask) if bit)
            opts.append((xi + shift, (-1) ** (len(z) - sum(mask))))
        per_coord.append(opts)
    pts, signs = [], []
    for combo in itertools.product(*per_coord):
        pts.append([c[0] for c in combo])
        signs.append(math.prod(c[1] for c in combo))
    pts = np.array(pts)
    if np.any(pts < 0) or np.any(pts > 1):
        raise ValueError("finite difference evaluates f outside [0,1]^s")
    return float(np.dot(signs, f(pts)))


def derivative_limit_errors(
    f: Integrand,
    x: float,
    alpha: int,
    z: Sequence[float],
    halvings: int = 4,
) -> list[float]:
    """``|Delta_alpha / prod z - f^(alpha)(x)|`` as the steps ``z`` are halved repeatedly."""
    if f.partial is None:
        raise ValueError("integrand has no derivative evaluators")
    exact = float(f.partial((alpha,))(np.array([[x]]))[0])
    out = []
    for h in range(halvings + 1):
        zz = [v / 2**h for v in z]
        out.append(abs(finite_difference(f, [x], [zz]) / math.prod(zz) - exact))
    return out


def variation_smooth(f: Integrand, alpha: int, level: int = 32) -> float:
    """Order-``alpha`` variation of a smooth integrand in its derivative-norm form.

    Sums, over coordinate subsets ``u`` and orders in ``{1..alpha}^|u|``, the
    squared L2 norm over ``x_u`` of the mixed partial integrated over the
    other coordinates; the empty subset contributes ``(int f)^2``.
    Integrals use a tensor Gauss-Legendre grid with ``level`` nodes per axis.
    """
    if f.partial is None:
        raise ValueError(f"integrand {f.name!r} supplies no derivative evaluators")
    s = f.dim
    gx, gw = np.polynomial.legendre.leggauss(level)
    nodes, weights = (gx + 1) / 2, gw / 2
    grid = np.stack(np.meshgrid(*([nodes] * s), indexing="ij"), axis=-1).reshape(-1, s)
    total = 0.0
    for size in range(s + 1):
        for u in itertools.combinations(range(s), size):
            for orders in itertools.product(range(1, alpha + 1), repeat=size):
                a = [0] * s
                for i, o in zip(u, orders):
                    a[i] = o
                vals = f.partial(tuple(a))(grid).reshape((level,) * s)
                # integrate out coordinates not in u
                for axis in sorted(set(range(s)) - set(u), reverse=True):
                    vals = np.tensordot(vals, weights, axes=([axis], [0]))
                sq = np.abs(vals) ** 2
                for _ in u:
                    sq = np.tensordot(sq, weights, axes=([0], [0]))
                total += float(sq)
    return math.sqrt(total)
