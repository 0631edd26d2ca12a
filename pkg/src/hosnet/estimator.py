"""Randomized QMC estimation with interlaced scrambled digital nets.

The pipeline per replication: build a digital (t, m, ds)-net, scramble its
``ds`` coordinates with the replication's key, interlace groups of ``d``
coordinates down to ``s``, average the integrand over the ``b**m`` points.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .badic import digits_to_float, float_digit_budget
from .interlace import interlace_digits
from .netgen import NetSpec, builtin_matrices, generate_net
from .scramble import ScrambleKey, _linear_parts, _node_roots, owen_scramble_digits

__all__ = [
    "Integrand",
    "EstimateResult",
    "ConvergenceRow",
    "ConvergenceTable",
    "builtin_integrand",
    "INTEGRANDS",
    "sample_points",
    "randomize_net_digits",
    "estimate",
    "run_replications",
    "convergence_experiment",
    "fit_slope",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("d", "m", "N", "rmse", "stderr", "replications", "scramble", "seed", "integrand")
ESTIMATOR_KINDS = ("owen", "linear", "none", "mc")

# points processed per scrambling batch; bounds peak memory
_BATCH_POINTS = 1 << 20


@dataclass(frozen=True)
class Integrand:
    """Vectorized integrand: ``func`` maps an ``(n, s)`` array to ``(n,)``.

    ``partial(alpha)`` optionally returns the mixed partial derivative of
    order ``alpha`` (one entry per coordinate) as another vectorized callable.
    """

    name: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    exact: float | None = None
    partial: Callable[[tuple[int, ...]], Callable[[np.ndarray], np.ndarray]] | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.dim == 1 else x[None, :]
        return self.func(x)


def _example1() -> Integrand:
    def partial(alpha):
        (k,) = alpha
        return lambda x: (x[:, 0] + k) * np.exp(x[:, 0])

    return Integrand("example1", 1, lambda x: x[:, 0] * np.exp(x[:, 0]), 1.0, partial)


def _example2() -> Integrand:
    c = math.e - 2.0

    def partial(alpha):
        # d^p/dx^p d^q/dy^q of y e^{xy}: sum over the Leibniz expansion in y
        p, q = alpha

        def g(x):
            u, v = x[:, 0], x[:, 1]
            e = np.exp(u * v)
            # d^p/dx^p (y e^{xy}) = y^{p+1} e^{xy}; then q derivatives in y of y^{p+1} e^{xy}
            out = np.zeros_like(u)
            for j in range(q + 1):
                if j > p + 1:
                    break
                coef = math.comb(q, j) * math.perm(p + 1, j)
                out += coef * v ** (p + 1 - j) * u ** (q - j) * e
            return out / c

        return g

    return Integrand("example2", 2, lambda x: x[:, 1] * np.exp(x[:, 0] * x[:, 1]) / c, 1.0, partial)


def _const(s: int = 1, value: float = 1.0) -> Integrand:
    def partial(alpha):
        if any(alpha):
            return lambda x: np.zeros(x.shape[0])
        return lambda x: np.full(x.shape[0], value)

    return Integrand("const", s, lambda x: np.full(x.shape[0], value), value, partial)


def _linear(s: int = 1) -> Integrand:
    def partial(alpha):
        if sum(alpha) == 0:
            return lambda x: x.sum(axis=1)
        if sum(alpha) == 1:
            return lambda x: np.ones(x.shape[0])
        return lambda x: np.zeros(x.shape[0])

    return Integrand("linear", s, lambda x: x.sum(axis=1), s / 2.0, partial)


def _product_peak(s: int = 2, a: float = 5.0) -> Integrand:
    # Genz product peak centred at 1/2
    def f(x):
        return np.prod(1.0 / (a**-2 + (x - 0.5) ** 2), axis=1)

    exact = (2 * a * math.atan(a / 2)) ** s
    return Integrand("product_peak", s, f, exact)


INTEGRANDS = {
    "example1": _example1,
    "example2": _example2,
    "const": _const,
    "linear": _linear,
    "product_peak": _product_peak,
}


def builtin_integrand(name: str, s: int | None = None) -> Integrand:
    """Named test integrand with its closed-form integral attached."""
    try:
        make = INTEGRANDS[name]
    except KeyError:
        raise ValueError(f"unknown integrand {name!r}; choose from {sorted(INTEGRANDS)}") from None
    if s is None:
        return make()
    if name in ("example1", "example2"):
        f = make()
        if f.dim != s:
            raise ValueError(f"{name} is {f.dim}-dimensional, not {s}")
        return f
    return make(s)


@lru_cache(maxsize=64)
def _base_net_digits(construction: str, b: int, ds: int, m: int) -> np.ndarray:
    G = builtin_matrices(construction, b, ds, m)
    return generate_net(G, construction=construction).digits


def _check_budget(b: int, d: int) -> int:
    w_in = float_digit_budget(b) // d
    if w_in < 1:
        raise ValueError(f"d={d} leaves no digits within the float budget of base {b}")
    return w_in


def sample_points(
    spec: NetSpec,
    kind: str,
    seed: int,
    replication_ids: Sequence[int],
    construction: str = "sobol",
) -> np.ndarray:
    """Sample points for each replication, shape ``(R, b**m, s)``.

    ``kind`` is one of ``owen``, ``linear``, ``none`` (unrandomized net) or
    ``mc`` (i.i.d. uniform points, the plain Monte Carlo baseline).
    Scrambled points are mapped to the midpoint of their finest b-adic cell,
    standing in for the uniformly scrambled digits past the working precision.
    """
    b, m, s, d = spec.b, spec.m, spec.s, spec.d
    reps = np.asarray(list(replication_ids), dtype=np.int64)
    if kind == "mc":
        return np.stack([np.random.default_rng([seed, int(r)]).random((b**m, s)) for r in reps])
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(f"unknown scramble kind {kind!r}; choose from {ESTIMATOR_KINDS}")
    base = _base_net_digits(construction, b, d * s, m)
    return randomize_net_digits(base, b, d, kind, seed, reps)


def randomize_net_digits(
    net_digits: np.ndarray,
    b: int,
    d: int,
    kind: str,
    seed: int,
    replication_ids: Sequence[int],
) -> np.ndarray:
    """Scramble a ``(N, ds, W)`` digit array per replication, interlace, convert.

    Returns floats of shape ``(R, N, ds // d)``.
    """
    reps = np.asarray(list(replication_ids), dtype=np.int64)
    N, ds, m = net_digits.shape
    w_in = _check_budget(b, d)
    if m > w_in:
        if np.any(net_digits[:, :, w_in:]):
            raise ValueError(f"net carries {m} digits; only {w_in} fit per coordinate at d={d}")
        m = w_in
    net = np.zeros((N, ds, w_in), dtype=np.uint8)
    net[:, :, :m] = net_digits[:, :, :m]
    if kind == "none":
        pts = digits_to_float(interlace_digits(net, d), b)
        return np.broadcast_to(pts, (len(reps),) + pts.shape).copy()
    if kind not in ("owen", "linear"):
        raise ValueError(f"cannot randomize a net with kind {kind!r}")

    out = np.empty((len(reps), N, ds // d))
    chunk = max(1, _BATCH_POINTS // (N * ds))
    for lo in range(0, len(reps), chunk):
        rr = reps[lo : lo + chunk]
        if kind == "owen":
            roots = _node_roots(seed, rr[:, None, None], np.arange(ds)[None, None, :])
            roots = np.broadcast_to(roots, (len(rr), N, ds))
            digits = np.broadcast_to(net, (len(rr),) + net.shape)
            sc = owen_scramble_digits(digits, roots, b)
        else:
            sc = np.empty((len(rr), N, ds, w_in), dtype=np.uint8)
            for j, r in enumerate(rr):
                for i in range(ds):
                    L, e = _linear_parts(ScrambleKey(seed, int(r), b), i, w_in)
                    # digits past m are zero, so only the first m columns of L act
                    y = net[:, i, :m].astype(np.float64) @ L[:, :m].T.astype(np.float64)
                    sc[j, :, i, :] = (y.astype(np.int64) + e) % b
        out[lo : lo + len(rr)] = digits_to_float(interlace_digits(sc, d), b, center=True)
    return out


def estimate(
    f: Integrand,
    spec: NetSpec,
    kind: str = "owen",
    key=None,
    construction: str = "sobol",
) -> float:
    """One randomized estimate: the mean of ``f`` over the scrambled, interlaced net."""
    if f.dim != spec.s:
        raise ValueError(f"integrand is {f.dim}-dimensional but the net has s={spec.s}")
    seed = 0 if key is None else key.seed
    rep = 0 if key is None else key.replication_id
    pts = sample_points(spec, kind, seed, [rep], construction)[0]
    return float(np.mean(f(pts)))


@dataclass
class EstimateResult:
    estimate: float
    replications: int
    estimates: np.ndarray
    variance: float
    rmse: float | None
    stderr_rmse: float | None
    config: dict = field(default_factory=dict)

    @property
    def stderr(self) -> float:
        """Standard error of the replication mean."""
        return math.sqrt(self.variance / self.replications)

    def to_json(self) -> dict:
        out = asdict(self)
        out["estimates"] = [float(v) for v in self.estimates]
        out["stderr"] = self.stderr
        return out


def _rmse_stats(estimates: np.ndarray, exact: float | None) -> tuple[float | None, float | None]:
    if exact is None:
        return None, None
    sq = (estimates - exact) ** 2
    mse = float(sq.mean())
    rmse = math.sqrt(mse)
    if rmse == 0.0:
        return 0.0, 0.0
    se_mse = float(sq.std(ddof=1)) / math.sqrt(len(sq)) if len(sq) > 1 else float("nan")
    return rmse, se_mse / (2 * rmse)


def run_replications(
    f: Integrand,
    spec: NetSpec,
    kind: str = "owen",
    seed: int = 0,
    R: int = 300,
    construction: str = "sobol",
) -> EstimateResult:
    """``R`` independent estimates with replication ids ``0..R-1``."""
    if R < 2:
        raise ValueError("need at least two replications")
    if f.dim != spec.s:
        raise ValueError(f"integrand is {f.dim}-dimensional but the net has s={spec.s}")
    N = spec.n_points
    ests = np.empty(R)
    chunk = max(1, _BATCH_POINTS // (N * spec.s * spec.d))
    for lo in range(0, R, chunk):
        ids = range(lo, min(R, lo + chunk))
        pts = sample_points(spec, kind, seed, ids, construction)
        vals = f(pts.reshape(-1, spec.s)).reshape(len(ids), N)
        ests[lo : lo + len(ids)] = vals.mean(axis=1)
    rmse, se = _rmse_stats(ests, f.exact)
    config = {
        "b": spec.b,
        "m": spec.m,
        "s": spec.s,
        "d": spec.d,
        "scramble": kind,
        "seed": seed,
        "construction": construction,
        "integrand": f.name,
    }
    return EstimateResult(
        estimate=float(ests.mean()),
        replications=R,
        estimates=ests,
        variance=float(ests.var(ddof=1)),
        rmse=rmse,
        stderr_rmse=se,
        config=config,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    d: int
    m: int
    N: int
    rmse: float
    stderr: float
    replications: int


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    slope: float
    intercept: float
    fit_m: tuple[int, ...]
    slope_defined: bool
    scramble: str = "owen"
    seed: int = 0
    integrand: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.d, r.m, r.N, repr(r.rmse), repr(r.stderr), r.replications, self.scramble, self.seed, self.integrand])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "slope": None if not self.slope_defined else self.slope,
            "intercept": None if not self.slope_defined else self.intercept,
            "slope_defined": self.slope_defined,
            "fit_m": list(self.fit_m),
            "scramble": self.scramble,
            "seed": self.seed,
            "integrand": self.integrand,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def fit_slope(N: Sequence[float], rmse: Sequence[float]) -> tuple[float, float, bool]:
    """Least-squares slope and intercept of log(rmse) against log(N)."""
    N = np.asarray(N, dtype=float)
    rmse = np.asarray(rmse, dtype=float)
    if len(N) < 2 or np.any(rmse <= 0) or not np.all(np.isfinite(rmse)):
        return float("nan"), float("nan"), False
    slope, intercept = np.polyfit(np.log(N), np.log(rmse), 1)
    return float(slope), float(intercept), True


def convergence_experiment(
    f: Integrand,
    d: int,
    m_range: Sequence[int],
    R: int = 300,
    kind: str = "owen",
    seed: int = 0,
    b: int = 2,
    construction: str = "sobol",
) -> ConvergenceTable:
    """RMSE per ``m``, with a slope fitted on the larger half of ``m_range``."""
    ms = list(m_range)
    if not ms or ms != sorted(set(ms)):
        raise ValueError("m_range must be nonempty and strictly ascending")
    rows = []
    for m in ms:
        res = run_replications(f, NetSpec(b, m, f.dim, d), kind, seed, R, construction)
        rows.append(ConvergenceRow(d, m, b**m, res.rmse, res.stderr_rmse, R))
    n_fit = math.ceil(len(rows) / 2)
    fit_rows = rows[-n_fit:]
    slope, intercept, ok = fit_slope([r.N for r in fit_rows], [r.rmse for r in fit_rows])
    return ConvergenceTable(rows, slope, intercept, tuple(r.m for r in fit_rows), ok, kind, seed, f.name)
