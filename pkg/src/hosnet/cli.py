"""Command-line front end: ``hosnet points|converge|verify|theory``.

Every artifact carries the run configuration and a schema version.  CSV
files start with ``#`` comment lines holding them; JSON files embed them
under ``config`` and ``schema_version``.  The exit status is 0 exactly when
every check the command performs passes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .badic import check_base, float_digit_budget
from .estimator import (
    ESTIMATOR_KINDS,
    INTEGRANDS,
    ConvergenceTable,
    builtin_integrand,
    fit_slope,
    run_replications,
    ConvergenceRow,
)
from .interlace import interlace_digits
from .netgen import (
    DigitalNet,
    GeneratorMatrixSet,
    GuardError,
    NetSpec,
    builtin_matrices,
    generate_net,
    t_value,
    verify_net,
)
from .scramble import PermutationSource, ScrambleKey, linear_scramble_net, scramble_net

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240901
CONSTRUCTIONS = ("van_der_corput", "vdc", "sobol", "faure")


@dataclass
class RunConfig:
    command: str
    b: int = 2
    m: int | None = None
    m_range: list[int] | None = None
    s: int | None = None
    d: int = 1
    construction: str = "sobol"
    scramble: str = "none"
    seed: int = DEFAULT_SEED
    replications: int | None = None
    integrand: str | None = None
    output: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        check_base(self.b)
        if self.d < 1:
            raise ValueError("--interlace/--d must be >= 1")
        if self.d > float_digit_budget(self.b):
            raise ValueError(f"d={self.d} leaves no digits in the float budget of base {self.b}")
        if self.m is not None and self.m < 0:
            raise ValueError("--m must be nonnegative")
        if self.s is not None and self.s < 1:
            raise ValueError("--s must be >= 1")
        if self.replications is not None and self.replications < 2:
            raise ValueError("--reps must be at least 2")
        if self.seed < 0:
            raise ValueError("--seed must be nonnegative")

    def to_json(self) -> dict:
        return asdict(self)


def _header(cfg: RunConfig) -> dict:
    return {"schema_version": SCHEMA_VERSION, "config": cfg.to_json()}


def _csv_with_header(cfg: RunConfig, body: str) -> str:
    return f"# schema_version: {SCHEMA_VERSION}\n# config: {json.dumps(cfg.to_json(), sort_keys=True)}\n{body}"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _matrices(args, s: int, m: int) -> GeneratorMatrixSet:
    if getattr(args, "matrices", None):
        raw = json.loads(Path(args.matrices).read_text())
        return GeneratorMatrixSet(args.b, np.array(raw, dtype=np.int64))
    return builtin_matrices(args.construction, args.b, s, m)


def cmd_points(args) -> int:
    cfg = RunConfig(
        "points", args.b, args.m, None, args.s, args.interlace, args.construction,
        args.scramble, args.seed, None, None, args.out, args.format,
    )
    cfg.validate()
    if args.scramble not in ("owen", "linear", "none"):
        raise ValueError("points supports --scramble owen|linear|none")
    if args.s % args.interlace:
        raise ValueError(f"--s {args.s} is not divisible by --interlace {args.interlace}")
    G = _matrices(args, args.s, args.m)
    net = generate_net(G, construction=args.construction)
    w_in = float_digit_budget(args.b) // args.interlace
    if args.scramble == "owen":
        net = scramble_net(net, PermutationSource(ScrambleKey(args.seed, 0, args.b, depth=w_in)))
    elif args.scramble == "linear":
        net = linear_scramble_net(net, ScrambleKey(args.seed, 0, args.b, depth=w_in))
    if args.interlace > 1:
        dg = interlace_digits(net.digits, args.interlace)
        spec = NetSpec(args.b, args.m, args.s // args.interlace, args.interlace)
        net = DigitalNet(spec, dg, net.construction)
    if args.format == "csv":
        text = _csv_with_header(cfg, net.to_csv())
    else:
        text = json.dumps({**_header(cfg), **net.to_json()}) + "\n"
    _emit(text, args.out)
    return 0


def cmd_converge(args) -> int:
    f = builtin_integrand(args.integrand)
    ms = list(range(args.m_min, args.m_max + 1))
    cfg = RunConfig(
        "converge", args.b, None, ms, f.dim, args.d, args.construction, args.scramble,
        args.seed, args.reps, args.integrand, args.out, "csv",
        {"threads": args.threads, "expect_slope": args.expect_slope},
    )
    cfg.validate()
    if not ms:
        raise ValueError("--m-min must not exceed --m-max")

    def one(m):
        res = run_replications(f, NetSpec(args.b, m, f.dim, args.d), args.scramble, args.seed, args.reps, args.construction)
        return ConvergenceRow(args.d, m, args.b**m, res.rmse, res.stderr_rmse, args.reps)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(one, ms))
    fit_rows = rows[-math.ceil(len(rows) / 2) :]
    slope, intercept, ok = fit_slope([r.N for r in fit_rows], [r.rmse for r in fit_rows])
    table = ConvergenceTable(rows, slope, intercept, tuple(r.m for r in fit_rows), ok, args.scramble, args.seed, f.name)

    passed = True
    if args.expect_slope is not None:
        passed = ok and slope <= args.expect_slope
    summary = {**_header(cfg), **table.summary(), "passed": passed}
    csv_text = _csv_with_header(cfg, table.to_csv())
    if args.out:
        out = Path(args.out)
        out.write_text(csv_text)
        out.with_suffix(".json").write_text(json.dumps(summary, indent=2) + "\n")
    else:
        sys.stdout.write(csv_text)
    slope_txt = f"{slope:.3f}" if ok else "undefined"
    print(f"slope {slope_txt} over m={list(table.fit_m)}", file=sys.stderr)
    return 0 if passed else 1


def cmd_verify(args) -> int:
    construction = "custom" if args.matrices else args.construction
    cfg = RunConfig("verify", args.b, args.m, None, args.s, 1, construction, "none", 0, None, None, args.out)
    cfg.validate()
    G = _matrices(args, args.s, args.m)
    t = t_value(G)
    net = generate_net(G, construction=args.construction)
    ok, bad = verify_net(net, t)
    report = {**_header(cfg), "t": t, "passed": bool(ok), "counterexample": None if ok else list(map(list, bad))}
    if t >= 1:
        tight, _ = verify_net(net, t - 1)
        report["fails_at_t_minus_1"] = not tight
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    print(f"t={t} {'pass' if ok else 'FAIL'}", file=sys.stderr)
    return 0 if ok else 1


def cmd_theory(args) -> int:
    from . import theory

    cfg = RunConfig(
        f"theory {args.suite}", args.b, getattr(args, "m", None), None, getattr(args, "s", None),
        getattr(args, "d", 1), getattr(args, "construction", "sobol"), "owen", args.seed,
        getattr(args, "reps", None), getattr(args, "integrand", None), args.out,
    )
    cfg.validate()
    if args.suite == "owen-check":
        cases = theory.owen_case_grid(args.cases, args.seed)
        results = [theory.check_owen_case(c, args.trials, args.seed + i) for i, c in enumerate(cases)]
        n_pass = sum(r["passed"] for r in results)
        min_pass = args.min_pass if args.min_pass is not None else len(results)
        report = {"cases": results, "n_pass": n_pass, "n_cases": len(results), "passed": n_pass >= min_pass}
    elif args.suite == "gain":
        G = _matrices(args, args.s, args.m)
        t = t_value(G)
        net = generate_net(G, construction=args.construction)
        if args.ell:
            ells = [tuple(int(v) for v in args.ell.split(","))]
        else:
            ells = [e for e in theory.enumerate_ell(args.s, args.max_norm) if sum(e) > 0]
        gains = theory.gain_coefficients(net, args.d, ells)
        cases = []
        for e, g in zip(ells, gains):
            band, bound = theory.gain_bound(e, args.m, t, args.b)
            ok = g == 0 if band == "zero" else abs(g) <= bound
            cases.append({"ell": list(e), "gamma": str(g), "band": band, "bound": str(bound), "passed": bool(ok)})
        report = {"t": t, "cases": cases, "passed": all(c["passed"] for c in cases)}
    else:
        f = builtin_integrand(args.integrand)
        G = builtin_matrices(args.construction, args.b, args.d, args.m)
        t = t_value(G)
        net = generate_net(G, construction=args.construction)
        res = theory.variance_decomposition_check(f, net, args.d, args.ell_budget, args.reps, args.seed, t)
        report = {"t": t, **res.to_json(), "passed": res.agrees()}
    _emit(json.dumps({**_header(cfg), **report}, indent=2) + "\n", args.out)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hosnet", description="Higher-order scrambled digital nets.")
    sub = p.add_subparsers(dest="command", required=True)

    def net_args(sp, s_default=1):
        sp.add_argument("--construction", default="sobol", choices=CONSTRUCTIONS)
        sp.add_argument("--b", type=int, default=2, help="base (prime)")
        sp.add_argument("--m", type=int, default=4, help="log_b of the number of points")
        sp.add_argument("--s", type=int, default=s_default, help="dimension of the base net")

    sp = sub.add_parser("points", help="write net points")
    net_args(sp)
    sp.add_argument("--interlace", type=int, default=1, help="interlacing factor d")
    sp.add_argument("--scramble", default="none", choices=("owen", "linear", "none"))
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--format", default="csv", choices=("csv", "json"))
    sp.add_argument("--matrices", help="JSON file with generator matrices (s, rows, m)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_points)

    sp = sub.add_parser("converge", help="RMSE convergence experiment")
    sp.add_argument("--integrand", default="example1", choices=sorted(INTEGRANDS))
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--m-min", type=int, default=6)
    sp.add_argument("--m-max", type=int, default=14)
    sp.add_argument("--reps", type=int, default=300)
    sp.add_argument("--scramble", default="owen", choices=ESTIMATOR_KINDS)
    sp.add_argument("--construction", default="sobol", choices=CONSTRUCTIONS)
    sp.add_argument("--b", type=int, default=2)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--expect-slope", type=float, help="fail unless the fitted slope is at most this")
    sp.add_argument("--out", help="CSV path; the JSON summary goes next to it")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("verify", help="compute t and check the net property")
    net_args(sp)
    sp.add_argument("--matrices", help="JSON file with generator matrices (s, rows, m)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("theory", help="theory checks")
    tsub = sp.add_subparsers(dest="suite", required=True)
    oc = tsub.add_parser("owen-check")
    oc.add_argument("--cases", type=int, default=60)
    oc.add_argument("--trials", type=int, default=10_000)
    oc.add_argument("--min-pass", type=int)
    oc.add_argument("--b", type=int, default=2, help=argparse.SUPPRESS)
    gn = tsub.add_parser("gain")
    net_args(gn)
    gn.add_argument("--d", type=int, default=1)
    gn.add_argument("--max-norm", type=int, help="largest |ell|_1 (default m + 4)")
    gn.add_argument("--ell", help="single comma-separated ell instead of the enumeration")
    gn.add_argument("--matrices", help="JSON file with generator matrices (s, rows, m)")
    vd = tsub.add_parser("vardecomp")
    vd.add_argument("--integrand", default="example1")
    vd.add_argument("--construction", default="sobol", choices=CONSTRUCTIONS)
    vd.add_argument("--b", type=int, default=2)
    vd.add_argument("--m", type=int, default=6)
    vd.add_argument("--d", type=int, default=2)
    vd.add_argument("--ell-budget", type=int, default=12)
    vd.add_argument("--reps", type=int, default=4000)
    for t in (oc, gn, vd):
        t.add_argument("--seed", type=int, default=DEFAULT_SEED)
        t.add_argument("--out")
    sp.set_defaults(func=cmd_theory)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "suite", None) == "gain" and args.max_norm is None:
        args.max_norm = args.m + 4
    try:
        return args.func(args)
    except (ValueError, GuardError) as exc:
        print(f"hosnet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
