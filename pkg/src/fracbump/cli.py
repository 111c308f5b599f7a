"""Command-line front end: ``python -m fracbump <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bump import bump_corollary15, bump_necessity_quantities, bump_term_left, bump_term_right, bump_thm17
from .config import ConfigError, Scenario, parse_scenario
from .dyadic import DyadicLattice, SparseFamily, construct_sparse_family, packing_ratio, sparsity_verify
from .experiments import ExperimentError, _default_bumps, run_scenario, write_result
from .grid import Domain, GridFunction
from .orlicz import bp_membership, parse_young
from .report import _jsonable
from .verify import verify_all
from .weights import parse_symbol, parse_weight

_OVERRIDES = {
    "grid": ("--grid", int),
    "dim": ("--dim", int),
    "half_width": ("--half-width", float),
    "alpha": ("--alpha", float),
    "p": ("--p", float),
    "q": ("--q", float),
    "m": ("--m", int),
    "seed": ("--seed", int),
    "trials": ("--trials", int),
}


def _common(parser: argparse.ArgumentParser, scenario_flags: bool = True):
    if scenario_flags:
        for name, (flag, kind) in _OVERRIDES.items():
            kw = {"choices": (1, 2)} if name == "dim" else {}
            parser.add_argument(flag, dest=name, type=kind, default=None, **kw)
    parser.add_argument("--out", default=None, help="write the result here instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), default="json")


def _scenario(args, kind: str) -> Scenario:
    s = parse_scenario(args.config) if getattr(args, "config", None) else Scenario(kind=kind)
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    changes["kind"] = kind
    return s.replace(**changes)


def _emit(text: str, args) -> None:
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(obj, args) -> None:
    _emit(json.dumps(_jsonable(obj), sort_keys=True, indent=2), args)


def _experiment(args, kind: str) -> int:
    s = _scenario(args, kind)
    r = run_scenario(s)
    out = args.out or s.output or None
    write_result(r, out, args.format) if out else sys.stdout.write(write_result(r, None, args.format))
    return 0 if r.passed else 1


# -- commands ---------------------------------------------------------------------------


def cmd_young(args) -> int:
    A = parse_young(args.spec)
    vals = np.array(args.values, dtype=float)
    if args.action == "eval":
        _dump({"spec": A.spec(), "t": vals, "value": np.asarray(A(vals))}, args)
    elif args.action == "inverse":
        _dump({"spec": A.spec(), "s": vals, "inverse": np.asarray(A.inverse(vals))}, args)
    elif args.action == "complement":
        Abar = A.complementary()
        out = {"spec": A.spec(), "complement": Abar.spec()}
        if vals.size:
            out.update(t=vals, value=np.asarray(Abar(vals)))
        _dump(out, args)
    else:
        if args.p is None:
            raise ConfigError("young bp needs --p")
        r = bp_membership(A, args.p, args.q)
        _dump({"spec": A.spec(), "p": args.p, "q": args.q, "verdict": r.verdict.value,
               "closed_form": r.closed_form, "diagnostics": r.diagnostics}, args)
    return 0


def cmd_bump(args) -> int:
    s = _scenario(args, parse_scenario(args.config).kind if args.config else "sufficiency")
    d = Domain(s.dim, s.half_width, s.grid)
    mu = parse_weight(s.mu).realize(d, s.base_dir or None)
    nu = parse_weight(s.nu).realize(d, s.base_dir or None)
    b = parse_symbol(s.b, d, s.base_dir or None)
    q = s.q_value
    A, B, C, D = _default_bumps(s)
    reports = {
        "term_left": bump_term_left(mu, nu, b, s.p, q, s.alpha, s.m, A, B),
        "term_right": bump_term_right(mu, nu, b, s.p, q, s.alpha, s.m, C, D),
        "thm17": bump_thm17(mu, nu, s.p, q, s.alpha, s.m),
    }
    nl, nr = bump_necessity_quantities(mu, nu, b, s.p, q, s.alpha, s.m)
    reports.update(necessity_left=nl, necessity_right=nr)
    c15 = bump_corollary15(mu, nu, s.p, q, s.alpha, s.m, s.delta)
    reports.update(log_bump_1=c15.term1, log_bump_2=c15.term2, older_condition=c15.older_condition)
    if args.format == "csv":
        lines = ["functional,cube,value"]
        for name, r in reports.items():
            lines += [f"{name},{lab},{v!r}" for lab, v in r.per_cube]
        _emit("\n".join(lines), args)
    else:
        _dump({"scenario": s.echo(), "reports": {k: r.to_dict() for k, r in reports.items()}}, args)
    return 0


def cmd_sparse(args) -> int:
    if args.action == "build":
        f = GridFunction.from_csv(args.input)
        S = construct_sparse_family(f, DyadicLattice(f.domain), args.threshold, args.min_cells)
        _emit(S.dumps(), args)
        return 0
    S = SparseFamily.load(args.input)
    eta = sparsity_verify(S)
    _dump({"cubes": len(S), "eta": eta, "packing_ratio": packing_ratio(S), "sparse_half": eta >= 0.5}, args)
    return 0 if eta >= 0.5 else 1


def cmd_verify_all(args) -> int:
    ok, results, text = verify_all(echo=lambda line: print(line, file=sys.stderr))
    if args.format == "csv":
        text = "check,passed\n" + "".join(f"{r.name},{r.passed}\n" for r in results)
    _emit(text, args)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracbump", description="Bump conditions and commutators of fractional integrals on grids.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    y = sub.add_parser("young", help="evaluate, invert, complement or classify a Young function")
    y.add_argument("action", choices=("eval", "inverse", "complement", "bp"))
    y.add_argument("spec", help='e.g. "powerlog(p=2, r=1)"')
    y.add_argument("values", nargs="*", type=float)
    y.add_argument("--p", type=float, default=None)
    y.add_argument("--q", type=float, default=None)
    _common(y, scenario_flags=False)
    y.set_defaults(func=cmd_young)

    b = sub.add_parser("bump", help="all bump functionals for a config")
    b.add_argument("config", nargs="?")
    _common(b)
    b.set_defaults(func=cmd_bump)

    sp = sub.add_parser("sparse", help="build or verify a sparse family")
    sp.add_argument("action", choices=("build", "verify"))
    sp.add_argument("input", help="grid-function CSV (build) or family file (verify)")
    sp.add_argument("--threshold", type=float, default=None)
    sp.add_argument("--min-cells", type=int, default=4)
    _common(sp, scenario_flags=False)
    sp.set_defaults(func=cmd_sparse)

    for name, kind, help_text in (
        ("opnorm", "sufficiency", "empirical operator norms next to bump constants"),
        ("bloom", "bloom", "Bloom converse checks"),
        ("kernel", "kernel_sep", "kernel separation decay"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", nargs="?")
        _common(p)
        p.set_defaults(func=lambda a, k=kind: _experiment(a, k))

    n = sub.add_parser("necessity", help="necessity experiments")
    n.add_argument("which", choices=("sparse", "thm17"))
    n.add_argument("config", nargs="?")
    _common(n)
    n.set_defaults(func=lambda a: _experiment(a, "sparse_necessity" if a.which == "sparse" else "thm17_necessity"))

    v = sub.add_parser("verify-all", help="run every invariant suite")
    _common(v, scenario_flags=False)
    v.set_defaults(func=cmd_verify_all)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ExperimentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
