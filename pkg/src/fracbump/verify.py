"""Invariant suites behind ``verify-all`` and the acceptance tests.

Each ``check_*`` function runs one batch of numerical invariants at fixed
sizes and seeds and returns a :class:`CheckResult`.  ``verify_all`` runs them
in order; its JSON summary leaves out wall times so that two runs compare
byte for byte.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .bump import bump_corollary15
from .config import Scenario
from .dyadic import (
    DyadicLattice,
    check_lattice_properties,
    construct_sparse_family,
    default_threshold,
    enumerate_cubes,
    sparsity_verify,
)
from .experiments import (
    run_bloom,
    run_kernel_sep,
    run_sparse_necessity,
    run_sufficiency,
    run_thm17_necessity,
)
from .grid import Domain, GridFunction
from .operators import (
    adjoint_defect,
    commutator,
    fractional_integral,
    pointwise_reduction_ratio,
    sparse_domination_check,
)
from .report import _jsonable
from .orlicz import (
    ExpMinusOne,
    Power,
    PowerLog,
    Tabulated,
    bp_membership,
    bp_quadrature,
    luxemburg_values,
)
from .weights import (
    LOG_MAXIMAL_AVERAGE_BOUND,
    kolmogorov_constant,
    kolmogorov_ratio,
    llogl_ratio,
    llogl_ratio_interval,
    log_maximal_test_function,
    parse_weight,
)

__all__ = ["CheckResult", "CHECKS", "verify_all", "SUFFICIENCY_INSTANCES"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  ({self.seconds:.1f}s)"


def _timed(name, fn):
    def run() -> CheckResult:
        t0 = time.perf_counter()
        passed, details = fn()
        return CheckResult(name, bool(passed), details, time.perf_counter() - t0)

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _smooth_noise(rng, shape, passes=3):
    v = rng.standard_normal(shape)
    for _ in range(passes):
        v = ndimage.uniform_filter(v, size=3, mode="constant")
    return v


def _inner(d: Domain, values):
    mask = np.all([np.abs(c) < d.half_width / 2 for c in d.coords()], axis=0)
    return np.where(mask, values, 0.0)


# -- 1. Orlicz engine ------------------------------------------------------------


def _orlicz_engine():
    rng = np.random.default_rng(101)
    worst_lux = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 65))
        p = float(rng.uniform(1.0, 6.0))
        v = rng.standard_normal(n) * np.exp(rng.uniform(-5, 5))
        exact = np.mean(np.abs(v) ** p) ** (1 / p)
        worst_lux = max(worst_lux, abs(luxemburg_values(v, Power(p)) - exact) / exact)

    families = [Power(1.5), Power(3.0, 0.5), PowerLog(2.0, 1.0), PowerLog(3.0, -1.5), PowerLog(1.0, 2.0), ExpMinusOne()]
    tab_t = np.concatenate([[0.0], np.logspace(-3, 3, 200)])
    families.append(Tabulated(tab_t, tab_t**2 * np.log(math.e + tab_t)))
    worst_round = 0.0
    for A in families:
        top = 700.0 if isinstance(A, ExpMinusOne) else 1e6
        t = np.concatenate([np.logspace(-6, math.log10(top), 400)])
        back = np.asarray(A.inverse(A(t)))
        worst_round = max(worst_round, float(np.max(np.abs(back - t) / t)))

    pairs = [(A, A.complementary()) for A in (Power(1.5), Power(3.0), Power(2.0, 2.0), PowerLog(2.0, 1.0), PowerLog(3.0, -1.0), ExpMinusOne())]
    young_worst = -math.inf
    for A, Abar in pairs:
        s = np.exp(rng.uniform(-6, 6, 10_000))
        t = np.exp(rng.uniform(-6, 6, 10_000))
        if isinstance(A, ExpMinusOne):
            s = np.minimum(s, 600.0)
        gap = s * t - np.asarray(A(s)) - np.asarray(Abar(t))
        young_worst = max(young_worst, float(np.max(gap / np.maximum(s * t, 1e-300))))
    ok = worst_lux <= 1e-9 and worst_round <= 1e-10 and young_worst <= 1e-12
    return ok, {"luxemburg_rel_err": worst_lux, "roundtrip_rel_err": worst_round, "young_max_rel_gap": young_worst}


check_orlicz_engine = _timed("1 orlicz engine", _orlicz_engine)


# -- 2. B_p classification -----------------------------------------------------------


def bp_instances():
    """Built-in instances (Young function, p, q) for the classifier."""
    out = []
    for p in (1.5, 2.0, 4.0):
        for a in (1.2, p - 0.3, p + 0.3):
            if a >= 1:
                out.append((Power(a), p, None))
                out.append((Power(a), p, 2 * p))
        for r in (-2.0, -1.5, -0.5, 0.0, 1.0):
            out.append((PowerLog(p, r), p, None))
        for r in (-1.5, -0.4, 0.0):
            out.append((PowerLog(p, r), p, 2 * p))
        out.append((ExpMinusOne(), p, None))
    # the complementary of the log bump used with exponential oscillation
    for p, delta in ((2.0, 0.5), (1.5, 0.3), (3.0, 0.2)):
        pd = p / (p - 1)
        out.append((PowerLog(p, -(1 + p * delta / pd)), p, None))
        out.append((PowerLog(pd, pd - 1 + delta).complementary(), p, None))
        out.append((PowerLog(pd, pd - 1 + delta).complementary(), p, 2 * p))
    return out


def _bp_classifier():
    disagree = []
    for A, p, q in bp_instances():
        res = bp_membership(A, p, q)
        diag = bp_quadrature(A, p, q)["convergent"]
        if res.member != diag:
            disagree.append(f"{A.spec()} p={p} q={q}")
    return not disagree, {"instances": len(bp_instances()), "disagreements": disagree}


check_bp_classifier = _timed("2 B_p classifier", _bp_classifier)


# -- 3. sparse machinery ---------------------------------------------------------------


def _sparse_functions(d: Domain, rng, count):
    out = []
    for k in range(count):
        kind = k % 3
        if kind == 0:
            v = np.abs(_smooth_noise(rng, d.shape))
        elif kind == 1:
            v = rng.pareto(1.0, d.shape)
        else:
            v = np.exp(3 * _smooth_noise(rng, d.shape, passes=1))
        out.append(GridFunction(d, v))
    return out


def _sparse_machinery():
    rng = np.random.default_rng(303)
    worst = {}
    for dim, n in ((1, 256), (2, 64)):
        d = Domain(dim, 1.0, n)
        lat = DyadicLattice(d)
        etas = [sparsity_verify(construct_sparse_family(f, lat, default_threshold(dim))) for f in _sparse_functions(d, rng, 100)]
        worst[f"{dim}d"] = min(etas)
    lattice = {}
    for dim in (1, 2):
        for n in (8, 16, 32):
            props = check_lattice_properties(DyadicLattice(Domain(dim, 1.0, n)))
            lattice[f"{dim}d_N{n}"] = all(props.values())
    ok = all(v >= 0.5 for v in worst.values()) and all(lattice.values())
    return ok, {"min_sparsity": worst, "lattice_axioms": lattice}


check_sparse_machinery = _timed("3 sparse machinery", _sparse_machinery)


# -- 4. sparse domination -------------------------------------------------------------


def _sparse_domination():
    d = Domain(1, 1.0, 128)
    alpha = 0.5
    details, ok = {}, True
    for m in (0, 1, 2):
        rng = np.random.default_rng(400 + m)
        ratios = []
        for _ in range(100):
            f = GridFunction(d, _inner(d, _smooth_noise(rng, d.shape)))
            b = GridFunction(d, _smooth_noise(rng, d.shape, passes=2) * 5)
            ratios.append(sparse_domination_check(f, b, m, alpha))
        med = float(np.median(ratios))
        details[f"m={m}"] = {"max": max(ratios), "median": med}
        ok &= max(ratios) <= 10 * med and math.isfinite(max(ratios))
    d32 = Domain(1, 1.0, 32)
    cubes = enumerate_cubes(DyadicLattice(d32), 1)
    rng = np.random.default_rng(404)
    reduction = 0.0
    for m in (0, 1, 2, 3):
        for _ in range(20):
            f = GridFunction(d32, rng.standard_normal(32))
            b = GridFunction(d32, rng.standard_normal(32) * 3)
            r = pointwise_reduction_ratio(f, b, m, cubes)
            reduction = max(reduction, r["sum"], r["term"])
    details["reduction_max"] = reduction
    ok &= reduction <= 1 + 1e-12
    return ok, details


check_sparse_domination = _timed("4 sparse domination", _sparse_domination)


# -- 5. adjoint identity ----------------------------------------------------------------


def _adjoint():
    rng = np.random.default_rng(505)
    worst = 0.0
    for k in range(50):
        d = Domain(1, 2.0, 64) if k % 2 == 0 else Domain(2, 1.0, 16)
        alpha = float(rng.uniform(0.1, d.dim - 0.1))
        f, g, b = (GridFunction(d, rng.standard_normal(d.shape)) for _ in range(3))
        for m in range(4):
            worst = max(worst, adjoint_defect(f, g, b, m, alpha))
    return worst <= 1e-12, {"max_defect": worst}


check_adjoint = _timed("5 adjoint identity", _adjoint)


# -- 6. closed-form quadrature ------------------------------------------------------------

CLOSED_FORM_M0 = 2 * (math.sqrt(2) - 1)
CLOSED_FORM_M1 = 2 / 3 * (2**1.5 - 1)


def closed_form_errors(n_cells: int) -> tuple[float, float]:
    d = Domain(1, 4.0, n_cells)
    f = d.from_callable(lambda x: ((x >= 0) & (x < 1)).astype(float))
    b = d.from_callable(lambda x: x)
    e0 = abs(fractional_integral(f, 0.5).at([2.0]) - CLOSED_FORM_M0)
    e1 = abs(commutator(f, b, 1, 0.5).at([2.0]) - CLOSED_FORM_M1)
    return e0, e1


def _closed_form():
    errs = {n: closed_form_errors(n) for n in (128, 256, 512)}
    orders = [
        math.log2(errs[a][i] / errs[2 * a][i]) for a in (128, 256) for i in (0, 1)
    ]
    ok = max(errs[512]) <= 2e-3 and min(orders) >= 1
    return ok, {"errors": {str(k): list(v) for k, v in errs.items()}, "orders": orders}


check_closed_form = _timed("6 closed-form quadrature", _closed_form)


# -- 7. sufficiency ---------------------------------------------------------------------------

SUFFICIENCY_INSTANCES = {
    "constant": ("const(c=1)", "const(c=1)"),
    "power": ("power(a=0.8)", "power(a=0.4)"),
    "mixed": ("power(a=0.4)", "const(c=1)"),
}


def _sufficiency():
    details, ok = {}, True
    for name, (mu, nu) in SUFFICIENCY_INSTANCES.items():
        r = run_sufficiency(Scenario(mu=mu, nu=nu, grid=128, trials=20, seed=7))
        details[name] = {**r.checks, **{k: v for k, v in r.measured.items() if k.endswith("change")}}
        ok &= r.passed
    r = run_sufficiency(Scenario(b="const(c=3)", grid=128, trials=5, seed=7))
    details["constant_symbol_zero"] = r.checks.get("zero_for_constant_symbol", False)
    ok &= r.passed and details["constant_symbol_zero"]
    return ok, details


check_sufficiency = _timed("7 sufficiency structure", _sufficiency)


# -- 8. sparse necessity ---------------------------------------------------------------------


def _sparse_necessity():
    details, ok = {}, True
    for name, (mu, nu) in SUFFICIENCY_INSTANCES.items():
        r = run_sparse_necessity(Scenario(kind="sparse_necessity", mu=mu, nu=nu, grid=256, seed=8))
        details[name] = {k: r.measured[k] for k in ("C_op", "max_ratio", "family_size")}
        ok &= r.passed and r.measured["max_ratio"] <= 1.05
    return ok, details


check_sparse_necessity = _timed("8 sparse necessity", _sparse_necessity)


# -- 9. necessity of the log bump ---------------------------------------------------------------


def _log_bump_necessity():
    details, ok = {}, True
    rng = np.random.default_rng(909)
    d = Domain(1, 1.0, 128)
    cubes = enumerate_cubes(DyadicLattice(d), 4)
    g_max = 0.0
    for k in range(50):
        a = float(rng.uniform(-0.9, 0.9))
        noise = np.exp(rng.uniform(0.2, 2.0) * _smooth_noise(rng, d.shape, passes=2))
        nu = parse_weight(f"power(a={a!r})").realize(d) * noise
        sigma = nu ** (1 - 2.0)
        for Q in cubes:
            g_max = max(g_max, float(log_maximal_test_function(sigma, Q).mean()))
    details["g_avg_max"] = g_max
    ok &= g_max <= LOG_MAXIMAL_AVERAGE_BOUND

    kol = {}
    for delta in (0.25, 0.5, 0.75):
        worst = 0.0
        for _ in range(100):
            f = GridFunction(d, np.exp(2 * _smooth_noise(rng, d.shape, passes=1)))
            Q = cubes[int(rng.integers(len(cubes)))]
            worst = max(worst, kolmogorov_ratio(f, Q, delta))
        kol[str(delta)] = {"max": worst, "bound": kolmogorov_constant(delta)}
        ok &= worst <= kolmogorov_constant(delta)
    details["kolmogorov"] = kol

    ll = {}
    for power in (2.0, 4.0):
        lo, hi = llogl_ratio_interval(power)
        vals = []
        for _ in range(100):
            v = np.exp(rng.uniform(0.1, 4) * rng.standard_normal(int(rng.integers(2, 257))))
            vals.append(llogl_ratio(v, power))
        ll[str(power)] = {"min": min(vals), "max": max(vals), "interval": [lo, hi]}
        ok &= lo <= min(vals) and max(vals) <= hi * (1 + 1e-9)
    details["llogl"] = ll

    for dim, alpha in ((1, 0.5), (2, 1.0)):
        r = run_kernel_sep(Scenario(kind="kernel_sep", dim=dim, alpha=alpha, q=4.0, grid=16))
        details[f"kernel_{dim}d"] = {**r.checks, "c": r.measured["c"], "rate_min": r.measured["rate_min"]}
        ok &= r.passed
    r = run_thm17_necessity(Scenario(kind="thm17_necessity", mu="power(a=0.5)", nu="power(a=0.3)", grid=64, trials=6, seed=9))
    details["necessity_run"] = r.checks
    ok &= r.passed
    return ok, details


check_log_bump_necessity = _timed("9 log-bump necessity pieces", _log_bump_necessity)


# -- 10. log bumps against the older condition ----------------------------------------


def _log_bumps_vs_older():
    d = Domain(1, 1.0, 128)
    cubes = enumerate_cubes(DyadicLattice(d), 2)
    pairs = [
        ("const(c=1)", "const(c=1)"),
        ("power(a=0.8)", "power(a=0.4)"),
        ("power(a=0.4)", "const(c=1)"),
        ("power(a=-0.5)", "power(a=1.2)"),
        ("product(power(a=0.3), const(c=5))", "power(a=-0.2)"),
    ]
    ok, details = True, {}
    p, q, alpha = 2.0, 4.0, 0.25
    for mu_s, nu_s in pairs:
        mu, nu = parse_weight(mu_s).realize(d), parse_weight(nu_s).realize(d)
        for delta in (0.1, 0.5, 1.0):
            c = bump_corollary15(mu, nu, p, q, alpha, 1, delta, cubes)
            t1, t2, pr = c.term1.values, c.term2.values, c.older_condition.values
            dominated = bool(np.all(t1 <= pr) and np.all(t2 <= pr))
            strict = float(np.mean((t1 < pr) & (t2 < pr)))
            details[f"{mu_s}|{nu_s}|{delta}"] = {"dominated": dominated, "strict_fraction": strict}
            ok &= dominated and strict >= 0.9
    return ok, details


check_log_bump_comparison = _timed("10 log bumps vs older condition", _log_bumps_vs_older)


# -- 11. Bloom converse -----------------------------------------------------------------------


def _bloom():
    details, ok = {}, True
    for lam, mu in (("power(a=0.1)", "power(a=0.3)"), ("power(a=-0.2)", "power(a=0.2)"), ("const(c=1)", "power(a=0.4)")):
        r = run_bloom(Scenario(kind="bloom", lam=lam, mu=mu, grid=1024, radius=0.1, trials=10, seed=11))
        details[f"{lam}|{mu}"] = {**r.checks, "ball_pair_c": r.measured["ball_pair_c"]}
        ok &= r.passed
    r = run_bloom(Scenario(kind="bloom", lam="power(a=0.2)", mu="power(a=0.2)", grid=256, radius=0.1, trials=4, m=2))
    details["lambda_equals_mu"] = r.measured["eta_recovery_spread"]
    ok &= r.passed
    return ok, details


check_bloom = _timed("11 Bloom converse", _bloom)


CHECKS = [
    check_orlicz_engine,
    check_bp_classifier,
    check_sparse_machinery,
    check_sparse_domination,
    check_adjoint,
    check_closed_form,
    check_sufficiency,
    check_sparse_necessity,
    check_log_bump_necessity,
    check_log_bump_comparison,
    check_bloom,
]


def verify_all(echo=None) -> tuple[bool, list[CheckResult], str]:
    """Run every check; returns (all passed, results, canonical JSON without timings)."""
    results = []
    for check in CHECKS:
        r = check()
        results.append(r)
        if echo is not None:
            echo(r.line())
    summary = {r.name: {"passed": r.passed, "details": r.details} for r in results}
    text = json.dumps(_jsonable(summary), sort_keys=True, indent=2)
    return all(r.passed for r in results), results, text
