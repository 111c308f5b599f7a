"""Weights, symbols, and the weight/oscillation class diagnostics.

All suprema run over an explicit cube list (every dyadic cube by default)
and come back as :class:`~fracbump.report.BumpReport` objects or plain
floats, with the maximising cube recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cubes import cube_means, default_cubes, group_rows
from .grid import CubeRegion, Domain, GridFunction
from .operators import maximal
from .orlicz import PowerLog, YoungFunction, luxemburg_batch
from .report import BumpReport, scan_report
from .specs import Spec, format_value, parse_spec

__all__ = [
    "WeightSpec",
    "parse_weight",
    "parse_symbol",
    "apq_constant",
    "two_weight_ap_constant",
    "doubling_constant",
    "bmo_norm",
    "weighted_bmo_norm",
    "osc_phi_norm",
    "kolmogorov_ratio",
    "kolmogorov_constant",
    "log_maximal_test_function",
    "LOG_MAXIMAL_AVERAGE_BOUND",
    "llogl_ratio",
    "llogl_ratio_interval",
]


# -- weight and symbol specs ----------------------------------------------------


def _load_table(path, domain: Domain, base_dir=None) -> np.ndarray:
    p = Path(str(path))
    if base_dir is not None and not p.is_absolute():
        p = Path(base_dir) / p
    g = GridFunction.from_csv(p)
    if g.domain == domain:
        return g.values.copy()
    if g.domain.dim != domain.dim:
        raise ValueError(f"table {p} has dimension {g.domain.dim}, expected {domain.dim}")
    ax = g.domain.axis()
    interp = RegularGridInterpolator((ax,) * domain.dim, g.values, bounds_error=False, fill_value=None)
    return interp(domain.points()).reshape(domain.shape)


@dataclass(frozen=True)
class WeightSpec:
    """``const(c)``, ``power(a)`` (``|x|^a`` clipped at ``h/2``), ``product(...)`` or ``table(path)``."""

    kind: str
    params: dict = field(default_factory=dict)
    factors: tuple = ()

    def realize(self, domain: Domain, base_dir=None) -> GridFunction:
        vals = self._values(domain, base_dir)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError(f"weight {self.text()} is not strictly positive and finite on the grid")
        return GridFunction(domain, vals)

    def _values(self, domain, base_dir):
        if self.kind == "const":
            return np.full(domain.shape, float(self.params["c"]))
        if self.kind == "power":
            r = np.maximum(domain.radius(), domain.h / 2)
            return r ** float(self.params["a"])
        if self.kind == "product":
            out = np.ones(domain.shape)
            for w in self.factors:
                out = out * w._values(domain, base_dir)
            return out
        if self.kind == "table":
            return _load_table(self.params["path"], domain, base_dir)
        raise ValueError(f"unknown weight kind {self.kind!r}")

    def text(self) -> str:
        if self.kind == "product":
            return "product(" + ", ".join(w.text() for w in self.factors) + ")"
        body = ", ".join(f"{k}={format_value(v)}" for k, v in self.params.items())
        return f"{self.kind}({body})"


def _weight_from(spec: Spec) -> WeightSpec:
    if spec.name == "const":
        kw = spec.take({"c"}, {"c"})
        if not isinstance(kw["c"], float) or kw["c"] <= 0:
            raise ValueError("const weight needs c > 0")
    elif spec.name == "power":
        kw = spec.take({"a"}, {"a"})
    elif spec.name == "table":
        kw = spec.take({"path"}, {"path"})
    elif spec.name == "product":
        spec.take(set())
        if not spec.args:
            raise ValueError("product needs at least one factor")
        return WeightSpec("product", {}, tuple(_weight_from(a) for a in spec.args))
    else:
        raise ValueError(f"unknown weight kind {spec.name!r}")
    if spec.args:
        raise ValueError(f"{spec.name} takes no nested arguments")
    return WeightSpec(spec.name, kw)


def parse_weight(text: str) -> WeightSpec:
    return _weight_from(parse_spec(text))


def parse_symbol(text: str, domain: Domain, base_dir=None) -> GridFunction:
    """Symbols ``b``: ``const(c)``, ``linear(c=1)`` (``c * x``), ``logabs`` (``log max(|x|, h/2)``),
    ``power(a)`` (clipped ``|x|^a``), ``sin(k=1)`` (``sin(k x)``) or ``table(path)``."""
    spec = parse_spec(text)
    x = domain.coords()[0]
    if spec.name == "const":
        kw = spec.take({"c"}, {"c"})
        vals = np.full(domain.shape, float(kw["c"]))
    elif spec.name == "linear":
        kw = spec.take({"c"})
        vals = float(kw.get("c", 1.0)) * x
    elif spec.name == "logabs":
        spec.take(set())
        vals = np.log(np.maximum(domain.radius(), domain.h / 2))
    elif spec.name == "power":
        kw = spec.take({"a"}, {"a"})
        vals = np.maximum(domain.radius(), domain.h / 2) ** float(kw["a"])
    elif spec.name == "sin":
        kw = spec.take({"k"})
        vals = np.sin(float(kw.get("k", 1.0)) * x)
    elif spec.name == "table":
        kw = spec.take({"path"}, {"path"})
        vals = _load_table(kw["path"], domain, base_dir)
    else:
        raise ValueError(f"unknown symbol kind {spec.name!r}")
    return GridFunction(domain, vals)


# -- weight classes -------------------------------------------------------------


def _dual(p: float) -> float:
    return p / (p - 1)


def apq_constant(w: GridFunction, p: float, q: float, cubes=None) -> BumpReport:
    """``sup_Q avg_Q(w^q) * avg_Q(w^-p')^(q/p')``."""
    if not 1 < p < q < math.inf:
        raise ValueError(f"need 1 < p < q < inf, got p={p}, q={q}")
    w.require_weight()
    cubes = default_cubes(w.domain, cubes)
    pd = _dual(p)
    v = cube_means(w.values**q, cubes) * cube_means(w.values**-pd, cubes) ** (q / pd)
    return scan_report(cubes, v, {"kind": "apq", "p": p, "q": q})


def two_weight_ap_constant(mu: GridFunction, nu: GridFunction, p: float, cubes=None) -> BumpReport:
    """``sup_Q avg_Q(mu) * avg_Q(nu^(1-p'))^(p-1)``."""
    if not 1 < p < math.inf:
        raise ValueError(f"need 1 < p < inf, got {p}")
    mu.require_weight("mu")
    nu.require_weight("nu")
    cubes = default_cubes(mu.domain, cubes)
    v = cube_means(mu.values, cubes) * cube_means(nu.values ** (1 - _dual(p)), cubes) ** (p - 1)
    return scan_report(cubes, v, {"kind": "two_weight_ap", "p": p})


def doubling_constant(mu: GridFunction, cubes=None, report: bool = False):
    """``sup mu(2Q) / mu(Q)`` over cubes whose concentric double stays in the box."""
    mu.require_weight("mu")
    kept, vals = [], []
    for Q in default_cubes(mu.domain, cubes):
        if Q.cells % 2:
            continue
        try:
            Q2 = Q.dilate(2)
        except ValueError:
            continue
        kept.append(Q)
        vals.append(mu.restrict(Q2).sum() / mu.restrict(Q).sum())
    if not kept:
        raise ValueError("no cube has its double inside the domain")
    rep = scan_report(kept, vals, {"kind": "doubling"})
    return rep if report else rep.sup


def _oscillation_means(b: GridFunction, cubes) -> np.ndarray:
    out = np.empty(len(cubes))
    for ks, rows in group_rows(b.values, cubes):
        out[ks] = np.abs(rows - rows.mean(axis=1, keepdims=True)).mean(axis=1)
    return out


def bmo_norm(b: GridFunction, cubes=None, report: bool = False):
    """``sup_Q avg_Q |b - b_Q|``."""
    cubes = default_cubes(b.domain, cubes)
    rep = scan_report(cubes, _oscillation_means(b, cubes), {"kind": "bmo"})
    return rep if report else rep.sup


def weighted_bmo_norm(b: GridFunction, eta: GridFunction, cubes=None, report: bool = False):
    """``sup_Q eta(Q)^-1 int_Q |b - b_Q|``; the cell volume cancels."""
    eta.require_weight("eta")
    if eta.domain != b.domain:
        raise ValueError("domain mismatch")
    cubes = default_cubes(b.domain, cubes)
    v = _oscillation_means(b, cubes) / cube_means(eta.values, cubes)
    rep = scan_report(cubes, v, {"kind": "weighted_bmo"})
    return rep if report else rep.sup


def osc_phi_norm(b: GridFunction, phi: YoungFunction, cubes=None, report: bool = False):
    """``sup_Q ||b - b_Q||_{phi,Q}``."""
    cubes = default_cubes(b.domain, cubes)
    v = np.empty(len(cubes))
    for ks, rows in group_rows(b.values, cubes):
        v[ks] = luxemburg_batch(rows - rows.mean(axis=1, keepdims=True), phi)
    rep = scan_report(cubes, v, {"kind": "osc_phi", "phi": phi.spec()})
    return rep if report else rep.sup


# -- facts used in the necessity argument ---------------------------------------


def kolmogorov_constant(delta: float) -> float:
    """Weak (1,1) with constant 1 for the dyadic maximal function gives ``1/(1-delta)``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 1.0 / (1.0 - delta)


def _local_maximal(f: GridFunction, cube: CubeRegion) -> np.ndarray:
    """Dyadic ``M(f chi_Q)`` on the cells of ``Q``."""
    masked = GridFunction(f.domain, np.where(cube.mask(), f.values, 0.0))
    return maximal(masked).values[cube.slices]


def kolmogorov_ratio(f: GridFunction, cube: CubeRegion, delta: float) -> float:
    """``avg_Q (M(f chi_Q))^delta / (avg_Q |f|)^delta``; at most ``1/(1-delta)``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    vals = np.abs(f.restrict(cube))
    avg = vals.mean()
    if avg == 0:
        return 0.0
    Mf = _local_maximal(abs(f), cube)
    return float(np.mean(Mf**delta) / avg**delta)


LOG_MAXIMAL_AVERAGE_BOUND = 1.0
"""``avg_Q log+(M(s chi_Q) / s_Q) <= 1`` from the weak (1,1) bound with constant 1."""


def log_maximal_test_function(sigma: GridFunction, cube: CubeRegion) -> np.ndarray:
    """``g = log+(M(sigma chi_Q) / sigma_Q)`` on the cells of ``Q``."""
    sigma.require_weight("sigma")
    s_avg = sigma.restrict(cube).mean()
    return np.maximum(np.log(_local_maximal(sigma, cube) / s_avg), 0.0)


def llogl_ratio_interval(power: float) -> tuple[float, float]:
    """Pinned range of ``||f||_{L(log L)^a, Q} / avg_Q(|f| log^a(e + |f|/|f|_Q))``.

    The upper end 1 is exact: the explicit average is a feasible Luxemburg
    level.  The lower end is 0.9 times the minimum over two-level samples
    (one tall cell among ``n``), where ``x log^a(e + x) = n`` gives the ratio
    ``(log(e + x) / log(e + n))^a``.  Random searches never went below it.
    """
    if power < 0:
        raise ValueError("power must be nonnegative")
    if power == 0:
        return (1.0, 1.0)
    n = np.logspace(0.3, 30, 600)
    lo, hi = np.full_like(n, -700.0), np.log(n)
    for _ in range(200):  # bisection in log x; x log^a(e + x) is increasing
        mid = 0.5 * (lo + hi)
        big = np.exp(mid) * np.log(math.e + np.exp(mid)) ** power > n
        hi, lo = np.where(big, mid, hi), np.where(big, lo, mid)
    x = np.exp(hi)
    floor = float(np.min((np.log(math.e + x) / np.log(math.e + n)) ** power))
    return (0.9 * floor, 1.0)


def llogl_ratio(values, power: float) -> float:
    """Luxemburg ``L(log L)^power`` norm of the sample divided by the explicit log average."""
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    avg = v.mean()
    if avg == 0:
        return 1.0
    explicit = np.mean(v * np.log(math.e + v / avg) ** power)
    lux = luxemburg_batch(v[None, :], PowerLog(1.0, power))[0]
    return float(lux / explicit)
