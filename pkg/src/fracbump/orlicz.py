"""Young functions, their inverses and complements, and Luxemburg averages on cubes.

Families
--------
``Power(p)``            ``scale * t**p``
``PowerLog(p, r)``      ``scale * t**p * log(e + t)**r``
``ExpMinusOne()``       ``exp(t) - 1``
``Tabulated(t, A)``     monotone samples, linear in between, power-law tail
``Composed(base, k)``   ``base(t**k)``; used for ``Phi(t**(1/m))``, not always convex

All evaluations are vectorised over numpy arrays.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .grid import CubeRegion, GridFunction
from .specs import format_value, parse_spec

__all__ = [
    "YoungFunction",
    "Power",
    "PowerLog",
    "ExpMinusOne",
    "Tabulated",
    "Composed",
    "evaluate",
    "inverse",
    "complementary",
    "legendre_transform",
    "luxemburg_norm",
    "luxemburg_values",
    "luxemburg_batch",
    "inverse_product_constant",
    "generalized_holder_check",
    "HolderCheck",
    "BpVerdict",
    "BpResult",
    "bp_membership",
    "bp_quadrature",
    "parse_young",
    "is_young",
]

MIN_TABLE_SAMPLES = 64
_INV_ITERS = 200


class YoungFunction:
    """Base class; subclasses implement ``__call__`` and ``spec``."""

    def __call__(self, t):
        raise NotImplementedError

    def inverse(self, s):
        return _bisect_inverse(self, s)

    def log_value(self, t):
        """``log A(t)``; overridden where ``A`` itself overflows."""
        with np.errstate(divide="ignore"):
            return np.log(self(t))

    def complementary(self) -> YoungFunction:
        return _numeric_complement(self)

    def spec(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.spec()


def _as_array(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("Young functions are defined on t >= 0")
    return t


def _scalar_or_array(like, out):
    return float(out) if np.ndim(like) == 0 else out


def _bisect_inverse(A: YoungFunction, s):
    """Solve ``A(t) = s`` by geometric bracketing then bisection."""
    s = _as_array(s)
    flat = np.atleast_1d(s).astype(float)
    out = np.zeros_like(flat)
    pos = flat > 0
    if np.any(pos):
        target = flat[pos]
        lo = np.ones_like(target)
        hi = np.ones_like(target)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(2100):
                grow = A(hi) < target
                if not grow.any():
                    break
                hi[grow] *= 2.0
                lo[grow] = hi[grow] / 2.0
            for _ in range(2100):
                shrink = A(lo) > target
                if not shrink.any():
                    break
                hi[shrink] = lo[shrink]
                lo[shrink] /= 2.0
            for _ in range(_INV_ITERS):
                mid = 0.5 * (lo + hi)
                if np.all((mid <= lo) | (mid >= hi)):
                    break
                up = A(mid) < target
                lo = np.where(up, mid, lo)
                hi = np.where(up, hi, mid)
        out[pos] = 0.5 * (lo + hi)
    return _scalar_or_array(s, out.reshape(np.shape(s)))


@dataclass(frozen=True)
class Power(YoungFunction):
    p: float
    scale: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"Power needs p >= 1, got {self.p}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def __call__(self, t):
        t = _as_array(t)
        return _scalar_or_array(t, self.scale * t**self.p)

    def inverse(self, s):
        s = _as_array(s)
        return _scalar_or_array(s, (s / self.scale) ** (1.0 / self.p))

    def complementary(self) -> Power:
        if self.p == 1:
            raise ValueError("the complement of a linear function is not finite")
        p = self.p
        pc = p / (p - 1)
        # sup_s {st - c s^p} = (c p)^(-1/(p-1)) t^p' / p'
        return Power(pc, (self.scale * p) ** (-1.0 / (p - 1)) / pc)

    def spec(self) -> str:
        extra = "" if self.scale == 1 else f", scale={format_value(self.scale)}"
        return f"power(p={format_value(self.p)}{extra})"


@dataclass(frozen=True)
class PowerLog(YoungFunction):
    p: float
    r: float
    scale: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"PowerLog needs p >= 1, got {self.p}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def __call__(self, t):
        t = _as_array(t)
        with np.errstate(over="ignore"):
            out = self.scale * t**self.p * np.log(np.e + t) ** self.r
        return _scalar_or_array(t, out)

    def complementary(self) -> PowerLog:
        """Equivalent family ``t^p' / log(e+t)^(p' r / p)``, scaled to dominate the exact complement.

        The scale is the largest ratio (exact Legendre transform / family) on a
        log grid over ``[1e-6, 1e8]``, so Young's inequality holds with it.
        """
        if self.p == 1:
            raise ValueError("complement of PowerLog(1, r) is not a power-log family")
        pc = self.p / (self.p - 1)
        family = PowerLog(pc, -pc * self.r / self.p)
        t = np.logspace(-6, 8, 1401)
        exact = legendre_transform(self, t)
        k = float(np.max(exact / family(t)))
        return PowerLog(pc, family.r, k * (1 + 1e-6))

    def log_value(self, t):
        t = _as_array(t)
        with np.errstate(divide="ignore"):
            return math.log(self.scale) + self.p * np.log(t) + self.r * np.log(np.log(np.e + t))

    def asymptotic_inverse(self, s):
        """``s^(1/p) / log(e+s)^(r/p)``, the large-``s`` shape of the inverse."""
        s = _as_array(s)
        return (s / self.scale) ** (1 / self.p) / np.log(np.e + s) ** (self.r / self.p)

    def spec(self) -> str:
        extra = "" if self.scale == 1 else f", scale={format_value(self.scale)}"
        return f"powerlog(p={format_value(self.p)}, r={format_value(self.r)}{extra})"


@dataclass(frozen=True)
class ExpMinusOne(YoungFunction):
    def __call__(self, t):
        t = _as_array(t)
        with np.errstate(over="ignore"):
            return _scalar_or_array(t, np.expm1(t))

    def inverse(self, s):
        s = _as_array(s)
        return _scalar_or_array(s, np.log1p(s))

    def log_value(self, t):
        t = _as_array(t)
        with np.errstate(divide="ignore"):
            return t + np.log(-np.expm1(-t))

    def spec(self) -> str:
        return "expm1"


@dataclass(frozen=True, eq=False)
class Tabulated(YoungFunction):
    """Samples ``(t_k, A_k)`` with ``t_0 = 0``; power-law extrapolation past the last node."""

    t: np.ndarray
    values: np.ndarray
    source: str | None = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("Tabulated needs matching 1-d sample arrays")
        if t[0] != 0 or v[0] != 0:
            raise ValueError("Tabulated samples must start at (0, 0)")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(v) < 0):
            raise ValueError("Tabulated samples must be increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        if v[-1] > 0 and v[-2] > 0 and t[-2] > 0:
            k = math.log(v[-1] / v[-2]) / math.log(t[-1] / t[-2])
        else:
            k = 1.0
        object.__setattr__(self, "_tail", max(k, 1.0))

    def __call__(self, t):
        t = _as_array(t)
        inside = np.interp(t, self.t, self.values)
        with np.errstate(over="ignore"):
            tail = self.values[-1] * (np.maximum(t, self.t[-1]) / self.t[-1]) ** self._tail
        return _scalar_or_array(t, np.where(t <= self.t[-1], inside, tail))

    @classmethod
    def from_file(cls, path) -> Tabulated:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return cls(data[:, 0], data[:, 1], source=str(path))

    def spec(self) -> str:
        if self.source:
            return f"table(path={self.source})"
        return f"table(<{self.t.size} samples>)"


@dataclass(frozen=True)
class Composed(YoungFunction):
    """``base(t**exponent)``."""

    base: YoungFunction
    exponent: float

    def __call__(self, t):
        t = _as_array(t)
        return self.base(t**self.exponent)

    def inverse(self, s):
        return np.asarray(self.base.inverse(s)) ** (1.0 / self.exponent)

    def spec(self) -> str:
        return f"compose({self.base.spec()}, k={format_value(self.exponent)})"


# -- module-level operations ----------------------------------------------


def evaluate(A: YoungFunction, t):
    return A(t)


def inverse(A: YoungFunction, s):
    return A.inverse(s)


def complementary(A: YoungFunction) -> YoungFunction:
    if isinstance(A, Tabulated) and A.t.size < MIN_TABLE_SAMPLES:
        raise ValueError(
            f"need at least {MIN_TABLE_SAMPLES} samples to complement a table, got {A.t.size}"
        )
    return A.complementary()


def legendre_transform(A: YoungFunction, t, iters: int = 160):
    """``sup_{s>0} (s t - A(s))`` by golden-section search in ``log s``.

    ``s t - A(s)`` is concave in ``s``, hence unimodal in ``log s``.
    """
    t = _as_array(t)
    tt = np.atleast_1d(t).astype(float)
    hi = np.ones_like(tt)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(1100):
            grow = (A(hi) <= 2 * hi * tt) & (hi < 1e300)
            if not grow.any():
                break
            hi[grow] *= 2.0
    a = np.full_like(tt, math.log(1e-300))
    b = np.log(hi)
    g = (math.sqrt(5) - 1) / 2

    def obj(u):
        s = np.exp(u)
        with np.errstate(over="ignore", invalid="ignore"):
            return s * tt - A(s)

    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - g * (b - a)
        d_new = a + g * (b - a)
        # reuse one of the old interior points
        c, d = np.where(left, c_new, d), np.where(left, c, d_new)
        fc, fd = np.where(left, obj(c_new), fd), np.where(left, fc, obj(d_new))
    best = np.maximum(np.maximum(fc, fd), 0.0)
    return _scalar_or_array(t, best.reshape(np.shape(t)))


def _numeric_complement(A: YoungFunction) -> Tabulated:
    t = np.concatenate([[0.0], np.logspace(-6, 8, 841)])
    vals = legendre_transform(A, t)
    vals[0] = 0.0
    vals = np.maximum.accumulate(vals)
    return Tabulated(t, vals, source=None)


# -- Luxemburg averages -------------------------------------------------------


def luxemburg_batch(rows, A: YoungFunction, rtol: float = 1e-13) -> np.ndarray:
    """Luxemburg averages of every row of a 2-d array, bisected together.

    For each row, the smallest ``lam`` with ``mean(A(|row| / lam)) <= 1``.
    """
    v = np.abs(np.asarray(rows, dtype=float))
    if v.ndim != 2 or v.shape[1] == 0:
        raise ValueError("degenerate cube")
    vmax = v.max(axis=1)
    out = np.zeros(v.shape[0])
    live = vmax > 0
    if not live.any():
        return out
    v, vmax = v[live], vmax[live]

    def load(lam):
        with np.errstate(over="ignore", invalid="ignore"):
            return A(v / lam[:, None]).mean(axis=1)

    lo, hi = vmax.copy(), vmax.copy()
    for _ in range(4000):
        grow = load(hi) > 1
        if not grow.any():
            break
        lo[grow] = hi[grow]
        hi[grow] *= 2.0
    for _ in range(4000):
        shrink = load(lo) <= 1
        if not shrink.any():
            break
        hi[shrink] = lo[shrink]
        lo[shrink] /= 2.0
    for _ in range(200):
        if np.all(hi - lo <= rtol * hi):
            break
        mid = 0.5 * (lo + hi)
        ok = load(mid) <= 1
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    out[live] = hi
    return out


def luxemburg_values(values, A: YoungFunction, rtol: float = 1e-13) -> float:
    """Smallest ``lam`` with ``mean(A(|values| / lam)) <= 1``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("degenerate cube")
    return float(luxemburg_batch(v[None, :], A, rtol)[0])


def luxemburg_norm(f: GridFunction, A: YoungFunction, cube: CubeRegion | None = None) -> float:
    """``||f||_{A,Q}`` with the normalised counting measure on the cells of ``cube``."""
    if cube is None:
        cube = f.domain.full_cube()
    elif cube.domain != f.domain:
        raise ValueError("cube lies in a different domain")
    return luxemburg_values(f.restrict(cube), A)


def inverse_product_constant(factors, target: YoungFunction, powers=None, t=None) -> float:
    """``sup_t prod F_i^{-1}(t)^{k_i} / target^{-1}(t)`` on a log grid."""
    if t is None:
        t = np.logspace(-8, 8, 161)
    powers = powers or [1] * len(factors)
    num = np.ones_like(t)
    for F, k in zip(factors, powers):
        num = num * np.asarray(F.inverse(t)) ** k
    return float(np.max(num / np.asarray(target.inverse(t))))


class HolderCheck(NamedTuple):
    ratio: float
    kappa: float


def generalized_holder_check(
    f: GridFunction,
    g: GridFunction,
    A: YoungFunction,
    B: YoungFunction,
    C: YoungFunction,
    cube: CubeRegion | None = None,
    t_range=(1e-8, 1e8),
) -> HolderCheck:
    """``||fg||_C / (||f||_A ||g||_B)`` together with the sampled constant
    ``kappa = sup A^{-1} B^{-1} / C^{-1}``; the ratio never exceeds ``2 kappa``."""
    t = np.logspace(math.log10(t_range[0]), math.log10(t_range[1]), 161)
    kappa = inverse_product_constant([A, B], C, t=t)
    num = luxemburg_norm(f * g, C, cube)
    den = luxemburg_norm(f, A, cube) * luxemburg_norm(g, B, cube)
    if den == 0:
        if num > 0:
            raise ArithmeticError("zero denominator with nonzero numerator")
        return HolderCheck(0.0, kappa)
    return HolderCheck(num / den, kappa)


# -- B_p and B_{p,q} ----------------------------------------------------------


class BpVerdict(enum.Enum):
    IN_BP = "InBp"
    NOT_IN_BP = "NotInBp"
    IN_BPQ = "InBpq"
    NOT_IN_BPQ = "NotInBpq"

    @property
    def member(self) -> bool:
        return self in (BpVerdict.IN_BP, BpVerdict.IN_BPQ)


@dataclass(frozen=True)
class BpResult:
    verdict: BpVerdict
    closed_form: bool
    diagnostics: dict

    @property
    def member(self) -> bool:
        return self.verdict.member


def _bp_verdict(member: bool, q) -> BpVerdict:
    if q is None:
        return BpVerdict.IN_BP if member else BpVerdict.NOT_IN_BP
    return BpVerdict.IN_BPQ if member else BpVerdict.NOT_IN_BPQ


def bp_quadrature(A: YoungFunction, p: float, q: float | None = None, decades: int = 12) -> dict:
    """Partial integrals of the B_p (or B_{p,q}) kernel and a tail classification.

    The integral is taken in ``u = log t``.  The integrand's log-slope over
    the last decade separates exponential decay/growth in ``u``; when it is
    flat, the decay exponent ``r`` in ``u^r`` decides (convergent iff ``r < -1``).
    """
    expo = 1.0 if q is None else q / p
    power = p if q is None else q

    def log_kernel(u):
        u = np.asarray(u, dtype=float)
        return expo * A.log_value(np.exp(u)) - power * u

    def kernel(u):
        return float(np.exp(min(log_kernel(u), 700.0)))

    bounds = [k * math.log(10) for k in range(decades + 1)]
    partial, total = [], 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if total < math.inf and np.max(log_kernel(np.linspace(lo, hi, 33))) < 700:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, _ = integrate.quad(kernel, lo, hi, limit=200)
            total += val
        else:
            total = math.inf
        partial.append(total)

    U = bounds[-1]
    u1 = np.linspace(U - math.log(10), U, 9)
    slope = float(np.polyfit(u1, log_kernel(u1), 1)[0])
    u2 = np.linspace(U / 2, U, 17)
    r_est = float(np.polyfit(np.log(u2), log_kernel(u2), 1)[0])
    g_end = kernel(U)
    if slope < -0.05:
        convergent, tail = True, g_end / -slope
    elif slope > 0.05:
        convergent, tail = False, math.inf
    elif r_est < -1.02:
        convergent, tail = True, g_end * U / (-r_est - 1)
    else:
        convergent, tail = False, math.inf
    return {
        "partial_integrals": partial,
        "tail_slope": slope,
        "log_exponent": r_est,
        "tail_estimate": tail,
        "integral_estimate": total + tail,
        "convergent": convergent,
    }


def bp_membership(A: YoungFunction, p: float, q: float | None = None) -> BpResult:
    """Classify ``A`` in B_p (``q=None``) or B_{p,q}.

    Power and power-log families are decided in closed form; anything else
    gets the quadrature diagnostic as its verdict.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if q is not None and q < p:
        raise ValueError(f"B_(p,q) needs q >= p, got p={p}, q={q}")
    diag = bp_quadrature(A, p, q)
    expo = 1.0 if q is None else q / p
    if isinstance(A, Power):
        return BpResult(_bp_verdict(A.p < p, q), True, diag)
    if isinstance(A, PowerLog):
        member = A.p < p or (A.p == p and expo * A.r < -1)
        return BpResult(_bp_verdict(member, q), True, diag)
    if isinstance(A, ExpMinusOne):
        return BpResult(_bp_verdict(False, q), True, diag)
    return BpResult(_bp_verdict(diag["convergent"], q), False, diag)


# -- validation and parsing -------------------------------------------------


def is_young(A: YoungFunction, t=None) -> bool:
    """Sampled check: ``A(0)=0``, increasing, convex, ``A(t)/t`` increasing, superlinear."""
    if t is None:
        t = np.logspace(-4, 6, 401)
    with np.errstate(over="ignore"):
        v = np.asarray(A(t))
    # overflowing samples say nothing about convexity
    t, v = t[np.isfinite(v)], v[np.isfinite(v)]
    if A(0.0) != 0 or np.any(np.diff(v) < 0) or not v[-1] > 0:
        return False
    slopes = np.diff(v) / np.diff(t)
    if np.any(np.diff(slopes) < -1e-9 * np.abs(slopes[1:])):
        return False
    ratio = v / t
    if np.any(np.diff(ratio) < -1e-12 * np.abs(ratio[1:])):
        return False
    with np.errstate(over="ignore"):
        doubled = np.asarray(A(2 * t))
    return bool(np.all(doubled >= 2 * v * (1 - 1e-12)) and ratio[-1] > ratio[0])


def parse_young(text: str, base_dir=None) -> YoungFunction:
    """Build a Young function from ``power(p=..)``, ``powerlog(p=.., r=..)``, ``expm1`` or ``table(path=..)``."""
    spec = parse_spec(text)
    if spec.name == "power":
        kw = spec.take({"p", "scale"}, {"p"})
        return Power(kw["p"], kw.get("scale", 1.0))
    if spec.name == "powerlog":
        kw = spec.take({"p", "r", "scale"}, {"p", "r"})
        return PowerLog(kw["p"], kw["r"], kw.get("scale", 1.0))
    if spec.name in ("expm1", "exp"):
        spec.take(set())
        return ExpMinusOne()
    if spec.name == "table":
        kw = spec.take({"path"}, {"path"})
        path = Path(str(kw["path"]))
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return Tabulated.from_file(path)
    raise ValueError(f"unknown Young function family {spec.name!r}")
