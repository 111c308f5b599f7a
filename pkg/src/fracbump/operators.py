"""Discretised fractional integrals, iterated commutators, sparse operators, maximal functions.

The fractional integral is a midpoint sum over cells with an exact
self-cell term::

    I f(x_i) = h^dim sum_{j != i} f_j / |x_i - x_j|^(dim - alpha) + D f_i
    D = integral of |y|^(alpha - dim) over one cell centred at 0

and the commutator inserts ``(b_i - b_j)^m`` into the sum (so the self-cell
term drops out for ``m >= 1``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .dyadic import DyadicLattice, SparseFamily, construct_sparse_family
from .grid import CubeRegion, Domain, GridFunction
from .cubes import cube_luxemburg, default_cubes
from .orlicz import YoungFunction

__all__ = [
    "self_integral",
    "self_integral_midpoint",
    "kernel_matrix",
    "fractional_integral",
    "commutator",
    "adjoint_defect",
    "OperatorTrace",
    "sparse_operator",
    "sparse_domination_check",
    "pointwise_reduction_ratio",
    "maximal",
    "kernel",
    "kernel_oscillation",
    "KernelOscillation",
]

_BLOCK_ENTRIES = 1 << 22
_CACHE_MAX_SIZE = 2048


def _check_alpha(alpha: float, dim: int):
    if not 0 < alpha < dim:
        raise ValueError(f"alpha must lie in (0, {dim}), got {alpha}")


def self_integral(domain: Domain, alpha: float) -> float:
    """Integral of ``|y|^(alpha-dim)`` over the cell ``[-h/2, h/2]^dim``."""
    _check_alpha(alpha, domain.dim)
    h = domain.h
    if domain.dim == 1:
        return 2.0 * (h / 2) ** alpha / alpha
    # eight triangles: theta in [0, pi/4], r up to (h/2)/cos(theta)
    val, _ = integrate.quad(lambda th: math.cos(th) ** -alpha, 0.0, math.pi / 4, epsabs=0, epsrel=1e-13)
    return 8.0 / alpha * (h / 2) ** alpha * val


def self_integral_midpoint(domain: Domain, alpha: float, refine: int = 4) -> float:
    """Midpoint rule on a ``refine^dim`` split of the cell; no sub-centre hits 0 for even ``refine``."""
    _check_alpha(alpha, domain.dim)
    h = domain.h / refine
    ax = -domain.h / 2 + (np.arange(refine) + 0.5) * h
    grids = np.meshgrid(*([ax] * domain.dim), indexing="ij")
    r = np.sqrt(sum(g**2 for g in grids))
    return float(np.sum(r ** (alpha - domain.dim)) * h**domain.dim)


def _kernel_rows(domain: Domain, alpha: float, rows: slice) -> np.ndarray:
    pts = domain.points()
    diff = pts[rows, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    with np.errstate(divide="ignore"):
        out = domain.cell_volume * dist ** (alpha - domain.dim)
    i = np.arange(rows.start, rows.stop)
    out[i - rows.start, i] = self_integral(domain, alpha)
    return out


@lru_cache(maxsize=4)
def _cached_kernel(domain: Domain, alpha: float) -> np.ndarray:
    k = _kernel_rows(domain, alpha, slice(0, domain.size))
    k.flags.writeable = False
    return k


def kernel_matrix(domain: Domain, alpha: float) -> np.ndarray:
    """Dense quadrature matrix of the fractional integral (flat C-order cells)."""
    _check_alpha(alpha, domain.dim)
    if domain.size <= _CACHE_MAX_SIZE:
        return _cached_kernel(domain, float(alpha))
    return _kernel_rows(domain, alpha, slice(0, domain.size))


def _row_blocks(domain: Domain):
    step = max(1, _BLOCK_ENTRIES // domain.size)
    for s in range(0, domain.size, step):
        yield slice(s, min(s + step, domain.size))


def commutator(f: GridFunction, b: GridFunction | None, m: int, alpha: float) -> GridFunction:
    """``I_alpha^{b,m} f``; ``m = 0`` (or ``b=None``) gives the plain fractional integral."""
    if m < 0 or int(m) != m:
        raise ValueError(f"m must be a nonnegative integer, got {m}")
    d = f.domain
    _check_alpha(alpha, d.dim)
    if b is not None and b.domain != d:
        raise ValueError("domain mismatch")
    fv = f.values.ravel()
    bv = None if (m == 0 or b is None) else b.values.ravel()
    out = np.empty(d.size)
    if d.size <= _CACHE_MAX_SIZE:
        blocks = [(slice(0, d.size), kernel_matrix(d, alpha))]
    else:
        blocks = ((rows, _kernel_rows(d, alpha, rows)) for rows in _row_blocks(d))
    for rows, K in blocks:
        if bv is None:
            out[rows] = K @ fv
        else:
            out[rows] = (K * (bv[rows, None] - bv[None, :]) ** m) @ fv
    return GridFunction(d, out)


def fractional_integral(f: GridFunction, alpha: float) -> GridFunction:
    return commutator(f, None, 0, alpha)


def adjoint_defect(f: GridFunction, g: GridFunction, b: GridFunction, m: int, alpha: float) -> float:
    """``|<I f, g> - (-1)^m <f, I g>| / (|f|_2 |g|_2)`` for the plain discrete pairing."""
    lhs = float(np.dot(commutator(f, b, m, alpha).values.ravel(), g.values.ravel()))
    rhs = float(np.dot(f.values.ravel(), commutator(g, b, m, alpha).values.ravel()))
    norm = float(np.linalg.norm(f.values) * np.linalg.norm(g.values))
    if norm == 0:
        return 0.0
    return abs(lhs - (-1) ** m * rhs) / norm


# -- sparse operators -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorTrace:
    """Output of a sparse operator plus, per cell, the family cube attaining the sup."""

    f: GridFunction
    b: GridFunction | None
    m: int
    output: GridFunction
    argmax: np.ndarray
    labels: tuple

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = ["x", "y"][: self.output.domain.dim]
        w.writerow([*names, "value", "cube"])
        pts = self.output.domain.points()
        for pt, v, k in zip(pts, self.output.values.ravel(), self.argmax.ravel()):
            w.writerow([*(repr(float(c)) for c in pt), repr(float(v)), self.labels[k] if k >= 0 else ""])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _family_cubes(S) -> list[CubeRegion]:
    if isinstance(S, SparseFamily):
        return S.regions()
    return list(S)


def sparse_operator(
    f: GridFunction,
    b: GridFunction | None,
    m: int,
    alpha: float,
    S,
    starred: bool = False,
) -> OperatorTrace:
    """``T f(x) = sup_{Q in S, x in Q} |Q|^(alpha/dim) avg_Q(|b - b_Q|^m |f|)``.

    The starred form moves the oscillation outside:
    ``|Q|^(alpha/dim) |b(x) - b_Q|^m avg_Q |f|``.  Cells outside every cube get 0.
    """
    cubes = _family_cubes(S)
    if not cubes:
        raise ValueError("empty sparse family")
    d = f.domain
    out = np.zeros(d.shape)
    arg = np.full(d.shape, -1, dtype=int)
    af = np.abs(f.values)
    bvals = None if (b is None or m == 0) else b.values
    for k, Q in enumerate(cubes):
        sl = Q.slices
        scale = Q.measure ** (alpha / d.dim)
        if bvals is None:
            cand = np.full(af[sl].shape, scale * af[sl].mean())
        else:
            osc = np.abs(bvals[sl] - bvals[sl].mean()) ** m
            if starred:
                cand = scale * osc * af[sl].mean()
            else:
                cand = np.full(af[sl].shape, scale * (osc * af[sl]).mean())
        better = cand > out[sl]
        out[sl] = np.where(better, cand, out[sl])
        arg[sl] = np.where(better, k, arg[sl])
    labels = tuple(Q.label() for Q in cubes)
    return OperatorTrace(f, b, m, GridFunction(d, out), arg, labels)


def _inner_half_mask(d: Domain) -> np.ndarray:
    return np.all([np.abs(c) <= d.half_width / 2 for c in d.coords()], axis=0)


def sparse_domination_check(
    f: GridFunction,
    b: GridFunction,
    m: int,
    alpha: float,
    threshold_factor: float | None = None,
) -> float:
    """``max_x |I^{b,m} f(x)| / R(x)`` with ``R`` the sparse bound ``T f + T* f``.

    ``R`` is summed over two stopping families, one built from ``|f|`` and one
    from ``|f| |b - b_root|^m``.
    """
    d = f.domain
    if np.any(f.values[~_inner_half_mask(d)] != 0):
        raise ValueError("f must be supported in the inner half of the box")
    num = np.abs(commutator(f, b, m, alpha).values)
    if m >= 1 and np.all(num == 0):
        return 0.0
    lat = DyadicLattice(d)
    weight = abs(f) * np.abs(b.values - b.values.mean()) ** m
    sources = [abs(f)] + ([weight] if np.any(weight.values) else [])
    R = np.zeros(d.shape)
    for src in sources:
        S = construct_sparse_family(src, lat, threshold_factor)
        for starred in (False, True):
            R += sparse_operator(f, b, m, alpha, S, starred).output.values
    pos = R > 0
    if np.any(num[~pos] > 0):
        raise ArithmeticError("sparse bound vanishes where the commutator does not")
    if not pos.any():
        return 0.0
    return float(np.max(num[pos] / R[pos]))


def pointwise_reduction_ratio(f: GridFunction, b: GridFunction, m: int, cubes) -> dict:
    """Largest ratio of the ``k``-sum (and of any single ``k`` term) to
    ``(m+1) [|b(x)-b_Q|^m avg_Q|f| + avg_Q(|b-b_Q|^m |f|)]`` over all
    cubes and points; both must stay at most 1."""
    af = np.abs(f.values)
    worst_sum = worst_term = 0.0
    for Q in cubes:
        sl = Q.slices
        bq = b.values[sl]
        ox = np.abs(bq - bq.mean()).ravel()
        a = af[sl].ravel()
        rhs = (m + 1) * (ox**m * a.mean() + (ox**m * a).mean())
        terms = np.array([ox ** (m - k) * (ox**k * a).mean() for k in range(m + 1)])
        pos = rhs > 0
        if np.any(terms.sum(axis=0)[~pos] > 0):
            return {"sum": math.inf, "term": math.inf}
        if pos.any():
            worst_sum = max(worst_sum, float(np.max(terms.sum(axis=0)[pos] / rhs[pos])))
            worst_term = max(worst_term, float(np.max(terms[:, pos] / rhs[pos])))
    return {"sum": worst_sum, "term": worst_term}


# -- maximal operators ----------------------------------------------------------


def maximal(
    f: GridFunction,
    beta: float = 0.0,
    B: YoungFunction | None = None,
    cubes=None,
) -> GridFunction:
    """``M_{beta,B} f(x) = sup_{Q ni x} |Q|^(beta/dim) ||f||_{B,Q}`` over dyadic cubes."""
    d = f.domain
    if not 0 <= beta < d.dim:
        raise ValueError(f"beta must lie in [0, {d.dim}), got {beta}")
    cubes = default_cubes(d, cubes)
    vals = cube_luxemburg(f.values, B, cubes)
    out = np.zeros(d.shape)
    for Q, v in zip(cubes, vals):
        sl = Q.slices
        out[sl] = np.maximum(out[sl], Q.measure ** (beta / d.dim) * v)
    return GridFunction(d, out)


# -- kernel separation ----------------------------------------------------------


def kernel(x, y, alpha: float, dim: int):
    """``|x - y|^(alpha - dim)`` for point arrays of shape ``(..., dim)``."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    dist = np.sqrt(np.sum(np.atleast_1d(diff) ** 2, axis=-1)) if dim > 1 else np.abs(diff).reshape(np.shape(diff)[:-1] or ())
    return dist ** (alpha - dim)


def _ball_offsets(r: float, samples: int, dim: int) -> np.ndarray:
    ax = np.linspace(-r, r, samples)
    if dim == 1:
        return ax[:, None]
    g = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    return g[np.sum(g**2, axis=1) <= r * r * (1 + 1e-12)]


def _measure_oscillation(alpha, r, A, samples, dim):
    e1 = np.zeros(dim)
    e1[0] = 1.0
    y0 = -0.5 * A * r * e1
    x0 = 0.5 * A * r * e1
    offs = _ball_offsets(r, samples, dim)
    xs, ys = x0 + offs, y0 + offs
    k0 = float(kernel(x0[None, :], y0[None, :], alpha, dim)[0])
    diff = xs[:, None, :] - ys[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    osc = float(np.max(np.abs(dist ** (alpha - dim) - k0)))
    return osc, k0, x0, y0


class KernelOscillation(NamedTuple):
    measured_osc: float
    bound: float


def kernel_oscillation(
    alpha: float,
    r: float,
    A: float,
    samples: int = 41,
    dim: int = 1,
    domain: Domain | None = None,
) -> KernelOscillation:
    """Max of ``|K(x, y) - K(x0, y0)|`` over sampled ``y in B(y0, r)``, ``x in B(x0, r)``
    with ``|x0 - y0| = A r``, and the bound ``c / A / (A r)^(dim - alpha)``.

    ``c`` is the measured value at ``A = 4`` rescaled, so the bound is tight there.
    """
    _check_alpha(alpha, dim)
    if A < 4:
        raise ValueError(f"separation factor must be at least 4, got {A}")
    if domain is not None:
        if domain.dim != dim:
            raise ValueError("domain dimension mismatch")
        if 0.5 * A * r + r > domain.half_width:
            raise ValueError("balls do not fit in the domain")
    osc, _, _, _ = _measure_oscillation(alpha, r, A, samples, dim)
    osc4, _, _, _ = _measure_oscillation(alpha, r, 4.0, samples, dim)
    c = osc4 * 4.0 * (4.0 * r) ** (dim - alpha)
    return KernelOscillation(osc, c / A / (A * r) ** (dim - alpha))
