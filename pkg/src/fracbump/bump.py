"""Two-weight bump functionals for fractional integrals and their iterated commutators.

Each functional is a supremum over an explicit cube list of

    |Q|^(alpha/dim + 1/q - 1/p) * (Orlicz average of a mu-factor) * (Orlicz average of a nu-factor)

with ``mu^(1/q)`` and ``nu^(-1/p)`` possibly multiplied by ``(b - b_Q)^m``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .cubes import default_cubes, group_rows
from .grid import GridFunction
from .orlicz import Composed, Power, PowerLog, YoungFunction, luxemburg_batch, luxemburg_values
from .report import BumpReport, scan_report

__all__ = [
    "bump_term_left",
    "bump_term_right",
    "bump_necessity_quantities",
    "bump_osc_reduced",
    "bump_corollary15",
    "bump_thm17",
    "compatibility_constant",
    "Compatibility",
    "IncompatibleYoungTriple",
    "phi_m_identity",
    "COMPATIBILITY_T",
]

COMPATIBILITY_T = np.logspace(2, 8, 64)


class IncompatibleYoungTriple(ValueError):
    pass


def _check(mu, nu, p, q, alpha, m):
    if not 1 < p <= q < math.inf:
        raise ValueError(f"need 1 < p <= q < inf, got p={p}, q={q}")
    dim = mu.domain.dim
    if not 0 < alpha < dim:
        raise ValueError(f"alpha must lie in (0, {dim}), got {alpha}")
    if m < 0 or int(m) != m:
        raise ValueError(f"m must be a nonnegative integer, got {m}")
    if nu.domain != mu.domain:
        raise ValueError("domain mismatch")
    mu.require_weight("mu")
    nu.require_weight("nu")


def _dual(p):
    return p / (p - 1)


def _scale(cubes, p, q, alpha):
    dim = cubes[0].domain.dim
    e = alpha / dim + 1 / q - 1 / p
    return np.array([Q.measure**e for Q in cubes])


def _norms(values: np.ndarray, A: YoungFunction, cubes, b=None, m=0) -> np.ndarray:
    """``||(b - b_Q)^m v||_{A,Q}`` per cube (no b-factor when ``b`` is None or ``m = 0``)."""
    out = np.empty(len(cubes))
    bgroups = group_rows(b.values, cubes) if (b is not None and m) else None
    for g, (ks, rows) in enumerate(group_rows(values, cubes)):
        if bgroups is not None:
            brows = bgroups[g][1]
            rows = (brows - brows.mean(axis=1, keepdims=True)) ** m * rows
        out[ks] = luxemburg_batch(rows, A)
    return out


def _params(p, q, alpha, m, **young):
    out = {"p": p, "q": q, "alpha": alpha, "m": m}
    out.update({k: v.spec() for k, v in young.items()})
    return out


def bump_term_left(mu, nu, b, p, q, alpha, m, A, B, cubes=None) -> BumpReport:
    """``sup_Q |Q|^e ||mu^(1/q)||_{A,Q} ||(b - b_Q)^m nu^(-1/p)||_{B,Q}``."""
    _check(mu, nu, p, q, alpha, m)
    cubes = default_cubes(mu.domain, cubes)
    v = _scale(cubes, p, q, alpha)
    v = v * _norms(mu.values ** (1 / q), A, cubes) * _norms(nu.values ** (-1 / p), B, cubes, b, m)
    return scan_report(cubes, v, _params(p, q, alpha, m, A=A, B=B))


def bump_term_right(mu, nu, b, p, q, alpha, m, C, D, cubes=None) -> BumpReport:
    """``sup_Q |Q|^e ||(b - b_Q)^m mu^(1/q)||_{C,Q} ||nu^(-1/p)||_{D,Q}``."""
    _check(mu, nu, p, q, alpha, m)
    cubes = default_cubes(mu.domain, cubes)
    v = _scale(cubes, p, q, alpha)
    v = v * _norms(mu.values ** (1 / q), C, cubes, b, m) * _norms(nu.values ** (-1 / p), D, cubes)
    return scan_report(cubes, v, _params(p, q, alpha, m, C=C, D=D))


def bump_necessity_quantities(mu, nu, b, p, q, alpha, m, cubes=None) -> tuple[BumpReport, BumpReport]:
    """Both sides with unbumped ``L^q`` and ``L^p'`` averages."""
    Lq, Lpd = Power(q), Power(_dual(p))
    return (
        bump_term_left(mu, nu, b, p, q, alpha, m, Lq, Lpd, cubes),
        bump_term_right(mu, nu, b, p, q, alpha, m, Lq, Lpd, cubes),
    )


class Compatibility(NamedTuple):
    kappa: float
    log_exponent: float


def compatibility_constant(X: YoungFunction, Phi: YoungFunction, B: YoungFunction, m: int, t=None) -> Compatibility:
    """Sampled ``sup X^-1 (Phi^-1)^m / B^-1`` over ``t`` in ``[1e2, 1e8]``.

    Divergence is judged far out, on ``t`` in ``[1e100, 1e300]``, where the
    ratio is fitted as ``t^s log(t)^r``.  Log-power mismatches converge very
    slowly, so the near grid alone cannot separate them; ``r > 0.15`` or
    ``s > 0.005`` raises.
    """
    t = COMPATIBILITY_T if t is None else np.asarray(t, dtype=float)
    far = np.logspace(100, 300, 32)

    def ratio(s):
        with np.errstate(over="ignore", invalid="ignore"):
            r = np.asarray(X.inverse(s)) * np.asarray(Phi.inverse(s)) ** m / np.asarray(B.inverse(s))
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise IncompatibleYoungTriple("incompatible Young triple: non-finite inverse ratio")
        return r

    near, tail = ratio(t), np.log(ratio(far))
    lt = np.log(far)
    power_slope = np.polyfit(lt, tail, 1)[0]
    log_exponent = np.polyfit(np.log(lt), tail, 1)[0]
    if power_slope > 0.005 or log_exponent > 0.15:
        raise IncompatibleYoungTriple(
            f"incompatible Young triple: inverse ratio grows like log(t)^{log_exponent:.3g}"
        )
    return Compatibility(float(near.max()), float(log_exponent))


def bump_osc_reduced(mu, nu, p, q, alpha, m, A, X, Y, D, Phi, B, C, cubes=None) -> BumpReport:
    """``sup_Q |Q|^e [||mu^(1/q)||_A ||nu^(-1/p)||_X + ||mu^(1/q)||_Y ||nu^(-1/p)||_D]``.

    ``B`` and ``C`` only enter the compatibility checks of ``X`` and ``Y``;
    their constants are echoed in the report parameters.
    """
    _check(mu, nu, p, q, alpha, m)
    kx = compatibility_constant(X, Phi, B, m)
    ky = compatibility_constant(Y, Phi, C, m)
    cubes = default_cubes(mu.domain, cubes)
    mq, nvp = mu.values ** (1 / q), nu.values ** (-1 / p)
    v = _scale(cubes, p, q, alpha) * (
        _norms(mq, A, cubes) * _norms(nvp, X, cubes) + _norms(mq, Y, cubes) * _norms(nvp, D, cubes)
    )
    params = _params(p, q, alpha, m, A=A, X=X, Y=Y, D=D, Phi=Phi, B=B, C=C)
    params.update(kappa_X=kx.kappa, kappa_Y=ky.kappa)
    return scan_report(cubes, v, params)


class LogBumpTerms(NamedTuple):
    term1: BumpReport
    term2: BumpReport
    older_condition: BumpReport


def bump_corollary15(mu, nu, p, q, alpha, m, delta, cubes=None) -> LogBumpTerms:
    """Log-bump conditions with exponent ``delta``.

    term1: ``L^q (log L)^(q-1+d)`` against ``L^p' (log L)^((m+1)p'-1+d)``;
    term2: ``L^q (log L)^((m+1)q-1+d)`` against ``L^p' (log L)^(p'-1+d)``;
    older_condition: the older single condition ``(2q-1+d, 2p'-1+d)``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    _check(mu, nu, p, q, alpha, m)
    cubes = default_cubes(mu.domain, cubes)
    pd = _dual(p)
    mq, nvp = mu.values ** (1 / q), nu.values ** (-1 / p)
    scale = _scale(cubes, p, q, alpha)

    def term(rq, rp):
        A, B = PowerLog(q, rq), PowerLog(pd, rp)
        v = scale * _norms(mq, A, cubes) * _norms(nvp, B, cubes)
        return scan_report(cubes, v, _params(p, q, alpha, m, A=A, B=B) | {"delta": delta})

    return LogBumpTerms(
        term(q - 1 + delta, (m + 1) * pd - 1 + delta),
        term((m + 1) * q - 1 + delta, pd - 1 + delta),
        term(2 * q - 1 + delta, 2 * pd - 1 + delta),
    )


def bump_thm17(mu, nu, p, q, alpha, m, cubes=None) -> BumpReport:
    """``sup_Q |Q|^e avg_Q(mu)^(1/q) ||nu^(-1/p)||_{L^p' (log L)^(m p'), Q}``."""
    _check(mu, nu, p, q, alpha, m)
    cubes = default_cubes(mu.domain, cubes)
    pd = _dual(p)
    B = PowerLog(pd, m * pd)
    v = np.empty(len(cubes))
    for ks, rows in group_rows(mu.values, cubes):
        v[ks] = rows.mean(axis=1) ** (1 / q)
    v = _scale(cubes, p, q, alpha) * v * _norms(nu.values ** (-1 / p), B, cubes)
    return scan_report(cubes, v, _params(p, q, alpha, m, B=B))


def phi_m_identity(values, Phi: YoungFunction, m: int) -> tuple[float, float]:
    """``(|| |g|^m ||_{Phi_m}, ||g||_Phi^m)`` with ``Phi_m(t) = Phi(t^(1/m))``; the two agree."""
    g = np.abs(np.asarray(values, dtype=float))
    return luxemburg_values(g**m, Composed(Phi, 1.0 / m)), luxemburg_values(g, Phi) ** m
