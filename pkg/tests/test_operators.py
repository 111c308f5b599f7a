import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import fracbump.operators as ops
from fracbump.dyadic import DyadicLattice, enumerate_cubes
from fracbump.grid import CubeRegion, Domain
from fracbump.operators import (
    adjoint_defect,
    commutator,
    fractional_integral,
    kernel,
    kernel_matrix,
    kernel_oscillation,
    maximal,
    pointwise_reduction_ratio,
    self_integral,
    self_integral_midpoint,
    sparse_domination_check,
    sparse_operator,
)
from fracbump.orlicz import PowerLog, luxemburg_values
from fracbump.grid import lp_norm


def brute_commutator(f, b, m, alpha):
    d = f.domain
    pts, fv, bv = d.points(), f.values.ravel(), b.values.ravel()
    out = np.zeros(d.size)
    for i in range(d.size):
        for j in range(d.size):
            if i == j:
                k = self_integral(d, alpha)
            else:
                k = d.cell_volume * np.linalg.norm(pts[i] - pts[j]) ** (alpha - d.dim)
            out[i] += k * (bv[i] - bv[j]) ** m * fv[j]
    return out


def inner_noise(d, rng):
    v = rng.normal(size=d.shape)
    mask = np.all([np.abs(c) <= d.half_width / 2 for c in d.coords()], axis=0)
    return d.function(np.where(mask, v, 0.0))


# -- self-cell integral ---------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.9])
def test_self_integral_1d_midpoint_converges(alpha):
    d = Domain(1, 1.0, 64)
    exact = self_integral(d, alpha)
    errs = [abs(self_integral_midpoint(d, alpha, 2**k) - exact) for k in (4, 6, 8)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_self_integral_2d_polar_formula(alpha):
    d = Domain(2, 1.0, 16)
    # the singular midpoint error decays like refine^-alpha
    exact = self_integral(d, alpha)
    coarse, fine = (abs(self_integral_midpoint(d, alpha, k) - exact) for k in (64, 512))
    assert coarse / fine == pytest.approx(8**alpha, rel=0.1)


def test_kernel_matrix_is_symmetric_and_cached():
    d = Domain(2, 1.0, 8)
    K = kernel_matrix(d, 0.7)
    assert np.array_equal(K, K.T)
    assert kernel_matrix(d, 0.7) is K
    with pytest.raises(ValueError):
        K[0, 0] = 1.0


def test_blocked_path_matches_dense(monkeypatch, rng):
    d = Domain(1, 1.0, 64)
    f, b = d.function(rng.normal(size=64)), d.function(rng.normal(size=64))
    dense = commutator(f, b, 2, 0.4).values
    monkeypatch.setattr(ops, "_CACHE_MAX_SIZE", 16)
    monkeypatch.setattr(ops, "_BLOCK_ENTRIES", 500)
    assert np.allclose(commutator(f, b, 2, 0.4).values, dense, rtol=1e-13, atol=1e-13)


# -- fractional integral and commutators -----------------------------------------------


def test_zero_input():
    d = Domain(2, 1.0, 8)
    assert not np.any(fractional_integral(d.constant(0.0), 1.0).values)


def test_closed_forms_at_n512():
    d = Domain(1, 4.0, 512)
    chi = d.from_callable(lambda x: ((x >= 0) & (x < 1)).astype(float))
    x = d.from_callable(lambda x: x)
    i2 = int(np.argmin(np.abs(d.axis() - 2.0)))
    assert abs(d.axis()[i2] - 2.0) < d.h
    # value at x = 2 by linear interpolation between the neighbouring centres
    i0 = fractional_integral(chi, 0.5)
    i1 = commutator(chi, x, 1, 0.5)
    assert abs(i0.at([2.0]) - 2 * (math.sqrt(2) - 1)) < 2e-3
    assert abs(i1.at([2.0]) - 2 / 3 * (2**1.5 - 1)) < 2e-3


def test_even_input_gives_even_output(rng):
    d = Domain(1, 1.0, 64)
    v = rng.normal(size=64)
    f = d.function(v + v[::-1])
    out = fractional_integral(f, 0.3).values
    assert np.max(np.abs(out - out[::-1])) <= 1e-12 * np.max(np.abs(out))


def test_constant_symbol_kills_commutator(rng):
    d = Domain(2, 1.0, 8)
    f = d.function(rng.normal(size=64))
    for m in (1, 2, 3):
        assert not np.any(commutator(f, d.constant(4.2), m, 1.2).values)


def test_order_zero_is_bit_identical(rng):
    d = Domain(1, 1.0, 64)
    f, b = d.function(rng.normal(size=64)), d.function(rng.normal(size=64))
    assert np.array_equal(commutator(f, b, 0, 0.5).values, fractional_integral(f, 0.5).values)


@pytest.mark.parametrize("dim,m", [(1, 1), (1, 2), (2, 2)])
def test_matches_double_sum(dim, m, rng):
    d = Domain(dim, 1.0, 32 if dim == 1 else 8)
    f, b = d.function(rng.normal(size=d.size)), d.function(rng.normal(size=d.size))
    assert np.allclose(commutator(f, b, m, 0.6).values.ravel(), brute_commutator(f, b, m, 0.6), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_adjoint_identity(m, rng):
    d = Domain(1, 1.0, 32)
    for _ in range(10):
        f, g, b = (d.function(rng.normal(size=32)) for _ in range(3))
        assert adjoint_defect(f, g, b, m, 0.5) <= 1e-12


def test_invalid_arguments():
    d = Domain(1, 1.0, 8)
    f = d.constant(1.0)
    with pytest.raises(ValueError):
        commutator(f, f, -1, 0.5)
    with pytest.raises(ValueError):
        commutator(f, f, 1, 1.0)
    with pytest.raises(ValueError):
        commutator(f, Domain(1, 2.0, 8).constant(1.0), 1, 0.5)


@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(0.1, 0.9))
def test_linear_in_f(seed, c, alpha):
    d = Domain(1, 1.0, 16)
    r = np.random.default_rng(seed)
    f, g, b = (d.function(r.normal(size=16)) for _ in range(3))
    lhs = commutator(f + c * g, b, 1, alpha).values
    rhs = commutator(f, b, 1, alpha).values + c * commutator(g, b, 1, alpha).values
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


@given(st.integers(0, 2**31 - 1), st.floats(-5, 5), st.integers(1, 3))
def test_symbol_shift_invariance(seed, shift, m):
    d = Domain(1, 1.0, 16)
    r = np.random.default_rng(seed)
    f, b = d.function(r.normal(size=16)), d.function(r.normal(size=16))
    a, c = commutator(f, b, m, 0.5).values, commutator(f, b + shift, m, 0.5).values
    assert np.allclose(a, c, rtol=1e-9, atol=1e-9)


@given(st.integers(0, 2**31 - 1), st.floats(0.1, 3), st.integers(0, 3))
def test_symbol_scaling(seed, c, m):
    d = Domain(1, 1.0, 16)
    r = np.random.default_rng(seed)
    f, b = d.function(r.normal(size=16)), d.function(r.normal(size=16))
    assert np.allclose(commutator(f, c * b, m, 0.5).values, c**m * commutator(f, b, m, 0.5).values, rtol=1e-9, atol=1e-12)


def test_dilation_scaling():
    # I_alpha f(lambda .) = lambda^-alpha (I_alpha f)(lambda .), exact on matched grids
    small, big = Domain(1, 1.0, 32), Domain(1, 2.0, 32)
    fs = small.from_callable(lambda x: np.exp(-4 * x**2))
    fb = big.from_callable(lambda x: np.exp(-4 * (x / 2) ** 2))
    alpha = 0.4
    assert np.allclose(fractional_integral(fb, alpha).values, 2**alpha * fractional_integral(fs, alpha).values, rtol=1e-12)


# -- sparse operators ----------------------------------------------------------------------


def test_single_cube_constant_symbol(rng):
    d = Domain(1, 1.0, 16)
    Q = CubeRegion(d, (4,), 8)
    f = d.function(rng.normal(size=16))
    for starred in (False, True):
        assert not np.any(sparse_operator(f, d.constant(2.0), 2, 0.5, [Q], starred).output.values)


def test_single_cube_order_zero(rng):
    d = Domain(2, 1.0, 8)
    Q = CubeRegion(d, (0, 4), 4)
    f = d.function(rng.normal(size=64))
    expected = Q.measure ** (0.7 / 2) * np.abs(f.restrict(Q)).mean()
    for starred in (False, True):
        out = sparse_operator(f, None, 0, 0.7, [Q], starred).output.values
        assert np.allclose(out[Q.slices], expected, rtol=1e-14)
        assert not np.any(out[~Q.mask()])


@pytest.mark.parametrize("starred", [False, True])
def test_nested_pair_enumeration_oracle(starred):
    d = Domain(1, 1.0, 32)
    lat = DyadicLattice(d)
    outer, inner = lat.cube((1, (1,))), lat.cube((3, (5,)))
    one, x = d.constant(1.0), d.from_callable(lambda t: t)
    alpha = 0.5
    got = sparse_operator(one, x, 1, alpha, [outer, inner], starred)
    xv = x.values
    for i in range(32):
        terms = []
        for Q in (outer, inner):
            if Q.start[0] <= i < Q.start[0] + Q.cells:
                seg = xv[Q.start[0] : Q.start[0] + Q.cells]
                osc = abs(xv[i] - seg.mean()) if starred else np.mean(np.abs(seg - seg.mean()))
                terms.append(Q.measure**alpha * osc)
        assert got.output.values[i] == pytest.approx(max(terms, default=0.0), abs=1e-10)
    assert got.labels[got.argmax[inner.start[0]]] in (outer.label(), inner.label())


def test_sparse_operator_trace_csv():
    d = Domain(1, 1.0, 8)
    tr = sparse_operator(d.constant(1.0), None, 0, 0.5, [CubeRegion(d, (0,), 4)])
    rows = tr.to_csv().splitlines()
    assert rows[0] == "x,value,cube" and len(rows) == 9
    assert rows[-1].endswith(",")


def test_empty_family_raises():
    d = Domain(1, 1.0, 8)
    with pytest.raises(ValueError):
        sparse_operator(d.constant(1.0), None, 0, 0.5, [])


def test_domination_constant_symbol_is_zero(rng):
    d = Domain(1, 1.0, 64)
    assert sparse_domination_check(inner_noise(d, rng), d.constant(1.0), 2, 0.5) == 0.0


def test_domination_indicator_order_zero():
    d = Domain(1, 1.0, 64)
    Q = DyadicLattice(d).cube((3, (3,)))
    r = sparse_domination_check(d.function(Q.mask().astype(float)), d.constant(0.0), 0, 0.5)
    assert 0 < r < math.inf


def test_domination_needs_inner_support():
    d = Domain(1, 1.0, 16)
    with pytest.raises(ValueError):
        sparse_domination_check(d.constant(1.0), d.constant(0.0), 1, 0.5)


def test_domination_stable_across_functions(rng):
    d = Domain(1, 1.0, 128)
    for m in (1, 2):
        ratios = [sparse_domination_check(inner_noise(d, rng), d.function(rng.normal(size=128)), m, 0.5) for _ in range(15)]
        assert max(ratios) <= 10 * np.median(ratios)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_pointwise_reduction_exhaustive(m, rng):
    d = Domain(1, 1.0, 32)
    cubes = enumerate_cubes(DyadicLattice(d), 1)
    for _ in range(5):
        f, b = d.function(rng.normal(size=32)), d.function(rng.standard_cauchy(size=32))
        r = pointwise_reduction_ratio(f, b, m, cubes)
        assert r["sum"] <= 1 + 1e-12 and r["term"] <= 1 + 1e-12


# -- maximal operators ---------------------------------------------------------------------


def test_maximal_of_constant():
    d = Domain(2, 1.0, 8)
    assert np.allclose(maximal(d.constant(2.5)).values, 2.5, rtol=1e-14)


def test_maximal_of_indicator():
    d = Domain(1, 1.0, 32)
    Q = DyadicLattice(d).cube((2, (1,)))
    M = maximal(d.function(Q.mask().astype(float)))
    assert np.all(M.values[Q.slices] >= 1 - 1e-15)


def test_maximal_dominates_function(rng):
    d = Domain(1, 1.0, 32)
    f = d.function(rng.normal(size=32))
    assert np.all(maximal(f).values >= np.abs(f.values) - 1e-12)


def test_maximal_with_bump(rng):
    d = Domain(1, 1.0, 32)
    B = PowerLog(2, 1)
    f = d.function(rng.exponential(size=32))
    cubes = enumerate_cubes(DyadicLattice(d), 1)
    M = maximal(f, 0.0, B, cubes)
    expected = np.zeros(32)
    for Q in cubes:
        expected[Q.slices] = np.maximum(expected[Q.slices], luxemburg_values(f.restrict(Q), B))
    assert np.allclose(M.values, expected, rtol=1e-12)


def test_fractional_maximal_ratio_bounded(rng):
    d = Domain(1, 1.0, 128)
    p, beta = 2.0, 0.25
    q = 1 / (1 / p - beta)
    Bbar = PowerLog(p / (p - 1), -1.5).complementary()
    ratios = []
    for _ in range(50):
        f = inner_noise(d, rng)
        ratios.append(lp_norm(maximal(f, beta, Bbar), None, q) / lp_norm(f, None, p))
    assert np.all(np.isfinite(ratios)) and max(ratios) <= 10 * np.median(ratios)


def test_maximal_rejects_beta():
    d = Domain(1, 1.0, 8)
    with pytest.raises(ValueError):
        maximal(d.constant(1.0), beta=1.0)


# -- kernel oscillation ----------------------------------------------------------------------


def test_kernel_plug_in():
    assert kernel(np.array([2.0]), np.array([-2.0]), 0.5, 1) == pytest.approx(0.5, rel=1e-15)
    assert kernel(np.array([3.0, 4.0]), np.zeros(2), 1.0, 2) == pytest.approx(0.2)


def test_oscillation_of_single_point():
    assert kernel_oscillation(0.5, 1.0, 8.0, samples=1).measured_osc == 0.0


@pytest.mark.parametrize("dim,alpha", [(1, 0.5), (1, 0.2), (2, 1.0)])
def test_oscillation_rate(dim, alpha):
    r = 1.0
    c = None
    for A in 4 * 2.0 ** np.arange(7):
        k = kernel_oscillation(alpha, r, A, samples=21, dim=dim)
        scaled = k.measured_osc * A ** (dim - alpha + 1) * r ** (dim - alpha)
        if c is None:
            c = scaled
            assert k.bound == pytest.approx(k.measured_osc, rel=1e-12)
        assert c / 4 <= scaled <= c * (1 + 1e-12)
        assert k.measured_osc <= k.bound * (1 + 1e-12)


def test_oscillation_argument_checks():
    with pytest.raises(ValueError):
        kernel_oscillation(0.5, 1.0, 3.0)
    with pytest.raises(ValueError):
        kernel_oscillation(0.5, 1.0, 8.0, domain=Domain(1, 2.0, 16))
