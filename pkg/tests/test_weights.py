import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracbump.dyadic import DyadicLattice, enumerate_cubes
from fracbump.grid import Domain
from fracbump.orlicz import ExpMinusOne, Power, PowerLog, luxemburg_values
from fracbump.weights import (
    LOG_MAXIMAL_AVERAGE_BOUND,
    apq_constant,
    bmo_norm,
    doubling_constant,
    kolmogorov_constant,
    kolmogorov_ratio,
    llogl_ratio,
    llogl_ratio_interval,
    log_maximal_test_function,
    osc_phi_norm,
    parse_symbol,
    parse_weight,
    two_weight_ap_constant,
    weighted_bmo_norm,
)


def all_cubes(d):
    return enumerate_cubes(DyadicLattice(d), 1)


def power_weight(d, a):
    return parse_weight(f"power(a={a})").realize(d)


# -- specs ---------------------------------------------------------------------------


def test_weight_kinds(tmp_path):
    d = Domain(1, 1.0, 16)
    assert np.all(parse_weight("const(c=2.5)").realize(d).values == 2.5)
    w = power_weight(d, 0.5).values
    assert w[8] == pytest.approx(math.sqrt(d.h / 2))
    prod = parse_weight("product(power(a=0.5), const(c=3))").realize(d).values
    assert np.allclose(prod, 3 * w)
    src = d.from_callable(lambda x: 1 + x**2)
    src.to_csv(tmp_path / "w.csv")
    assert np.array_equal(parse_weight("table(path=w.csv)").realize(d, tmp_path).values, src.values)
    fine = parse_weight("table(path=w.csv)").realize(Domain(1, 1.0, 32), tmp_path).values
    assert np.all(fine > 0) and fine.shape == (32,)


@pytest.mark.parametrize("text", ["const(c=0)", "const(c=-1)", "gauss(s=1)", "product()", "power(b=1)", "power(a=1, c=2)"])
def test_bad_weight_specs(text):
    with pytest.raises(ValueError):
        parse_weight(text)


def test_nonpositive_table_rejected(tmp_path):
    d = Domain(1, 1.0, 8)
    d.from_callable(lambda x: x).to_csv(tmp_path / "w.csv")
    with pytest.raises(ValueError, match="positive"):
        parse_weight("table(path=w.csv)").realize(d, tmp_path)


def test_weight_text_round_trip():
    for text in ("const(c=2)", "power(a=-0.3)", "product(power(a=0.5), const(c=3))"):
        assert parse_weight(parse_weight(text).text()).text() == parse_weight(text).text()


def test_symbols():
    d = Domain(1, 1.0, 16)
    x = d.axis()
    assert np.allclose(parse_symbol("linear(c=2)", d).values, 2 * x)
    assert np.allclose(parse_symbol("sin(k=3)", d).values, np.sin(3 * x))
    assert np.allclose(parse_symbol("logabs", d).values, np.log(np.maximum(np.abs(x), d.h / 2)))
    assert np.all(parse_symbol("const(c=-4)", d).values == -4)
    with pytest.raises(ValueError):
        parse_symbol("cubic", d)


# -- Muckenhoupt-type constants -----------------------------------------------------------


def test_apq_constant_weights():
    d = Domain(1, 1.0, 32)
    for c in (1.0, 7.5):
        rep = apq_constant(d.constant(c), 2, 4)
        assert np.allclose(rep.values, 1.0, rtol=1e-14)


def test_apq_power_weight_scan_oracle():
    d = Domain(1, 1.0, 128)
    w = power_weight(d, 0.3)
    p, q = 2.0, 4.0
    pd = p / (p - 1)
    oracle = max(
        np.mean(w.restrict(Q) ** q) * np.mean(w.restrict(Q) ** -pd) ** (q / pd) for Q in all_cubes(d)
    )
    assert float(apq_constant(w, p, q)) == pytest.approx(oracle, rel=1e-6)


def test_apq_rejects_exponents():
    d = Domain(1, 1.0, 8)
    with pytest.raises(ValueError):
        apq_constant(d.constant(1.0), 2, 2)


def test_two_weight_ap():
    d = Domain(1, 1.0, 128)
    assert float(two_weight_ap_constant(d.constant(1.0), d.constant(1.0), 2)) == pytest.approx(1.0, rel=1e-14)
    wp = d.constant(3.0) ** 2
    assert float(two_weight_ap_constant(wp, wp, 2)) == pytest.approx(1.0, rel=1e-14)
    mu, nu = power_weight(d, 0.5), power_weight(d, -0.5)
    oracle = max(np.mean(mu.restrict(Q)) * np.mean(nu.restrict(Q) ** -1) for Q in all_cubes(d))
    assert float(two_weight_ap_constant(mu, nu, 2)) == pytest.approx(oracle, rel=1e-6)


def test_doubling():
    for dim in (1, 2):
        assert doubling_constant(Domain(dim, 1.0, 16).constant(1.0)) == pytest.approx(2.0**dim, rel=1e-14)
    d = Domain(1, 1.0, 128)
    mu = power_weight(d, 1.0)
    oracle = 0.0
    for Q in all_cubes(d):
        if Q.cells % 2:
            continue
        try:
            Q2 = Q.dilate(2)
        except ValueError:
            continue
        oracle = max(oracle, mu.restrict(Q2).sum() / mu.restrict(Q).sum())
    assert doubling_constant(mu) == pytest.approx(oracle, rel=1e-12)
    assert math.isfinite(oracle) and oracle > 2


def test_doubling_grows_with_spike():
    d = Domain(1, 1.0, 64)
    vals = []
    for height in (1e1, 1e3, 1e5):
        v = np.ones(64)
        v[33] = height
        vals.append(doubling_constant(d.function(v)))
    assert vals[0] < vals[1] < vals[2]


def test_doubling_report():
    rep = doubling_constant(Domain(1, 1.0, 16).constant(1.0), report=True)
    assert rep.sup == pytest.approx(2.0) and rep.argmax is not None


# -- BMO-type norms -------------------------------------------------------------------------


def test_bmo_oracles():
    d = Domain(1, 1.0, 256)
    assert bmo_norm(d.constant(3.0)) == 0.0
    # x restricted to [0, 1]: cubes of length l inside give l/4
    right = Domain(1, 0.5, 256)
    x = right.from_callable(lambda t: t + 0.5)
    assert abs(bmo_norm(x) - 0.25) <= right.h


def test_bmo_of_log_is_stable():
    vals = [bmo_norm(parse_symbol("logabs", Domain(1, 1.0, n))) for n in (128, 256, 512)]
    assert all(math.isfinite(v) for v in vals)
    assert max(vals[1] / vals[0], vals[2] / vals[1]) <= 1.1


def test_weighted_bmo():
    d = Domain(1, 0.5, 128)
    b = d.from_callable(lambda t: t + 0.5)
    assert weighted_bmo_norm(b, d.constant(1.0)) == pytest.approx(bmo_norm(b), rel=1e-15)
    assert weighted_bmo_norm(d.constant(2.0), d.constant(1.0)) == 0.0
    eta = d.from_callable(lambda t: np.sqrt(t + 0.5))
    oracle = max(
        np.mean(np.abs(b.restrict(Q) - b.restrict(Q).mean())) / np.mean(eta.restrict(Q)) for Q in all_cubes(d)
    )
    assert weighted_bmo_norm(b, eta) == pytest.approx(oracle, rel=1e-8)


def test_osc_phi():
    d = Domain(1, 0.5, 128)
    b = d.from_callable(lambda t: t + 0.5)
    assert osc_phi_norm(d.constant(1.0), ExpMinusOne()) == 0.0
    assert osc_phi_norm(b, Power(1.0001)) == pytest.approx(bmo_norm(b), rel=1e-3)
    ratio = osc_phi_norm(b, ExpMinusOne()) / bmo_norm(b)
    assert 1.5 <= ratio <= 1.7


@given(st.integers(0, 2**31 - 1), st.floats(-10, 10), st.floats(0.01, 100))
def test_bmo_shift_and_homogeneity(seed, shift, c):
    d = Domain(1, 1.0, 32)
    b = d.function(np.random.default_rng(seed).normal(size=32))
    base = bmo_norm(b)
    assert bmo_norm(b + shift) == pytest.approx(base, rel=1e-9)
    assert bmo_norm(c * b) == pytest.approx(c * base, rel=1e-12)
    assert osc_phi_norm(c * b, PowerLog(2, 1)) == pytest.approx(c * osc_phi_norm(b, PowerLog(2, 1)), rel=1e-10)


# -- necessity ingredients ------------------------------------------------------------------


def test_kolmogorov(rng):
    d = Domain(1, 1.0, 64)
    Q = DyadicLattice(d).cube((1, (0,)))
    for delta in (0.25, 0.5, 0.75):
        for _ in range(20):
            f = d.function(rng.pareto(1.1, size=64))
            assert kolmogorov_ratio(f, Q, delta) <= kolmogorov_constant(delta)
    with pytest.raises(ValueError):
        kolmogorov_constant(1.0)


def test_log_maximal_average(rng):
    d = Domain(1, 1.0, 64)
    for Q in all_cubes(d)[:10]:
        sigma = d.function(rng.pareto(0.8, size=64) + 1e-3)
        g = log_maximal_test_function(sigma, Q)
        assert np.all(g >= 0) and g.mean() <= LOG_MAXIMAL_AVERAGE_BOUND


def test_log_maximal_of_constant_is_zero():
    d = Domain(1, 1.0, 16)
    assert not np.any(log_maximal_test_function(d.constant(2.0), d.full_cube()))


def test_llogl_interval_values():
    assert llogl_ratio_interval(0) == (1.0, 1.0)
    lo2, hi2 = llogl_ratio_interval(2)
    lo4, _ = llogl_ratio_interval(4)
    assert hi2 == 1.0 and lo2 == pytest.approx(0.3134, abs=1e-3) and lo4 == pytest.approx(0.0263, abs=1e-3)


@given(st.integers(0, 2**31 - 1), st.sampled_from([1.0, 2.0, 3.0]))
def test_llogl_ratio_in_interval(seed, power):
    v = np.random.default_rng(seed).pareto(0.7, size=64)
    lo, hi = llogl_ratio_interval(power)
    assert lo <= llogl_ratio(v, power) <= hi + 1e-12


def test_llogl_ratio_is_luxemburg_over_average(rng):
    v = rng.exponential(size=32)
    explicit = np.mean(v * np.log(math.e + v / v.mean()) ** 2)
    assert llogl_ratio(v, 2) == pytest.approx(luxemburg_values(v, PowerLog(1, 2)) / explicit, rel=1e-12)
