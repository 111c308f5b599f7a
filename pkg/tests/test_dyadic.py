import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracbump.dyadic import (
    DyadicLattice,
    SparseFamily,
    check_lattice_properties,
    construct_sparse_family,
    default_threshold,
    enumerate_cubes,
    packing_ratio,
    sparsity_verify,
)
from fracbump.grid import Domain


def cells(lat, a):
    return np.flatnonzero(lat.cube(a).mask())


@pytest.mark.parametrize("dim,n,min_cells,count", [(1, 8, 1, 15), (2, 8, 1, 85), (1, 16, 4, 7), (2, 16, 4, 21)])
def test_enumerate_counts(dim, n, min_cells, count):
    assert len(enumerate_cubes(DyadicLattice(Domain(dim, 1.0, n)), min_cells)) == count


@pytest.mark.parametrize("dim,n", [(1, 8), (1, 16), (1, 32), (2, 8), (2, 16), (2, 32)])
def test_lattice_axioms_exhaustive(dim, n):
    assert all(check_lattice_properties(DyadicLattice(Domain(dim, 1.0, n))).values())


def test_parent_child_and_containing():
    lat = DyadicLattice(Domain(2, 1.0, 16))
    a = (2, (1, 3))
    for c in lat.children(a):
        assert lat.parent(c) == a
        assert lat.cube(a).contains_cube(lat.cube(c))
    assert lat.containing((5, 13), 2) == (2, (1, 3))
    assert lat.children((4, (0, 0))) == []
    assert lat.parent(lat.root.address) is None


def test_average_pyramid_levels(rng):
    d = Domain(1, 1.0, 16)
    f = d.function(rng.normal(size=16))
    pyr = DyadicLattice(d).average_pyramid(f)
    assert np.allclose(pyr[0], f.values.mean())
    assert np.allclose(pyr[-1], f.values)
    assert np.allclose(pyr[2], f.values.reshape(4, 4).mean(axis=1))


# -- stopping families ---------------------------------------------------------


def test_constant_function_gives_root():
    d = Domain(2, 1.0, 16)
    lat = DyadicLattice(d)
    S = construct_sparse_family(d.constant(3.0), lat)
    assert S.cubes == (lat.root.address,)
    assert sparsity_verify(S) == 1.0


def test_half_indicator_gives_root():
    d = Domain(1, 1.0, 16)
    f = d.from_callable(lambda x: (x >= 0).astype(float))
    S = construct_sparse_family(f, DyadicLattice(d), 4.0)
    assert len(S) == 1


def test_spike_gives_ancestor_chain():
    d = Domain(1, 1.0, 64)
    lat = DyadicLattice(d)
    vals = np.zeros(64)
    vals[37] = 64.0
    # averages along the ancestors are 2^depth; each stop needs 4x the last one
    for min_cells, expected in ((1, [0, 3, 6]), (2, [0, 3])):
        S = construct_sparse_family(d.function(vals), lat, 4.0, min_cells=min_cells)
        assert [a[0] for a in S.cubes] == expected
        for a in S.cubes:
            assert 37 in cells(lat, a)
        assert sparsity_verify(S) >= 0.5


def test_threshold_must_exceed_one():
    d = Domain(1, 1.0, 16)
    with pytest.raises(ValueError):
        construct_sparse_family(d.constant(1.0), DyadicLattice(d), 1.0)
    with pytest.raises(ValueError):
        construct_sparse_family(d.constant(0.0), DyadicLattice(d))


def test_default_threshold():
    assert default_threshold(1) == 4 and default_threshold(2) == 8


# -- certificates ---------------------------------------------------------------


def test_disjoint_cubes_are_fully_sparse():
    lat = DyadicLattice(Domain(1, 1.0, 16))
    addrs = [(2, (0,)), (2, (2,)), (3, (3,))]
    S = SparseFamily(lat, addrs, {a: cells(lat, a) for a in addrs})
    assert sparsity_verify(S) == 1.0


def test_nested_chain_is_half_sparse():
    lat = DyadicLattice(Domain(1, 1.0, 16))
    chain = [(0, (0,)), (1, (0,)), (2, (0,))]
    cert = {
        chain[0]: np.setdiff1d(cells(lat, chain[0]), cells(lat, chain[1])),
        chain[1]: np.setdiff1d(cells(lat, chain[1]), cells(lat, chain[2])),
        chain[2]: cells(lat, chain[2]),
    }
    assert sparsity_verify(SparseFamily(lat, chain, cert)) == pytest.approx(0.5)


def test_invalid_certificates():
    lat = DyadicLattice(Domain(1, 1.0, 16))
    a, b = (1, (0,)), (2, (0,))
    with pytest.raises(ValueError, match="overlap"):
        sparsity_verify(SparseFamily(lat, [a, b], {a: cells(lat, a), b: cells(lat, b)}))
    with pytest.raises(ValueError, match="leaves"):
        sparsity_verify(SparseFamily(lat, [b], {b: np.arange(8)}))
    with pytest.raises(ValueError):
        sparsity_verify(SparseFamily(lat, [], {}))


@pytest.mark.parametrize("dim,n", [(1, 256), (2, 64)])
def test_random_families_are_sparse(dim, n, rng):
    d = Domain(dim, 1.0, n)
    lat = DyadicLattice(d)
    tau = default_threshold(dim)
    for _ in range(5):
        f = d.function(rng.pareto(1.5, size=d.size))
        S = construct_sparse_family(f, lat, tau, min_cells=1)
        assert sparsity_verify(S) >= 0.5
        assert packing_ratio(S) <= tau / (tau - 1) + 1e-12


def test_text_round_trip(rng, tmp_path):
    d = Domain(2, 1.5, 16)
    S = construct_sparse_family(d.function(rng.pareto(1.2, size=256)), DyadicLattice(d), min_cells=1)
    S.save(tmp_path / "s.txt")
    T = SparseFamily.load(tmp_path / "s.txt")
    assert T.cubes == S.cubes and T.lattice == S.lattice and T.eta == S.eta
    for a in S.cubes:
        assert np.array_equal(np.sort(T.certificate[a]), np.sort(S.certificate[a]))
    assert T.dumps() == S.dumps()


def test_malformed_family_text():
    with pytest.raises(ValueError):
        SparseFamily.loads("dim 1\nn_cells 8\nhalf_width 1.0\n")
    with pytest.raises(ValueError):
        SparseFamily.loads("dim 1\nn_cells 8\nhalf_width 1.0\ncubes 1\n0:0\n")


@given(st.integers(0, 2**31 - 1), st.floats(1.5, 8.0), st.sampled_from([(1, 64), (2, 16)]))
def test_stopping_sets_carry_fixed_fraction(seed, tau, shape):
    dim, n = shape
    d = Domain(dim, 1.0, n)
    f = d.function(np.random.default_rng(seed).pareto(1.0, size=d.size))
    S = construct_sparse_family(f, DyadicLattice(d), tau, min_cells=1)
    assert sparsity_verify(S) >= 1 - 1 / tau - 1e-12


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0))
def test_family_is_scale_invariant(seed, c):
    d = Domain(1, 1.0, 64)
    f = d.function(np.random.default_rng(seed).exponential(size=64))
    lat = DyadicLattice(d)
    assert construct_sparse_family(f, lat).cubes == construct_sparse_family(c * f, lat).cubes
