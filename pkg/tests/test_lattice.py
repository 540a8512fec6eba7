import numpy as np
import pytest
from hypothesis import given, strategies as st

from nestlat.codes import parity_membership, Membership, sample_generator_code, sample_parity_code
from nestlat.lattice import (
    LatticeParams,
    OffGridError,
    from_lattice_point,
    fundamental_region,
    g_map,
    mod_lattice_member,
    to_lattice_point,
    union_of_shifts_member,
)
from nestlat.zp import ZpVector, lex_tuples


def test_alphabet_is_centred():
    assert LatticeParams(1.0, 3).alphabet().tolist() == [-1.0, 0.0, 1.0]
    assert LatticeParams(0.5, 5).alphabet().tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        LatticeParams(0.0, 3)
    with pytest.raises(ValueError):
        LatticeParams(1.0, 6)


@given(st.sampled_from([3, 5, 7]), st.floats(0.01, 10), st.integers(1, 5), st.integers(0, 10**6))
def test_round_trip(p, gamma, n, seed):
    lat = LatticeParams(gamma, p)
    v = ZpVector(np.random.default_rng(seed).integers(0, p, n), p)
    x = to_lattice_point(lat, v)
    assert np.all(np.abs(x) <= gamma * (p - 1) / 2 + 1e-12)
    assert from_lattice_point(lat, x) == v


def test_off_grid_points_rejected():
    lat = LatticeParams(1.0, 3)
    with pytest.raises(OffGridError):
        from_lattice_point(lat, [0.5])
    with pytest.raises(OffGridError):
        from_lattice_point(lat, [2.0])
    assert lat.index_of([-1.0, 1.0]).tolist() == [0, 2]


def test_fundamental_region_order():
    lat = LatticeParams(2.0, 3)
    pts = fundamental_region(lat, 2)
    assert pts.shape == (9, 2)
    assert pts[0].tolist() == [-2.0, -2.0] and pts[1].tolist() == [-2.0, 0.0]


@given(st.integers(0, 10**6), st.sampled_from([0.5, 1.0, 3.0]))
def test_mod_reduction_matches_union_of_shifts(seed, gamma):
    rng = np.random.default_rng(seed)
    p, n = 3, 3
    lat = LatticeParams(gamma, p)
    code = sample_parity_code(n, 1, 1, p, rng)
    outer = list(code.outer())
    member = lambda v: parity_membership(code, v) != Membership.NEITHER  # noqa: E731
    for _ in range(20):
        w = rng.integers(-2 * p, 3 * p, n)
        x = gamma * (w - lat.center)
        if rng.random() < 0.2:
            x = x + gamma * 0.3
        assert mod_lattice_member(lat, member, x) == union_of_shifts_member(lat, outer, x)


def test_g_map_is_gamma_scaled_codeword():
    lat = LatticeParams(0.5, 5)
    code = sample_generator_code(4, 1, 2, 5, np.random.default_rng(1))
    for a in lex_tuples(2, 5)[:7]:
        x = g_map(lat, code, a, [3])
        assert np.allclose(x, 0.5 * (code.bin_array([3])[int(a[0]) * 5 + int(a[1])] - 2))
    with pytest.raises(ValueError):
        g_map(LatticeParams(1.0, 3), code, [0, 0], [0])
