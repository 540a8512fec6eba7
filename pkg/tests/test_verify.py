import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nestlat.instances import binary_exponent_d1, gp_z3_flip01
from nestlat.measures import FiniteMeasure
from nestlat.verify import (
    InstanceTooLarge,
    Verdict,
    batch_rank,
    estimate_typicality_exponent,
    full_rank_probability,
    rank_bound,
    second_moment_report,
    verify_g_uniform,
    verify_pairwise_independence,
    verify_parity_uniform_independent,
    verify_rank_distribution,
    wilson_interval,
)
from nestlat.zp import rank


@given(st.sampled_from([3, 5, 7]), st.integers(1, 4), st.integers(1, 5), st.integers(0, 10**6))
def test_batch_rank_matches_single_rank(p, r, c, seed):
    mats = np.random.default_rng(seed).integers(0, p, size=(20, r, c))
    mats[::4] = 0
    assert batch_rank(mats, p).tolist() == [rank(m, p) for m in mats]


def census(p, n, l):
    counts = [0] * (l + 1)
    for vals in itertools.product(range(p), repeat=n * l):
        counts[rank(np.array(vals).reshape(l, n), p)] += 1
    return counts


def test_rank_census_and_bounds():
    assert census(3, 2, 1) == [1, 8]
    assert census(3, 2, 2) == [1, 32, 48]
    assert full_rank_probability(3, 2, 2) == Fraction(48, 81)
    # rank-deficiency bound holds for every i and is tight at i = 0
    for p, n, l in ((3, 2, 2), (3, 3, 2), (5, 2, 2)):
        c = census(p, n, l)
        total = sum(c)
        for i in range(l):
            assert Fraction(c[i], total) <= rank_bound(p, n, l, i)
        assert Fraction(c[0], total) == rank_bound(p, n, l, 0)


def test_exhaustive_lemma_checks():
    r = verify_g_uniform(3, 1, 1, 1)
    assert r.verdict is Verdict.EXACT and r.observed == [9]
    assert verify_g_uniform(3, 2, 1, 1).verdict is Verdict.EXACT
    assert verify_g_uniform(3, 1, 1, 1, dither=False).verdict is Verdict.FAIL
    assert verify_pairwise_independence(3, 1, 1, 1).verdict is Verdict.EXACT
    assert verify_pairwise_independence(3, 1, 1, 1, case="diff_m").verdict is Verdict.EXACT
    assert verify_pairwise_independence(3, 1, 1, 1, case="identical").verdict is Verdict.FAIL
    assert verify_parity_uniform_independent(3, 2, 1).verdict is Verdict.EXACT
    for p, n, l in ((3, 2, 2), (3, 3, 3), (3, 4, 2)):
        assert verify_rank_distribution(p, n, l).verdict is Verdict.EXACT
    assert "exact-match" in r.to_text() and r.ok


def test_budget_is_enforced():
    with pytest.raises(InstanceTooLarge):
        verify_g_uniform(5, 4, 2, 2)
    with pytest.raises(InstanceTooLarge):
        verify_rank_distribution(3, 6, 3)


def test_workers_give_same_result():
    a = verify_g_uniform(3, 2, 1, 1, workers=1)
    b = verify_g_uniform(3, 2, 1, 1, workers=2)
    assert a.row() == b.row()


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)
    with pytest.raises(ValueError):
        wilson_interval(1, 0)


def test_exponent_small_n_matches_exact_probability():
    # with eps below 1/n a typical Z^n must equal y, so P = 2^-n exactly
    P_XY, P_Z = binary_exponent_d1()
    rows, target = estimate_typicality_exponent(P_XY, P_Z, None, [6, 8], 200000, 0.05, seed=1)
    assert target == pytest.approx(1.0)
    for r in rows:
        lo, hi = wilson_interval(r.hits, r.samples, z=4.0)
        assert lo <= 2.0 ** -r.n <= hi
        assert r.exponent_lo <= r.exponent <= r.exponent_hi


def test_exponent_zero_divergence():
    P_XY = FiniteMeasure([[0, 0], [0, 1], [1, 0], [1, 1]], [0.25] * 4)
    P_Z = FiniteMeasure([[0.0], [1.0]], [0.5, 0.5])
    rows, target = estimate_typicality_exponent(P_XY, P_Z, None, [12], 20000, 0.4, seed=0)
    assert target == pytest.approx(0.0, abs=1e-12)
    assert rows[0].exponent < 0.2


def test_exponent_reports_lower_bound_on_zero_hits():
    P_XY, P_Z = binary_exponent_d1()
    rows, _ = estimate_typicality_exponent(P_XY, P_Z, None, [30], 1000, 0.02, seed=0)
    assert rows[0].hits == 0 and rows[0].lower_bound_only and rows[0].exponent == math.inf


def test_second_moment_reference_instance():
    rep = second_moment_report(gp_z3_flip01(), 9, 0, 4, 0.25, 400, seed=0)
    assert rep.holds
    assert rep.mean > 0 and rep.counts.max() <= 81


def test_second_moment_degenerate_cases():
    spec = gp_z3_flip01()
    everything = second_moment_report(spec, 4, 0, 2, 1.0, 20, seed=0)
    assert np.all(everything.counts == 9) and everything.p_zero == 0.0
    nothing = second_moment_report(spec, 4, 0, 2, 1e-6, 20, seed=0)
    assert np.all(nothing.counts == 0) and nothing.p_zero == 1.0
