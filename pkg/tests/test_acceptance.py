"""Acceptance criteria, one test per criterion, each at its stated tolerance.

The conftest hook prints a PASS/FAIL line per test at the end of the run.
"""

import hashlib
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from nestlat.codes import Membership, parity_membership, sample_parity_code
from nestlat.gp import ChannelSpec, gp_rate_thresholds
from nestlat.harness import parse_config, run
from nestlat.instances import get_instance
from nestlat.lattice import LatticeParams, mod_lattice_member, union_of_shifts_member
from nestlat.measures import FiniteMeasure, prokhorov_distance, total_variation
from nestlat.verify import (
    Verdict,
    full_rank_probability,
    rank_bound,
    verify_g_uniform,
    verify_pairwise_independence,
    verify_parity_uniform_independent,
    verify_rank_distribution,
)
from nestlat.wz import SourceSpec, wz_rate_thresholds
from nestlat.zp import rank

pytestmark = pytest.mark.slow

CONFIGS = {
    "gp": "mode = gp\ninstance = gp-z3-flip01\n",
    "gp_above": "mode = gp\ninstance = gp-z3-flip01\nn = 12\nrate_multipliers = 1.25\n",
    "wz": "mode = wz\ninstance = wz-z3-flip01\n",
    "exponent": "mode = exponent\ninstance = binary-exponent-d1\n",
    "quantize": "mode = quantize\ninstance = gauss-rho08\n",
    "verify": "mode = verify\n",
}

_RUNS: dict = {}


def acceptance_run(name):
    """Run each acceptance config once per session; record wall time and output digest."""
    if name not in _RUNS:
        t0 = time.perf_counter()
        res = run(parse_config(CONFIGS[name]))
        _RUNS[name] = (res, time.perf_counter() - t0)
    return _RUNS[name]


def digest(files):
    return hashlib.sha256("".join(k + "\0" + v for k, v in sorted(files.items())).encode()).hexdigest()


def test_criterion_01_exhaustive_lemma_suite():
    t0 = time.perf_counter()
    for n, k, l in ((1, 1, 1), (2, 1, 1)):
        reports = [
            verify_g_uniform(3, n, k, l),
            verify_pairwise_independence(3, n, k, l, "same_m_diff_a"),
            verify_pairwise_independence(3, n, k, l, "diff_m"),
            verify_parity_uniform_independent(3, n, l),
        ]
        for r in reports:
            assert r.verdict is Verdict.EXACT, r.to_text()
    assert time.perf_counter() - t0 < 60


def test_criterion_02_rank_distribution():
    t0 = time.perf_counter()
    for p, n, l in ((3, 2, 1), (3, 2, 2), (5, 2, 1)):
        rep = verify_rank_distribution(p, n, l)
        assert rep.verdict is Verdict.EXACT, rep.to_text()
        counts = [0] * (l + 1)
        for vals in itertools.product(range(p), repeat=n * l):
            counts[rank(np.array(vals).reshape(l, n), p)] += 1
        total = p ** (n * l)
        prod = Fraction(1)
        for i in range(l):
            prod *= Fraction(p**n - p**i, p**n)
        assert Fraction(counts[l], total) == prod == full_rank_probability(p, n, l)
        for i in range(l):
            assert Fraction(counts[i], total) <= rank_bound(p, n, l, i)
    assert time.perf_counter() - t0 < 120


def test_criterion_03_lattice_definition_equivalence():
    rng = np.random.default_rng(2024)
    checked = 0
    for c in range(100):
        p = (3, 5)[c % 2]
        n = 1 + (c // 2) % 3
        l = int(rng.integers(0, n + 1))  # noqa: E741
        k = int(rng.integers(0, n - l + 1))
        lat = LatticeParams(1.0, p)
        code = sample_parity_code(n, k, l, p, rng)
        outer = list(code.outer())

        def member(v, code=code):
            return parity_membership(code, v) is not Membership.NEITHER

        half = math.floor(1.5 * p)
        for x in itertools.product(range(-half, half + 1), repeat=n):
            x = np.array(x, dtype=float)
            assert mod_lattice_member(lat, member, x) == union_of_shifts_member(lat, outer, x)
            checked += 1
    assert checked > 5 * 10**4


def test_criterion_04_prokhorov_properties():
    t0 = time.perf_counter()
    d0 = FiniteMeasure.dirac([0.0])
    assert abs(prokhorov_distance(d0, d0) - 0.0) <= 1e-6
    assert abs(prokhorov_distance(d0, FiniteMeasure.dirac([0.3])) - 0.3) <= 1e-6
    assert abs(prokhorov_distance(d0, FiniteMeasure([[0.0], [5.0]], [0.5, 0.5])) - 0.5) <= 1e-6
    rng = np.random.default_rng(7)

    def rand():
        k = int(rng.integers(1, 6))
        pts = np.unique(np.round(rng.normal(size=(k, 2)) * 0.4, 3), axis=0)
        return FiniteMeasure(pts, rng.dirichlet(np.ones(len(pts))))

    for _ in range(200):
        P, Q, R = rand(), rand(), rand()
        pq, qp = prokhorov_distance(P, Q), prokhorov_distance(Q, P)
        assert pq == qp
        assert prokhorov_distance(P, R) <= pq + prokhorov_distance(Q, R) + 1e-9
        assert pq <= total_variation(P, Q) + 1e-12
    assert time.perf_counter() - t0 < 30


def _random_channel(rng):
    p = int(rng.choice([3, 5]))
    ns, nx, ny = (int(v) for v in rng.integers(1, 4, 3))
    return ChannelSpec(LatticeParams(float(rng.choice([0.5, 1.0, 2.0])), p), np.arange(ns, dtype=float),
                       rng.dirichlet(np.ones(ns)), rng.dirichlet(np.ones(p), ns), np.arange(nx) * 0.7,
                       rng.dirichlet(np.ones(nx), (p, ns)), np.arange(ny) * 0.3, rng.dirichlet(np.ones(ny), (nx, ns)))


def _random_source(rng):
    p = int(rng.choice([3, 5]))
    nx, ns = (int(v) for v in rng.integers(2, 5, 2))
    lat = LatticeParams(float(rng.choice([0.5, 1.0])), p)
    return SourceSpec(lat, np.arange(nx, dtype=float), np.arange(ns) * 0.5,
                      rng.dirichlet(np.ones(nx * ns)).reshape(nx, ns), rng.dirichlet(np.ones(p), nx),
                      lambda s, u: u)


def test_criterion_05_divergence_mi_identities():
    rng = np.random.default_rng(5)
    for _ in range(50):
        spec = _random_channel(rng)
        r = gp_rate_thresholds(spec.measure_suy(), spec.lattice)
        assert abs(r.rate - r.rate_mi) <= 1e-9
        src = _random_source(rng)
        w = wz_rate_thresholds(src.measure_xsu(), src.lattice)
        assert abs(w.rate - w.rate_mi) <= 1e-9


def test_criterion_06_typicality_exponent():
    res, elapsed = acceptance_run("exponent")
    rows = {r["n"]: r for r in res.report.rows}
    assert sorted(rows) == [8, 12, 16, 20]
    assert all(r["samples"] == 10**7 for r in rows.values())
    assert 0.8 <= rows[20]["exponent"] <= 1.2
    assert elapsed < 600
    gaps = [abs(rows[n]["exponent"] - 1.0) for n in (8, 12, 16, 20)]
    assert all(b <= a for a, b in zip(gaps, gaps[1:])), f"|exponent - 1| by n: {gaps}"


def test_criterion_07_gp_end_to_end_trend():
    res, t1 = acceptance_run("gp")
    rows = res.report.rows
    assert [r["n"] for r in rows] == [6, 9, 12] and all(r["trials"] == 2000 for r in rows)
    err = [r["decode_error_rate"] for r in rows]
    assert err[0] > err[1] > err[2], err
    above, t2 = acceptance_run("gp_above")
    (row,) = above.report.rows
    th = above.report.thresholds
    assert (row["k"] + row["l"]) / 12 * math.log2(3) > th["dec_bound"]
    assert row["decode_error_rate"] > 0.5
    assert t1 + t2 < 900


def test_criterion_08_wz_end_to_end():
    res, elapsed = acceptance_run("wz")
    rows = res.report.rows
    th = res.report.thresholds
    lp = math.log2(3)
    for r in rows:
        n = r["n"]
        assert r["l"] / n * lp < th["enc_bound"]
        assert (r["k"] + r["l"]) / n * lp > th["dec_bound"]
    succ = [r["joint_success_rate"] for r in rows]
    assert succ[0] < succ[1] < succ[2], succ
    spec = get_instance("wz-z3-flip01")
    analytic = float(np.sum(spec.joint * (spec.x_letters[:, None, None]
                                          - spec.f(spec.s_letters[:, None], spec.lattice.alphabet()[None, :])[None]) ** 2))
    assert rows[2]["analytic_distortion"] == pytest.approx(analytic, abs=1e-12)
    assert rows[2]["mean_distortion"] <= 1.2 * analytic
    assert elapsed < 900


def test_criterion_09_quantization_convergence():
    res, elapsed = acceptance_run("quantize")
    report, clip = res.report
    mis = [r["mi_bits"] for r in report.rows]
    assert all(b >= a - 1e-9 for a, b in zip(mis, mis[1:]))
    last = report.rows[-1]
    assert last["gamma"] == 2.0**-6 and last["p"] >= 257
    target = -0.5 * math.log2(1 - 0.8**2)
    assert abs(last["mi_bits"] - target) <= 0.05
    assert clip[-1][0] == 8.0 and clip[-1][2] < 0.01
    assert elapsed < 300


def test_criterion_10_reproducibility():
    for name in CONFIGS:
        first, _ = acceptance_run(name)
        again = run(parse_config(CONFIGS[name]))
        csvs = {k: v for k, v in first.files.items() if k.endswith(".csv")}
        assert csvs, name
        assert digest(csvs) == digest({k: again.files[k] for k in csvs}), name
        assert digest(first.files) == digest(again.files), name
