import itertools
import math

import numpy as np
import pytest

from nestlat.codes import ParityNestedCode, sample_parity_code
from nestlat.instances import wz_z3_flip01
from nestlat.lattice import LatticeParams
from nestlat.measures import PairTypicality, is_jointly_typical
from nestlat.wz import (
    SourceSpec,
    WZTrialRecord,
    block_distortion,
    run_wz_trial,
    squared_error,
    wz_decode,
    wz_encode,
    wz_rate_thresholds,
)
from nestlat.zp import ZpMatrix, ZpVector, lex_tuples

LAT = LatticeParams(1.0, 3)
A = LAT.alphabet()


def copy_source(p_xs, name="copy"):
    """Û = X exactly, reconstruct with u."""
    return SourceSpec(LAT, A, A, p_xs, np.eye(3), lambda s, u: u, name=name)


def test_block_distortion_examples():
    x = np.array([0.0, 1.0, -1.0, 0.0])
    assert block_distortion(x, x) == 0.0
    assert block_distortion(x, x + 1) == 1.0
    assert block_distortion(x, x + np.array([1, 0, 1, 0])) == 0.5
    with pytest.raises(ValueError):
        block_distortion(x, x[:3])


def test_joint_is_markov_through_x():
    spec = wz_z3_flip01()
    P = spec.joint  # [x, s, u]
    px_s = P.sum(axis=2, keepdims=True)
    cond = P / px_s
    # P(u | x, s) does not depend on s
    assert np.allclose(cond, cond[:, :1, :])
    assert P.sum() == pytest.approx(1.0)


def test_reference_instance_distortion_target():
    spec = wz_z3_flip01()
    assert spec.target == pytest.approx(0.14572044647387114, abs=1e-12)
    # the MMSE table beats reconstructing with u alone
    alt = SourceSpec(spec.lattice, A, A, spec.p_xs, spec.w_u_given_x, lambda s, u: u)
    assert spec.expected_distortion() < alt.expected_distortion()


def test_thresholds_trivial_cases():
    indep = copy_source(np.full((3, 3), 1 / 9))
    r = wz_rate_thresholds(indep.measure_xsu(), LAT)
    assert r.rate == pytest.approx(math.log2(3))
    perfect = copy_source(np.eye(3) / 3)
    assert wz_rate_thresholds(perfect.measure_xsu(), LAT).rate == pytest.approx(0.0, abs=1e-12)
    ref = wz_z3_flip01()
    r = wz_rate_thresholds(ref.measure_xsu(), ref.lattice)
    assert abs(r.rate - r.rate_mi) <= 1e-9
    assert r.enc_bound == pytest.approx(math.log2(3) - r.rate - (math.log2(3) - r.dec_bound), abs=1e-12)


def test_encoder_enumeration_size_and_forced_candidate():
    spec = copy_source(np.eye(3) / 3)
    rng = np.random.default_rng(0)
    for _ in range(10):
        code = sample_parity_code(5, 1, 2, 3, rng)
        if code.rank_H() == 2:
            assert code.outer_array().shape[0] == 3**3
    # single forced candidate: x itself is the only outer word when H is the identity
    code = ParityNestedCode(ZpMatrix(np.eye(3, dtype=int), 3), ZpMatrix([[1, 1, 1]], 3), ZpVector([2, 0, 1], 3), ZpVector([0], 3))
    x = A[[2, 0, 1]]
    assert wz_encode(spec, code, x, 0.9).tolist() == [0]
    assert wz_encode(spec, code, A[[0, 0, 1]], 0.3) is None


def test_decoder_empty_bin_and_ambiguity():
    spec = copy_source(np.eye(3) / 3)
    # dH = H makes bin 1 inconsistent with c = 0
    code = ParityNestedCode(ZpMatrix([[1, 1, 0]], 3), ZpMatrix([[1, 1, 0]], 3), ZpVector([0], 3), ZpVector([0], 3))
    assert wz_decode(spec, code, [1], A[[0, 0, 0]], 0.5) is None
    assert wz_decode(spec, code, [0], A[[0, 0, 0]], 1.0) is None


def test_end_to_end_exact_recovery():
    spec = copy_source(np.eye(3) / 3)
    rng = np.random.default_rng(3)
    good = 0
    for _ in range(50):
        code = sample_parity_code(6, 2, 2, 3, rng)
        x = A[rng.integers(0, 3, 6)]
        m = wz_encode(spec, code, x, 0.4)
        if m is None:
            continue
        out = wz_decode(spec, code, m, x, 0.4)
        if out is not None:
            u, xhat = out
            assert np.array_equal(xhat, u)
            good += 1
    assert good >= 5


def test_encoder_agrees_with_scalar_typicality():
    spec = wz_z3_flip01()
    rng = np.random.default_rng(8)
    P_UX = spec.measure_xsu().marginal([2, 0])
    for _ in range(15):
        code = sample_parity_code(5, 1, 2, 3, rng)
        x, _ = spec.sample_source(5, rng)
        m = wz_encode(spec, code, x, 0.35)
        first = next((r for r in code.outer_array() if is_jointly_typical(A[r], x, P_UX, 0.35)), None)
        assert (m is None) == (first is None)
        if first is not None:
            assert m.tolist() == (code.dH.entries @ first % 3).tolist()


def test_rank_statistics_match_formula():
    p, n, l = 3, 4, 2
    full = (1 - p ** -n) * (1 - p ** (1 - n))
    rng = np.random.default_rng(21)
    N = 4000
    ranks = [sample_parity_code(n, 0, l, p, rng).rank_H() for _ in range(N)]
    freq = np.mean(np.array(ranks) == l)
    assert abs(freq - full) <= 3 * math.sqrt(full * (1 - full) / N)


def test_trial_record_rules():
    spec = wz_z3_flip01()
    a = run_wz_trial(spec, 6, 1, 2, 0.3, np.random.default_rng([1, 0]))
    b = run_wz_trial(spec, 6, 1, 2, 0.3, np.random.default_rng([1, 0]))
    assert a == b and len(a.row()) == len(WZTrialRecord.CSV_FIELDS)
    with pytest.raises(ValueError):
        WZTrialRecord(0, 1, 0, 0, 3, 1.0, 0.1, True, True, math.nan, 0)
    with pytest.raises(ValueError):
        WZTrialRecord(0, 1, 0, 0, 3, 1.0, 0.1, True, False, 0.5, 0)


# Encoder success with Û = X, n=9, l=3, eps=0.25, 500 trials seeded default_rng([0, t]).
FROZEN_WZ_ENCODER_SUCCESS = 0.792


def test_encoder_success_copy_channel():
    ref = wz_z3_flip01()
    spec = copy_source(ref.p_xs)
    hits = 0
    for t in range(500):
        rng = np.random.default_rng([0, t])
        code = sample_parity_code(9, 0, 3, 3, rng)
        x, _ = spec.sample_source(9, rng)
        hits += wz_encode(spec, code, x, 0.25) is not None
    rate = hits / 500
    assert rate == FROZEN_WZ_ENCODER_SUCCESS
    # upper bound for any code: probability that x^n admits some typical u^n
    typ = PairTypicality(A, A, np.eye(3) / 3, 0.25)
    U = lex_tuples(9, 3)
    bound = 0.0
    for comp in itertools.product(range(10), repeat=2):
        i, j = comp
        k = 9 - i - j
        if k < 0:
            continue
        if typ.typical(U, np.array([0] * i + [1] * j + [2] * k)).any():
            bound += math.factorial(9) / (math.factorial(i) * math.factorial(j) * math.factorial(k)) / 3**9
    assert bound == pytest.approx(0.8343240359701268, abs=1e-12)
    assert rate <= bound + 3 * math.sqrt(bound * (1 - bound) / 500)
