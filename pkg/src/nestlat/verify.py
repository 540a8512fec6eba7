"""Exhaustive and Monte Carlo checks of the code-ensemble lemmas.

Exhaustive checks enumerate every parameter draw of an ensemble and compare
occurrence counts with exact rational expectations; a single discrepancy is a
failure. Enumeration is chunked and can be spread over worker processes, with
counters merged by summation.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .codes import sample_generator_code
from .gp import ChannelSpec
from .measures import FiniteMeasure, PairTypicality, is_typical, kl_divergence
from .tables import letter_index
from .zp import check_modulus, lex_tuples

__all__ = [
    "Verdict",
    "LemmaReport",
    "InstanceTooLarge",
    "ENUMERATION_LIMIT",
    "batch_rank",
    "verify_g_uniform",
    "verify_pairwise_independence",
    "verify_parity_uniform_independent",
    "verify_rank_distribution",
    "rank_bound",
    "full_rank_probability",
    "ExponentRow",
    "estimate_typicality_exponent",
    "typical_y_source",
    "wilson_interval",
    "SecondMomentReport",
    "second_moment_report",
]

ENUMERATION_LIMIT = 10**7
CHUNK = 1 << 16


class InstanceTooLarge(ValueError):
    pass


class Verdict(str, enum.Enum):
    EXACT = "exact-match"
    WITHIN = "within-tolerance"
    FAIL = "fail"


@dataclass
class LemmaReport:
    lemma: str
    params: dict
    expected: object
    observed: object
    verdict: Verdict
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict is not Verdict.FAIL

    def to_text(self) -> str:
        ps = " ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.lemma} [{ps}] {self.verdict.value}: expected {self.expected}, observed {self.observed}" + (
            f" ({self.detail})" if self.detail else "")

    CSV_FIELDS = ("lemma", "params", "expected", "observed", "verdict")

    def row(self) -> list:
        ps = ";".join(f"{k}={v}" for k, v in self.params.items())
        return [self.lemma, ps, str(self.expected), str(self.observed), self.verdict.value]


def _budget(count: int, what: str) -> None:
    if count > ENUMERATION_LIMIT:
        raise InstanceTooLarge(f"{what}: {count} configurations exceed the budget of {ENUMERATION_LIMIT}")


def _digits(start: int, stop: int, ndigits: int, p: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    powers = p ** np.arange(ndigits - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % p


def _chunks(total: int) -> list[tuple[int, int]]:
    return [(s, min(total, s + CHUNK)) for s in range(0, total, CHUNK)]


def _map_sum(fn: Callable, args: Iterable[tuple], workers: int):
    """Sum fn(*a) over args, in order, optionally across processes."""
    args = list(args)
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, *zip(*args)))
    else:
        parts = [fn(*a) for a in args]
    out = parts[0]
    for part in parts[1:]:
        out = out + part
    return out


def _point_index(words: np.ndarray, p: int) -> np.ndarray:
    n = words.shape[-1]
    return words @ (p ** np.arange(n - 1, -1, -1, dtype=np.int64))


# -- generator ensemble ---------------------------------------------------------------


def _gen_counts(start, stop, p, n, rows, coeffs, pairs):
    """Occurrence counts for points (or point pairs) over a chunk of (G, dG, B) draws."""
    theta = _digits(start, stop, rows * n, p).reshape(-1, rows, n)
    pn = p**n
    if pairs is None:
        out = np.zeros((coeffs.shape[0], pn), dtype=np.int64)
        for i, c in enumerate(coeffs):
            u = np.einsum("r,drn->dn", c, theta) % p
            out[i] = np.bincount(_point_index(u, p), minlength=pn)
        return out
    out = np.zeros((len(pairs), pn * pn), dtype=np.int64)
    for i, (c1, c2) in enumerate(pairs):
        u1 = _point_index(np.einsum("r,drn->dn", c1, theta) % p, p)
        u2 = _point_index(np.einsum("r,drn->dn", c2, theta) % p, p)
        out[i] = np.bincount(u1 * pn + u2, minlength=pn * pn)
    return out


def _coefficient(a, m, dither: bool) -> np.ndarray:
    return np.concatenate([a, m, [1] if dither else []]).astype(np.int64)


def verify_g_uniform(p: int, n: int, k: int, l: int, dither: bool = True, workers: int = 1) -> LemmaReport:  # noqa: E741
    """Every g(a, m) = aG + m dG + B is uniform on Z_p^n over the full ensemble.

    With ``dither=False`` the ensemble fixes B = 0, which breaks uniformity at a = 0, m = 0.
    """
    p = check_modulus(p)
    rows = l + k + (1 if dither else 0)
    total = p ** (n * rows)
    coeffs = np.array([_coefficient(am[:l], am[l:], dither) for am in lex_tuples(l + k, p)]).reshape(-1, rows)
    _budget(total, "verify_g_uniform")
    counts = _map_sum(_gen_counts, [(s, e, p, n, rows, coeffs, None) for s, e in _chunks(total)], workers)
    expected = Fraction(total, p**n)
    bad = int(np.count_nonzero(counts != expected)) if expected.denominator == 1 else counts.size
    observed = sorted(set(counts.ravel().tolist()))
    return LemmaReport(
        "g_uniform", dict(p=p, n=n, k=k, l=l, dither=dither, draws=total),
        int(expected) if expected.denominator == 1 else expected, observed,
        Verdict.EXACT if bad == 0 else Verdict.FAIL,
        "" if bad == 0 else f"{bad} (a,m,u) counts differ",
    )


def _pair_list(p, k, l, case):  # noqa: E741
    am = lex_tuples(l + k, p)
    out = []
    for x in am:
        for y in am:
            a, m, b, mm = x[:l], x[l:], y[:l], y[l:]
            same_m = np.array_equal(m, mm)
            same_a = np.array_equal(a, b)
            if case == "same_m_diff_a" and same_m and not same_a:
                out.append((x, y))
            elif case == "diff_m" and not same_m:
                out.append((x, y))
            elif case == "identical" and same_m and same_a:
                out.append((x, y))
    return out


def verify_pairwise_independence(p: int, n: int, k: int, l: int, case: str = "same_m_diff_a",  # noqa: E741
                                 workers: int = 1) -> LemmaReport:
    """Joint counts of (g(a,m), g(ã,m̃)) over the full ensemble are flat on S' x S'.

    Cases: ``same_m_diff_a`` (m = m̃, a != ã), ``diff_m`` (m != m̃, any a, ã) and
    ``identical`` (a = ã, m = m̃), where the counts sit on the diagonal and the
    verdict is expected to be a failure.
    """
    p = check_modulus(p)
    if case not in ("same_m_diff_a", "diff_m", "identical"):
        raise ValueError(f"unknown case {case!r}")
    rows = l + k + 1
    total = p ** (n * rows)
    raw = _pair_list(p, k, l, case)
    pairs = [(_coefficient(x[:l], x[l:], True), _coefficient(y[:l], y[l:], True)) for x, y in raw]
    _budget(total, "verify_pairwise_independence")
    params = dict(p=p, n=n, k=k, l=l, case=case, pairs=len(pairs), draws=total)
    if not pairs:
        return LemmaReport("pairwise_independence", params, None, None, Verdict.FAIL, "no pairs for this case")
    counts = _map_sum(_gen_counts, [(s, e, p, n, rows, None, pairs) for s, e in _chunks(total)], workers)
    expected = Fraction(total, p ** (2 * n))
    ok = expected.denominator == 1 and bool(np.all(counts == expected))
    return LemmaReport(
        "pairwise_independence", params,
        int(expected) if expected.denominator == 1 else expected, sorted(set(counts.ravel().tolist())),
        Verdict.EXACT if ok else Verdict.FAIL,
    )


# -- parity ensemble ------------------------------------------------------------------


def _parity_counts(start, stop, p, n, l):  # noqa: E741
    """Membership co-occurrence matrix over a chunk of (H, c) draws."""
    hc = _digits(start, stop, n * l + l, p)
    H = hc[:, : n * l].reshape(-1, l, n)
    c = hc[:, n * l:]
    pts = lex_tuples(n, p)
    member = np.all((np.einsum("dln,un->dul", H, pts) % p) == c[:, None, :], axis=2).astype(np.int64)
    return member.T @ member


def verify_parity_uniform_independent(p: int, n: int, l: int, workers: int = 1) -> LemmaReport:  # noqa: E741
    """P(u in outer code) = p^-l for every u and p^-2l for every pair u != ũ, exactly."""
    p = check_modulus(p)
    total = p ** (n * l + l)
    _budget(total, "verify_parity_uniform_independent")
    co = _map_sum(_parity_counts, [(s, e, p, n, l) for s, e in _chunks(total)], workers)
    single = np.diag(co)
    off = co[~np.eye(co.shape[0], dtype=bool)]
    e1, e2 = Fraction(total, p**l), Fraction(total, p ** (2 * l))
    ok = bool(np.all(single == e1) and np.all(off == e2))
    return LemmaReport(
        "parity_uniform_independent", dict(p=p, n=n, l=l, draws=total),
        dict(single=e1, pair=e2), dict(single=sorted(set(single.tolist())), pair=sorted(set(off.tolist()))),
        Verdict.EXACT if ok else Verdict.FAIL,
    )


# -- rank census ----------------------------------------------------------------------


def batch_rank(mats: np.ndarray, p: int) -> np.ndarray:
    """Ranks over Z_p of a stack of matrices, shape (N, r, c)."""
    M = np.array(mats, dtype=np.int64) % p
    N, r, c = M.shape
    inv = np.zeros(p, dtype=np.int64)
    inv[1:] = [pow(int(v), -1, p) for v in range(1, p)]
    cur = np.zeros(N, dtype=np.int64)
    rows = np.arange(r)
    ar = np.arange(N)
    for col in range(c):
        elig = (rows[None, :] >= cur[:, None]) & (M[:, :, col] != 0)
        has = elig.any(axis=1) & (cur < r)
        if not has.any():
            continue
        idx = ar[has]
        piv = elig[idx].argmax(axis=1)
        tgt = cur[idx]
        prow = M[idx, piv].copy()
        M[idx, piv] = M[idx, tgt]
        prow = prow * inv[prow[:, col]][:, None] % p
        M[idx, tgt] = prow
        factors = M[idx, :, col].copy()
        factors[np.arange(idx.size), tgt] = 0
        M[idx] = (M[idx] - factors[:, :, None] * prow[:, None, :]) % p
        cur[idx] += 1
    return cur


def full_rank_probability(p: int, n: int, l: int) -> Fraction:  # noqa: E741
    num = 1
    for i in range(l):
        num *= p**n - p**i
    return Fraction(num, p ** (n * l))


def rank_bound(p: int, n: int, l: int, i: int) -> Fraction:  # noqa: E741
    """Upper bound C(l,i) p^{i(l-i)} / p^{n(l-i)} on P(rank(H) = i)."""
    return Fraction(math.comb(l, i) * p ** (i * (l - i)), p ** (n * (l - i)))


def _rank_counts(start, stop, p, n, l):  # noqa: E741
    H = _digits(start, stop, n * l, p).reshape(-1, l, n)
    return np.bincount(batch_rank(H, p), minlength=l + 1)


def verify_rank_distribution(p: int, n: int, l: int, workers: int = 1) -> LemmaReport:  # noqa: E741
    """Exact rank census over every l x n matrix, against the product formula and the bounds."""
    p = check_modulus(p)
    total = p ** (n * l)
    _budget(total, "verify_rank_distribution")
    if l == 0:
        census = np.array([1], dtype=np.int64)
    else:
        census = _map_sum(_rank_counts, [(s, e, p, n, l) for s, e in _chunks(total)], workers)
    freqs = [Fraction(int(c), total) for c in census]
    full = full_rank_probability(p, n, l)
    problems = []
    if freqs[min(l, len(freqs) - 1)] != full:
        problems.append("full-rank frequency differs from the product formula")
    if 0 < l <= n and full < 1 - Fraction(1, p ** (n - l)):
        problems.append("full-rank lower bound violated")
    for i in range(l):
        if freqs[i] > rank_bound(p, n, l, i):
            problems.append(f"rank {i} frequency above bound")
    return LemmaReport(
        "rank_distribution", dict(p=p, n=n, l=l, draws=total),
        dict(full=full, bounds=[rank_bound(p, n, l, i) for i in range(l)]),
        dict(census=census.tolist(), freqs=freqs),
        Verdict.FAIL if problems else Verdict.EXACT, "; ".join(problems),
    )


# -- typicality exponent --------------------------------------------------------------


def wilson_interval(hits: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    ph = hits / trials
    den = 1 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class ExponentRow:
    n: int
    hits: int
    samples: int
    p_hat: float
    exponent: float  # inf when no hits
    exponent_lo: float  # from the upper end of the Wilson interval
    exponent_hi: float  # from the lower end (inf when that end is 0)
    lower_bound_only: bool


def typical_y_source(P_Y: FiniteMeasure, eps: float, max_tries: int = 100000) -> Callable:
    """y sampler: i.i.d. draws from P_Y, rejected until the sequence is typical."""

    def draw(n: int, rng: np.random.Generator) -> np.ndarray:
        for _ in range(max_tries):
            y = P_Y.sample(n, rng)[:, 0]
            if is_typical(y, P_Y, eps):
                return y
        raise RuntimeError("no typical y sequence found")

    return draw


def _product(P: FiniteMeasure, Q: FiniteMeasure) -> FiniteMeasure:
    pts = np.array([np.concatenate([a, b]) for a in P.points for b in Q.points])
    return FiniteMeasure.from_atoms(pts, np.outer(P.masses, Q.masses).ravel())


def estimate_typicality_exponent(
    P_XY: FiniteMeasure,
    P_Z: FiniteMeasure,
    y_source: Callable | None,
    n_grid: Sequence[int],
    samples: int,
    eps: float,
    seed: int,
    chunk: int = 1 << 19,
) -> tuple[list[ExponentRow], float]:
    """Empirical -(1/n) log2 P((Z^n, y) typical) per n, and the target D(P_XY || P_Z P_Y).

    Z^n is i.i.d. from P_Z. The stream for each n is seeded from (seed, n).
    """
    P_Y = P_XY.marginal(1)
    if y_source is None:
        y_source = typical_y_source(P_Y, eps)
    target = kl_divergence(P_XY, _product(P_Z, P_Y))
    x_letters = np.unique(np.concatenate([P_XY.points[:, 0], P_Z.points[:, 0]]))
    y_letters = np.unique(P_Y.points[:, 0])
    ref = np.zeros((x_letters.size, y_letters.size))
    np.add.at(ref, (letter_index(x_letters, P_XY.points[:, 0]), letter_index(y_letters, P_XY.points[:, 1])),
              P_XY.masses)
    typ = PairTypicality(x_letters, y_letters, ref, eps)
    z_idx = letter_index(x_letters, P_Z.points[:, 0])
    rows = []
    for n in n_grid:
        rng = np.random.default_rng([seed, n])
        y = letter_index(y_letters, y_source(n, rng))
        hits = 0
        done = 0
        while done < samples:
            size = min(chunk, samples - done)
            z = z_idx[rng.choice(P_Z.masses.size, size=(size, n), p=P_Z.masses)]
            hits += int(np.count_nonzero(typ.typical(z, y)))
            done += size
        lo, hi = wilson_interval(hits, samples)
        ph = hits / samples
        exp_ = -math.log2(ph) / n if hits else math.inf
        rows.append(ExponentRow(
            n, hits, samples, ph, exp_,
            -math.log2(hi) / n,
            -math.log2(lo) / n if lo > 0 else math.inf,
            hits == 0,
        ))
    return rows, target


# -- second moment --------------------------------------------------------------------


@dataclass
class SecondMomentReport:
    mean: float
    var: float
    chebyshev: float  # var / mean^2
    p_zero: float
    p_zero_sigma: float
    trials: int
    counts: np.ndarray = field(repr=False, default=None)

    @property
    def holds(self) -> bool:
        """Empirical P(theta = 0) <= var/E^2 + 3 sigma."""
        return self.p_zero <= self.chebyshev + 3 * self.p_zero_sigma


def second_moment_report(spec: ChannelSpec, n: int, k: int, l: int, eps: float,  # noqa: E741
                         trials: int, seed: int) -> SecondMomentReport:
    """theta = number of bin candidates typical with the state, over sampled codes.

    Draw order per trial matches the GP trial: code, message, state.
    """
    typ_us, _ = spec.typicality(eps)
    theta = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        code = sample_generator_code(n, k, l, spec.p, rng)
        m = rng.integers(0, spec.p, size=k, dtype=np.int64)
        s = spec.sample_states(n, rng)
        theta[t] = int(np.count_nonzero(typ_us.typical(code.bin_array(m), letter_index(spec.s_letters, s))))
    mean = float(theta.mean())
    var = float(theta.var())
    p0 = float(np.mean(theta == 0))
    cheb = var / mean**2 if mean > 0 else math.inf
    return SecondMomentReport(mean, var, cheb, p0, math.sqrt(p0 * (1 - p0) / trials), trials, theta)
