"""Channel coding with encoder-side state: nested generator codes plus typicality.

Sequences are handled as letter-index arrays internally. The auxiliary letter
index of a lattice point is exactly its Z_p coordinate, so codewords from the
code ensemble are used directly as Û-letter sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .codes import GeneratorNestedCode, sample_generator_code
from .lattice import LatticeParams, to_lattice_point
from .measures import FiniteMeasure, PairTypicality, kl_divergence, mutual_information
from .tables import check_conditional, letter_index, sample_conditional, sorted_letters
from .zp import as_vector, lex_tuples

__all__ = [
    "ChannelSpec",
    "GPTrialRecord",
    "ThresholdReport",
    "gp_encode",
    "gp_transmit",
    "gp_decode",
    "gp_rate_thresholds",
    "run_gp_trial",
    "uniform_reference",
    "IDENTITY_TOL",
]

IDENTITY_TOL = 1e-9


def zero_cost(x, s):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(s)).shape)


@dataclass(eq=False)
class ChannelSpec:
    """Finite channel with state.

    Tables: p_s[s], p_u_given_s[s, u], w_x_given_us[u, s, x], w_y_given_xs[x, s, y].
    ``cost(x, s)`` must accept arrays of letter values.
    """

    lattice: LatticeParams
    s_letters: np.ndarray
    p_s: np.ndarray
    p_u_given_s: np.ndarray
    x_letters: np.ndarray
    w_x_given_us: np.ndarray
    y_letters: np.ndarray
    w_y_given_xs: np.ndarray
    cost: Callable = zero_cost
    budget: float = math.inf
    name: str = ""

    def __post_init__(self):
        self.s_letters = sorted_letters(self.s_letters)
        self.x_letters = sorted_letters(self.x_letters)
        self.y_letters = sorted_letters(self.y_letters)
        ns, p = self.s_letters.size, self.lattice.p
        nx, ny = self.x_letters.size, self.y_letters.size
        self.p_s = check_conditional(self.p_s, "P_S")
        self.p_u_given_s = check_conditional(self.p_u_given_s, "P_U|S")
        self.w_x_given_us = check_conditional(self.w_x_given_us, "W_X|US")
        self.w_y_given_xs = check_conditional(self.w_y_given_xs, "W_Y|XS")
        shapes = {
            "P_S": (self.p_s.shape, (ns,)),
            "P_U|S": (self.p_u_given_s.shape, (ns, p)),
            "W_X|US": (self.w_x_given_us.shape, (p, ns, nx)),
            "W_Y|XS": (self.w_y_given_xs.shape, (nx, ns, ny)),
        }
        for nm, (got, want) in shapes.items():
            if got != want:
                raise ValueError(f"{nm} has shape {got}, expected {want}")
        if self.expected_cost() > self.budget + 1e-12:
            raise ValueError("expected cost exceeds the budget")

    @property
    def p(self) -> int:
        return self.lattice.p

    @cached_property
    def joint(self) -> np.ndarray:
        """P[s, u, x, y]."""
        psu = self.p_s[:, None] * self.p_u_given_s
        psux = psu[:, :, None] * self.w_x_given_us.transpose(1, 0, 2)
        return psux[:, :, :, None] * self.w_y_given_xs.transpose(1, 0, 2)[:, None, :, :]

    def p_us(self) -> np.ndarray:
        return self.joint.sum(axis=(2, 3)).T

    def p_uy(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 2))

    def expected_cost(self) -> float:
        pxs = self.joint.sum(axis=(1, 3))  # [s, x]
        w = self.cost(self.x_letters[None, :], self.s_letters[:, None])
        return float(np.sum(pxs * w))

    def measure_suy(self) -> FiniteMeasure:
        """Joint law of (S, Û, Y) as a finite measure in letter values."""
        psuy = self.joint.sum(axis=2)
        s, u, y = np.meshgrid(self.s_letters, self.lattice.alphabet(), self.y_letters, indexing="ij")
        pts = np.column_stack([s.ravel(), u.ravel(), y.ravel()])
        return FiniteMeasure.from_atoms(pts, psuy.ravel())

    def typicality(self, eps: float) -> tuple[PairTypicality, PairTypicality]:
        """(Û,S) and (Û,Y) typicality testers, cached per eps."""
        cache = self.__dict__.setdefault("_typ_cache", {})
        if eps not in cache:
            u = self.lattice.alphabet()
            cache[eps] = (
                PairTypicality(u, self.s_letters, self.p_us(), eps),
                PairTypicality(u, self.y_letters, self.p_uy(), eps),
            )
        return cache[eps]

    def sample_states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.s_letters[sample_conditional(self.p_s[None, :], np.zeros(n, dtype=np.int64), rng)]


@dataclass
class GPTrialRecord:
    trial: int
    n: int
    k: int
    l: int  # noqa: E741
    p: int
    gamma: float
    eps: float
    encoder_found: bool
    decoded_ok: bool
    block_cost: float
    stacked_rank: int
    seed: int = 0

    def __post_init__(self):
        if self.decoded_ok and not self.encoder_found:
            raise ValueError("decoded_ok requires encoder_found")

    CSV_FIELDS = ("trial", "n", "k", "l", "p", "gamma", "eps", "encoder_found", "decoded_ok", "block_cost", "stacked_rank")

    def row(self) -> list:
        return [self.trial, self.n, self.k, self.l, self.p, repr(self.gamma), repr(self.eps),
                int(self.encoder_found), int(self.decoded_ok), repr(float(self.block_cost)), self.stacked_rank]


def _check_shared(spec: ChannelSpec, code: GeneratorNestedCode) -> None:
    if code.p != spec.p:
        raise ValueError("code and channel disagree on p")


def gp_encode(spec: ChannelSpec, code: GeneratorNestedCode, m, s, eps: float) -> np.ndarray | None:
    """First u = g(a, m) over a in lexicographic order that is jointly typical with s."""
    _check_shared(spec, code)
    s = np.asarray(s, dtype=float)
    if s.size != code.n:
        raise ValueError("state length must equal n")
    typ_us, _ = spec.typicality(eps)
    cands = code.bin_array(as_vector(m, code.p))
    hit = np.flatnonzero(typ_us.typical(cands, letter_index(spec.s_letters, s)))
    if hit.size == 0:
        return None
    return to_lattice_point(spec.lattice, cands[hit[0]])


def gp_transmit(spec: ChannelSpec, u, s, rng: np.random.Generator):
    """Per-letter x ~ W(.|u,s), y ~ W(.|x,s); returns (x, y, mean cost)."""
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    if u.shape != s.shape:
        raise ValueError("u and s must have equal length")
    ui = letter_index(spec.lattice.alphabet(), u)
    si = letter_index(spec.s_letters, s)
    xi = sample_conditional(spec.w_x_given_us, (ui, si), rng)
    yi = sample_conditional(spec.w_y_given_xs, (xi, si), rng)
    x, y = spec.x_letters[xi], spec.y_letters[yi]
    cost = float(np.mean(spec.cost(x, s))) if x.size else 0.0
    return x, y, cost


def gp_decode(spec: ChannelSpec, code: GeneratorNestedCode, y, eps: float) -> np.ndarray | None:
    """The unique bin index m holding a codeword jointly typical with y, else None."""
    _check_shared(spec, code)
    _, typ_uy = spec.typicality(eps)
    y_idx = letter_index(spec.y_letters, np.asarray(y, dtype=float))
    cands = code.outer_array()  # m-major, a-minor
    hits = np.flatnonzero(typ_uy.typical(cands, y_idx))
    bins = np.unique(hits // code.p**code.l)
    if bins.size != 1:
        return None
    return lex_tuples(code.k, code.p)[bins[0]]


def uniform_reference(lattice: LatticeParams) -> FiniteMeasure:
    return FiniteMeasure(lattice.alphabet()[:, None], np.full(lattice.p, 1.0 / lattice.p))


def _product(P: FiniteMeasure, Q: FiniteMeasure) -> FiniteMeasure:
    pts = np.array([np.concatenate([a, b]) for a in P.points for b in Q.points])
    return FiniteMeasure.from_atoms(pts, np.outer(P.masses, Q.masses).ravel())


@dataclass(frozen=True)
class ThresholdReport:
    enc_bound: float
    dec_bound: float
    rate: float
    rate_mi: float


def _divergence_vs_uniform(P_UV: FiniteMeasure, lattice: LatticeParams) -> float:
    return kl_divergence(P_UV, _product(uniform_reference(lattice), P_UV.marginal(1)))


def gp_rate_thresholds(P_SUY: FiniteMeasure, lattice: LatticeParams) -> ThresholdReport:
    """Encoder/decoder rate thresholds in bits per symbol, coordinates ordered (S, Û, Y).

    enc = D(P_ÛS || P_Z P_S), dec = D(P_ÛY || P_Z P_Y), rate = dec - enc, which
    must match I(Û;Y) - I(Û;S).
    """
    P_US = P_SUY.marginal([1, 0])
    P_UY = P_SUY.marginal([1, 2])
    enc = _divergence_vs_uniform(P_US, lattice)
    dec = _divergence_vs_uniform(P_UY, lattice)
    rate = dec - enc
    rate_mi = mutual_information(P_UY) - mutual_information(P_US)
    if math.isfinite(rate) and abs(rate - rate_mi) > IDENTITY_TOL:
        raise ArithmeticError(f"divergence and MI rates disagree: {rate} vs {rate_mi}")
    return ThresholdReport(enc, dec, rate, rate_mi)


def run_gp_trial(spec: ChannelSpec, n: int, k: int, l: int, eps: float, rng: np.random.Generator,  # noqa: E741
                 trial: int = 0, seed: int = 0) -> GPTrialRecord:
    """One end-to-end trial. Draw order: code, message, state, then channel randomness."""
    code = sample_generator_code(n, k, l, spec.p, rng)
    m = rng.integers(0, spec.p, size=k, dtype=np.int64)
    s = spec.sample_states(n, rng)
    rec = dict(trial=trial, n=n, k=k, l=l, p=spec.p, gamma=spec.lattice.gamma, eps=eps,
               stacked_rank=code.stacked_rank(), seed=seed)
    u = gp_encode(spec, code, m, s, eps)
    if u is None:
        return GPTrialRecord(encoder_found=False, decoded_ok=False, block_cost=math.nan, **rec)
    _, y, cost = gp_transmit(spec, u, s, rng)
    m_hat = gp_decode(spec, code, y, eps)
    ok = m_hat is not None and np.array_equal(m_hat, m)
    return GPTrialRecord(encoder_found=True, decoded_ok=bool(ok), block_cost=cost, **rec)

