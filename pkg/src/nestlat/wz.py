"""Source coding with decoder side information: parity-check nested codes plus typicality."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .codes import ParityNestedCode, sample_parity_code
from .gp import IDENTITY_TOL, ThresholdReport, _divergence_vs_uniform
from .lattice import LatticeParams, to_lattice_point
from .measures import FiniteMeasure, PairTypicality, mutual_information
from .tables import check_conditional, letter_index, sample_conditional, sorted_letters
from .zp import ZpVector

__all__ = [
    "SourceSpec",
    "WZTrialRecord",
    "wz_encode",
    "wz_decode",
    "block_distortion",
    "wz_rate_thresholds",
    "run_wz_trial",
    "squared_error",
]


def squared_error(x, xhat):
    return (np.asarray(x, dtype=float) - np.asarray(xhat, dtype=float)) ** 2


@dataclass(eq=False)
class SourceSpec:
    """Finite source with side information.

    Tables: p_xs[x, s] (joint), w_u_given_x[x, u] onto the lattice alphabet.
    ``f(s, u)`` and ``d(x, xhat)`` act elementwise on letter values.
    """

    lattice: LatticeParams
    x_letters: np.ndarray
    s_letters: np.ndarray
    p_xs: np.ndarray
    w_u_given_x: np.ndarray
    f: Callable
    d: Callable = squared_error
    target: float = math.inf
    name: str = ""

    def __post_init__(self):
        self.x_letters = sorted_letters(self.x_letters)
        self.s_letters = sorted_letters(self.s_letters)
        self.p_xs = np.asarray(self.p_xs, dtype=float)
        if self.p_xs.shape != (self.x_letters.size, self.s_letters.size):
            raise ValueError("P_XS shape must be (|X|, |S|)")
        check_conditional(self.p_xs.ravel(), "P_XS")
        self.w_u_given_x = check_conditional(self.w_u_given_x, "W_U|X")
        if self.w_u_given_x.shape != (self.x_letters.size, self.p):
            raise ValueError("W_U|X shape must be (|X|, p)")
        if self.expected_distortion() > self.target + 1e-12:
            raise ValueError("expected distortion exceeds the target")

    @property
    def p(self) -> int:
        return self.lattice.p

    @cached_property
    def joint(self) -> np.ndarray:
        """P[x, s, u] = P_XS(x, s) W(u | x)."""
        return self.p_xs[:, :, None] * self.w_u_given_x[:, None, :]

    def p_ux(self) -> np.ndarray:
        return self.joint.sum(axis=1).T

    def p_us(self) -> np.ndarray:
        return self.joint.sum(axis=0).T

    def expected_distortion(self) -> float:
        u = self.lattice.alphabet()
        xhat = self.f(self.s_letters[:, None], u[None, :])  # [s, u]
        dist = self.d(self.x_letters[:, None, None], xhat[None, :, :])
        return float(np.sum(self.joint * dist))

    def measure_xsu(self) -> FiniteMeasure:
        x, s, u = np.meshgrid(self.x_letters, self.s_letters, self.lattice.alphabet(), indexing="ij")
        return FiniteMeasure.from_atoms(np.column_stack([x.ravel(), s.ravel(), u.ravel()]), self.joint.ravel())

    def typicality(self, eps: float) -> tuple[PairTypicality, PairTypicality]:
        """(Û,X) and (Û,S) typicality testers, cached per eps."""
        cache = self.__dict__.setdefault("_typ_cache", {})
        if eps not in cache:
            u = self.lattice.alphabet()
            cache[eps] = (
                PairTypicality(u, self.x_letters, self.p_ux(), eps),
                PairTypicality(u, self.s_letters, self.p_us(), eps),
            )
        return cache[eps]

    def sample_source(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        flat = sample_conditional(self.p_xs.reshape(1, -1), np.zeros(n, dtype=np.int64), rng)
        xi, si = np.divmod(flat, self.s_letters.size)
        return self.x_letters[xi], self.s_letters[si]


@dataclass
class WZTrialRecord:
    trial: int
    n: int
    k: int
    l: int  # noqa: E741
    p: int
    gamma: float
    eps: float
    encoder_found: bool
    decoder_unique: bool
    block_distortion: float
    rank_H: int
    seed: int = 0

    def __post_init__(self):
        has = not math.isnan(self.block_distortion)
        if has != (self.encoder_found and self.decoder_unique):
            raise ValueError("block_distortion is present exactly when both flags hold")

    CSV_FIELDS = ("trial", "n", "k", "l", "p", "gamma", "eps", "encoder_found", "decoder_unique", "block_distortion", "rank_H")

    def row(self) -> list:
        return [self.trial, self.n, self.k, self.l, self.p, repr(self.gamma), repr(self.eps),
                int(self.encoder_found), int(self.decoder_unique), repr(float(self.block_distortion)), self.rank_H]


def _check_shared(spec: SourceSpec, code: ParityNestedCode) -> None:
    if code.p != spec.p:
        raise ValueError("code and source disagree on p")


def _encode_word(spec: SourceSpec, code: ParityNestedCode, x, eps: float) -> np.ndarray | None:
    typ_ux, _ = spec.typicality(eps)
    x = np.asarray(x, dtype=float)
    if x.size != code.n:
        raise ValueError("source length must equal n")
    cands = code.outer_array()
    if cands.shape[0] == 0:
        return None
    hit = np.flatnonzero(typ_ux.typical(cands, letter_index(spec.x_letters, x)))
    return cands[hit[0]] if hit.size else None


def wz_encode(spec: SourceSpec, code: ParityNestedCode, x, eps: float) -> ZpVector | None:
    """Bin index dH u of the first outer codeword u (solver order) typical with x."""
    _check_shared(spec, code)
    u = _encode_word(spec, code, x, eps)
    if u is None:
        return None
    return code.dH.matvec(ZpVector(u, code.p)) if code.k else ZpVector.zeros(0, code.p)


def wz_decode(spec: SourceSpec, code: ParityNestedCode, m, s, eps: float):
    """(u, xhat) for the unique bin-m candidate typical with s, else None."""
    _check_shared(spec, code)
    _, typ_us = spec.typicality(eps)
    s = np.asarray(s, dtype=float)
    cands = code.bin_array(m)
    if cands.shape[0] == 0:
        return None
    hits = np.flatnonzero(typ_us.typical(cands, letter_index(spec.s_letters, s)))
    if hits.size != 1:
        return None
    u = to_lattice_point(spec.lattice, cands[hits[0]])
    return u, spec.f(s, u)


def block_distortion(x, xhat, d: Callable = squared_error) -> float:
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.shape != xhat.shape:
        raise ValueError("length mismatch")
    return float(np.mean(d(x, xhat)))


def wz_rate_thresholds(P_XSU: FiniteMeasure, lattice: LatticeParams) -> ThresholdReport:
    """Thresholds in bits per symbol, coordinates ordered (X, S, Û).

    enc = log p - D(P_ÛX || P_Z P_X) bounds l/n log p from above, dec =
    log p - D(P_ÛS || P_Z P_S) bounds (k+l)/n log p from below; the rate
    D_X - D_S must match I(X;Û) - I(S;Û).
    """
    logp = math.log2(lattice.p)
    d_x = _divergence_vs_uniform(P_XSU.marginal([2, 0]), lattice)
    d_s = _divergence_vs_uniform(P_XSU.marginal([2, 1]), lattice)
    rate = d_x - d_s
    rate_mi = mutual_information(P_XSU.marginal([0, 2])) - mutual_information(P_XSU.marginal([1, 2]))
    if math.isfinite(rate) and abs(rate - rate_mi) > IDENTITY_TOL:
        raise ArithmeticError(f"divergence and MI rates disagree: {rate} vs {rate_mi}")
    return ThresholdReport(logp - d_x, logp - d_s, rate, rate_mi)


def run_wz_trial(spec: SourceSpec, n: int, k: int, l: int, eps: float, rng: np.random.Generator,  # noqa: E741
                 trial: int = 0, seed: int = 0) -> WZTrialRecord:
    """One end-to-end trial. Draw order: code, then the source pair."""
    code = sample_parity_code(n, k, l, spec.p, rng)
    x, s = spec.sample_source(n, rng)
    rec = dict(trial=trial, n=n, k=k, l=l, p=spec.p, gamma=spec.lattice.gamma, eps=eps,
               rank_H=code.rank_H(), seed=seed)
    m = wz_encode(spec, code, x, eps)
    if m is None:
        return WZTrialRecord(encoder_found=False, decoder_unique=False, block_distortion=math.nan, **rec)
    out = wz_decode(spec, code, m, s, eps)
    if out is None:
        return WZTrialRecord(encoder_found=True, decoder_unique=False, block_distortion=math.nan, **rec)
    return WZTrialRecord(encoder_found=True, decoder_unique=True,
                         block_distortion=block_distortion(x, out[1], spec.d), **rec)
