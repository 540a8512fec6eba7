"""Nested linear code pairs over Z_p.

Two representations share the bin structure indexed by m in Z_p^k:

* generator form: outer code {aG + m dG + B}, inner code {aG + B}, bin
  B_m = {aG + m dG + B : a in Z_p^l};
* parity-check form: outer code {u : Hu = c}, inner code adds dH u = dc,
  bin B_m = {u : Hu = c, dH u = m}.

Bins are never materialised by the iterator API; the ``*_array`` helpers build
the full candidate table for vectorised search when the caller knows it fits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .zp import (
    ZpMatrix,
    ZpVector,
    affine_solutions,
    as_vector,
    check_modulus,
    lex_tuples,
    rank,
    solve_affine,
    vec_mat_mul,
)

__all__ = [
    "GeneratorNestedCode",
    "ParityNestedCode",
    "Membership",
    "NotACodewordError",
    "gen_codeword",
    "generator_bin",
    "parity_membership",
    "parity_bin_index",
    "parity_bin",
    "sample_generator_code",
    "sample_parity_code",
    "parity_from_generator",
    "code_to_text",
    "code_from_text",
]


class NotACodewordError(ValueError):
    pass


class Membership(str, enum.Enum):
    OUTER = "outer"
    INNER = "inner"
    NEITHER = "neither"


@dataclass(frozen=True)
class GeneratorNestedCode:
    G: ZpMatrix  # l x n
    dG: ZpMatrix  # k x n
    B: ZpVector  # n

    def __post_init__(self):
        if not (self.G.p == self.dG.p == self.B.p):
            raise ValueError("modulus mismatch")
        if not (self.G.cols == self.dG.cols == len(self.B)):
            raise ValueError("G, dG and B must share the block length n")

    @property
    def p(self) -> int:
        return self.G.p

    @property
    def n(self) -> int:
        return self.G.cols

    @property
    def l(self) -> int:  # noqa: E743
        return self.G.rows

    @property
    def k(self) -> int:
        return self.dG.rows

    @property
    def stacked(self) -> ZpMatrix:
        return self.G.vstack(self.dG)

    def stacked_rank(self) -> int:
        return rank(self.stacked)

    def inner(self) -> Iterator[ZpVector]:
        return generator_bin(self, ZpVector.zeros(self.k, self.p))

    def outer(self) -> Iterator[ZpVector]:
        for m in lex_tuples(self.k, self.p):
            yield from generator_bin(self, ZpVector(m, self.p))

    def bin_array(self, m) -> np.ndarray:
        """All p^l words of bin m, rows in lexicographic a-order."""
        m = as_vector(m, self.p).entries
        shift = (m @ self.dG.entries + self.B.entries) % self.p if self.k else self.B.entries
        return (lex_tuples(self.l, self.p) @ self.G.entries + shift) % self.p

    def outer_array(self) -> np.ndarray:
        """All p^(k+l) outer words, ordered by m (major) then a (minor)."""
        coeff = lex_tuples(self.k + self.l, self.p)
        # coefficient columns: m first, then a
        stacked = np.vstack([self.dG.entries, self.G.entries])
        return (coeff @ stacked + self.B.entries) % self.p


@dataclass(frozen=True)
class ParityNestedCode:
    H: ZpMatrix  # l x n
    dH: ZpMatrix  # k x n
    c: ZpVector  # l
    dc: ZpVector  # k

    def __post_init__(self):
        if not (self.H.p == self.dH.p == self.c.p == self.dc.p):
            raise ValueError("modulus mismatch")
        if self.H.cols != self.dH.cols:
            raise ValueError("H and dH must share the block length n")
        if len(self.c) != self.H.rows or len(self.dc) != self.dH.rows:
            raise ValueError("bias vectors must match the parity-check row counts")

    @property
    def p(self) -> int:
        return self.H.p

    @property
    def n(self) -> int:
        return self.H.cols

    @property
    def l(self) -> int:  # noqa: E743
        return self.H.rows

    @property
    def k(self) -> int:
        return self.dH.rows

    def rank_H(self) -> int:
        return rank(self.H)

    def outer(self) -> Iterator[ZpVector]:
        return solve_affine(self.H, self.c)

    def inner(self) -> Iterator[ZpVector]:
        return parity_bin(self, self.dc)

    def outer_array(self) -> np.ndarray:
        return affine_solutions(self.H.entries, self.c.entries, self.p)

    def bin_array(self, m) -> np.ndarray:
        m = as_vector(m, self.p)
        h = np.vstack([self.H.entries, self.dH.entries])
        rhs = np.concatenate([self.c.entries, m.entries])
        return affine_solutions(h, rhs, self.p)


def gen_codeword(code: GeneratorNestedCode, a, m) -> ZpVector:
    """aG + m dG + B mod p."""
    a = as_vector(a, code.p)
    m = as_vector(m, code.p)
    if len(a) != code.l or len(m) != code.k:
        raise ValueError(f"dimension mismatch: a has {len(a)} (l={code.l}), m has {len(m)} (k={code.k})")
    return vec_mat_mul(a, code.G) + vec_mat_mul(m, code.dG) + code.B


def generator_bin(code: GeneratorNestedCode, m) -> Iterator[ZpVector]:
    m = as_vector(m, code.p)
    for a in lex_tuples(code.l, code.p):
        yield gen_codeword(code, ZpVector(a, code.p), m)


def parity_membership(code: ParityNestedCode, u) -> Membership:
    u = as_vector(u, code.p)
    if len(u) != code.n:
        raise ValueError(f"dimension mismatch: len(u)={len(u)}, n={code.n}")
    if code.l and code.H.matvec(u) != code.c:
        return Membership.NEITHER
    if code.k == 0 or code.dH.matvec(u) == code.dc:
        return Membership.INNER
    return Membership.OUTER


def parity_bin_index(code: ParityNestedCode, u) -> ZpVector:
    u = as_vector(u, code.p)
    if len(u) != code.n:
        raise ValueError(f"dimension mismatch: len(u)={len(u)}, n={code.n}")
    if code.l and code.H.matvec(u) != code.c:
        raise NotACodewordError("Hu != c")
    if code.k == 0:
        return ZpVector.zeros(0, code.p)
    return code.dH.matvec(u)


def parity_bin(code: ParityNestedCode, m) -> Iterator[ZpVector]:
    m = as_vector(m, code.p)
    if len(m) != code.k:
        raise ValueError("bin index length must equal k")
    stacked = code.H.vstack(code.dH) if code.k else code.H
    rhs = ZpVector(np.concatenate([code.c.entries, m.entries]), code.p)
    return solve_affine(stacked, rhs)


def _uniform(rng: np.random.Generator, p: int, shape) -> np.ndarray:
    return rng.integers(0, p, size=shape, dtype=np.int64)


def sample_generator_code(n: int, k: int, l: int, p: int, rng: np.random.Generator) -> GeneratorNestedCode:  # noqa: E741
    """Draw (G, dG, B) with i.i.d. uniform entries, in that order."""
    p = check_modulus(p)
    G = _uniform(rng, p, (l, n))
    dG = _uniform(rng, p, (k, n))
    B = _uniform(rng, p, n)
    return GeneratorNestedCode(ZpMatrix(G, p), ZpMatrix(dG, p), ZpVector(B, p))


def sample_parity_code(n: int, k: int, l: int, p: int, rng: np.random.Generator) -> ParityNestedCode:  # noqa: E741
    """Draw (H, dH, c, dc) with i.i.d. uniform entries, in that order."""
    p = check_modulus(p)
    H = _uniform(rng, p, (l, n))
    dH = _uniform(rng, p, (k, n))
    c = _uniform(rng, p, l)
    dc = _uniform(rng, p, k)
    return ParityNestedCode(ZpMatrix(H, p), ZpMatrix(dH, p), ZpVector(c, p), ZpVector(dc, p))


def parity_from_generator(code: GeneratorNestedCode) -> ParityNestedCode:
    """Parity-check code with the same outer codeword set.

    Needs a full-rank stacked generator; the parity rows span the dual of the
    row space of [G; dG], and c = H B. The bin labelling differs from the
    generator form, so dH/dc are taken from the dual of G alone.
    """
    p = code.p
    S = code.stacked
    if rank(S) != S.rows:
        raise ValueError("stacked generator must have full row rank")
    from .zp import kernel_basis

    H = kernel_basis(S)  # rows h with S h = 0
    Hm = ZpMatrix(H, p) if H.shape[0] else ZpMatrix.zeros(0, code.n, p)
    c = Hm.matvec(code.B) if Hm.rows else ZpVector.zeros(0, p)
    # extra checks that cut the inner code out of the outer one
    dual_inner = kernel_basis(code.G) if code.l else np.eye(code.n, dtype=np.int64)
    extra = []
    span = Hm.entries.copy()
    for row in dual_inner:
        trial = np.vstack([span, row]) if span.size else row[None, :]
        if rank(trial, p) > (rank(span, p) if span.size else 0):
            extra.append(row)
            span = trial
        if len(extra) == code.k:
            break
    dH = ZpMatrix(np.array(extra, dtype=np.int64).reshape(len(extra), code.n), p) if extra else ZpMatrix.zeros(0, code.n, p)
    dc = dH.matvec(code.B) if dH.rows else ZpVector.zeros(0, p)
    return ParityNestedCode(Hm, dH, c, dc)


def _row(values) -> str:
    return " ".join(str(int(v)) for v in np.asarray(values).reshape(-1))


def code_to_text(code: GeneratorNestedCode | ParityNestedCode) -> str:
    """Flat record: form, p, n, k, l, then one line per matrix/vector (row-major)."""
    if isinstance(code, GeneratorNestedCode):
        fields = ["generator", code.G.entries, code.dG.entries, code.B.entries]
    else:
        fields = ["parity", code.H.entries, code.dH.entries, code.c.entries, code.dc.entries]
    lines = [fields[0], str(code.p), str(code.n), str(code.k), str(code.l)]
    lines += [_row(f) for f in fields[1:]]
    return "\n".join(lines) + "\n"


def code_from_text(text: str) -> GeneratorNestedCode | ParityNestedCode:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    form = lines[0].strip()
    p, n, k, l = (int(x) for x in lines[1:5])  # noqa: E741

    def ints(line: str) -> np.ndarray:
        return np.array([int(x) for x in line.split()], dtype=np.int64)

    if form == "generator":
        if len(lines) != 8:
            raise ValueError("generator record needs 8 lines")
        G = ints(lines[5]).reshape(l, n)
        dG = ints(lines[6]).reshape(k, n)
        B = ints(lines[7])
        return GeneratorNestedCode(ZpMatrix(G, p), ZpMatrix(dG, p), ZpVector(B, p))
    if form == "parity":
        if len(lines) != 9:
            raise ValueError("parity record needs 9 lines")
        H = ints(lines[5]).reshape(l, n)
        dH = ints(lines[6]).reshape(k, n)
        return ParityNestedCode(ZpMatrix(H, p), ZpMatrix(dH, p), ZpVector(ints(lines[7]), p), ZpVector(ints(lines[8]), p))
    raise ValueError(f"unknown code form {form!r}")
