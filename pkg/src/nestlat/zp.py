"""Exact arithmetic and linear algebra over the prime field Z_p (p odd)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "ZpVector",
    "ZpMatrix",
    "check_modulus",
    "is_prime",
    "smallest_prime_above",
    "vec_mat_mul",
    "rank",
    "rref",
    "kernel_basis",
    "solve_affine",
    "affine_solutions",
    "lex_tuples",
]

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(x: int) -> bool:
    """Deterministic Miller-Rabin, exact for x < 3.3e24."""
    if x < 2:
        return False
    for q in _MR_BASES:
        if x % q == 0:
            return x == q
    d, s = x - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        y = pow(a, d, x)
        if y in (1, x - 1):
            continue
        for _ in range(s - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


def check_modulus(p: int) -> int:
    p = int(p)
    if p < 3 or p % 2 == 0 or not is_prime(p):
        raise ValueError(f"modulus must be an odd prime, got {p}")
    return p


def smallest_prime_above(x: int) -> int:
    """Least prime strictly greater than ``x`` (x >= 2, so the result is odd)."""
    if x < 2:
        raise ValueError("x must be >= 2")
    q = x + 1
    while not is_prime(q):
        q += 1
    return q


@dataclass(frozen=True, eq=False)
class ZpVector:
    entries: np.ndarray
    p: int

    def __post_init__(self):
        p = check_modulus(self.p)
        a = np.array(self.entries, dtype=np.int64).reshape(-1)
        if a.size and (a.min() < 0 or a.max() >= p):
            raise ValueError("entries must lie in [0, p)")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "p", p)

    @classmethod
    def reduce(cls, values, p: int) -> "ZpVector":
        return cls(np.mod(np.asarray(values, dtype=np.int64), p), p)

    @classmethod
    def zeros(cls, n: int, p: int) -> "ZpVector":
        return cls(np.zeros(n, dtype=np.int64), p)

    def __len__(self) -> int:
        return self.entries.size

    def __iter__(self):
        return iter(self.entries.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZpVector):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.p, self.entries.tobytes()))

    def __add__(self, other: "ZpVector") -> "ZpVector":
        _same_modulus(self, other)
        if len(self) != len(other):
            raise ValueError("length mismatch")
        return ZpVector((self.entries + other.entries) % self.p, self.p)

    def __sub__(self, other: "ZpVector") -> "ZpVector":
        _same_modulus(self, other)
        if len(self) != len(other):
            raise ValueError("length mismatch")
        return ZpVector((self.entries - other.entries) % self.p, self.p)

    def scale(self, c: int) -> "ZpVector":
        return ZpVector((self.entries * (int(c) % self.p)) % self.p, self.p)

    def tolist(self) -> list[int]:
        return self.entries.tolist()

    def __repr__(self) -> str:
        return f"ZpVector({self.tolist()}, p={self.p})"


@dataclass(frozen=True, eq=False)
class ZpMatrix:
    """Matrix over Z_p with canonical entries in [0, p).

    Zero-row matrices are allowed (an empty parity check constrains nothing);
    the column count must be positive.
    """

    entries: np.ndarray
    p: int

    def __post_init__(self):
        p = check_modulus(self.p)
        a = np.array(self.entries, dtype=np.int64)
        if a.ndim != 2:
            raise ValueError("matrix entries must be two-dimensional")
        if a.shape[1] < 1:
            raise ValueError("matrix must have at least one column")
        if a.size and (a.min() < 0 or a.max() >= p):
            raise ValueError("entries must lie in [0, p)")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "p", p)

    @classmethod
    def reduce(cls, values, p: int) -> "ZpMatrix":
        return cls(np.mod(np.asarray(values, dtype=np.int64), p), p)

    @classmethod
    def identity(cls, n: int, p: int) -> "ZpMatrix":
        return cls(np.eye(n, dtype=np.int64), p)

    @classmethod
    def zeros(cls, rows: int, cols: int, p: int) -> "ZpMatrix":
        return cls(np.zeros((rows, cols), dtype=np.int64), p)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZpMatrix):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.p, self.shape, self.entries.tobytes()))

    def matvec(self, u: ZpVector) -> ZpVector:
        """H u (column convention used by parity checks)."""
        _same_modulus(self, u)
        if len(u) != self.cols:
            raise ValueError(f"dimension mismatch: {self.shape} @ {len(u)}")
        return ZpVector(self.entries @ u.entries % self.p, self.p)

    def vstack(self, other: "ZpMatrix") -> "ZpMatrix":
        _same_modulus(self, other)
        return ZpMatrix(np.vstack([self.entries, other.entries]), self.p)

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()

    def __repr__(self) -> str:
        return f"ZpMatrix({self.tolist()}, p={self.p})"


def _same_modulus(a, b) -> None:
    if a.p != b.p:
        raise ValueError(f"modulus mismatch: {a.p} vs {b.p}")


def vec_mat_mul(u: ZpVector, G: ZpMatrix) -> ZpVector:
    """Row-vector product uG mod p."""
    _same_modulus(u, G)
    if len(u) != G.rows:
        raise ValueError(f"dimension mismatch: len(u)={len(u)} vs G.rows={G.rows}")
    if G.rows == 0:
        return ZpVector.zeros(G.cols, G.p)
    return ZpVector(u.entries @ G.entries % G.p, G.p)


def rref(a: np.ndarray, p: int, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of an integer array mod p.

    Pivoting is restricted to the first ``ncols`` columns (all by default), which
    lets callers reduce an augmented system without pivoting on the right-hand side.
    Returns the reduced copy and the pivot column list.
    """
    m = np.array(a, dtype=np.int64) % p
    rows, cols = m.shape
    ncols = cols if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        m[r] = m[r] * pow(int(m[r, c]), -1, p) % p
        col = m[:, c].copy()
        col[r] = 0
        m -= np.outer(col, m[r])
        m %= p
        pivots.append(c)
        r += 1
    return m, pivots


def rank(M: ZpMatrix | np.ndarray, p: int | None = None) -> int:
    if isinstance(M, ZpMatrix):
        a, p = M.entries, M.p
    else:
        a = np.asarray(M)
        if p is None:
            raise ValueError("p required for raw arrays")
    if a.shape[0] == 0:
        return 0
    return len(rref(a, p)[1])


def _kernel_from_rref(red: np.ndarray, pivots: list[int], n: int, p: int) -> np.ndarray:
    free = [j for j in range(n) if j not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for t, f in enumerate(free):
        basis[t, f] = 1
        for i, pc in enumerate(pivots):
            basis[t, pc] = (-red[i, f]) % p
    return basis


def kernel_basis(H: ZpMatrix) -> np.ndarray:
    """Basis (one vector per row) of {u : Hu = 0}, ordered by free column."""
    n = H.cols
    if H.rows == 0:
        return np.eye(n, dtype=np.int64)
    red, piv = rref(H.entries, H.p)
    return _kernel_from_rref(red, piv, n, H.p)


def lex_tuples(length: int, p: int) -> np.ndarray:
    """All of Z_p^length in lexicographic order, first coordinate most significant."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.arange(p**length, dtype=np.int64)
    powers = p ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % p


def _particular_and_kernel(h: np.ndarray, c: np.ndarray, p: int):
    rows, n = h.shape
    if rows == 0:
        return np.zeros(n, dtype=np.int64), np.eye(n, dtype=np.int64)
    aug = np.hstack([h % p, (np.asarray(c, dtype=np.int64) % p)[:, None]])
    red, piv = rref(aug, p, ncols=n)
    r = len(piv)
    if np.any(red[r:, n] != 0):
        return None, None
    x0 = np.zeros(n, dtype=np.int64)
    for i, pc in enumerate(piv):
        x0[pc] = red[i, n]
    return x0, _kernel_from_rref(red[:, :n], piv, n, p)


def affine_solutions(h: np.ndarray, c: np.ndarray, p: int) -> np.ndarray:
    """All solutions of hu = c as an array, in the order `solve_affine` yields them.

    Shape is (p^(n - rank), n), or (0, n) when the system is inconsistent.
    """
    n = h.shape[1]
    x0, K = _particular_and_kernel(h, c, p)
    if x0 is None:
        return np.zeros((0, n), dtype=np.int64)
    coeffs = lex_tuples(K.shape[0], p)
    return (x0[None, :] + coeffs @ K) % p


def solve_affine(H: ZpMatrix, c: ZpVector) -> Iterator[ZpVector]:
    """Lazily enumerate {u : Hu = c}.

    Order: particular solution (free variables zero) plus kernel combinations with
    coefficient tuples in lexicographic order. Yields nothing when inconsistent.
    """
    _same_modulus(H, c)
    if H.rows != len(c):
        raise ValueError(f"dimension mismatch: H has {H.rows} rows, c has {len(c)}")
    p = H.p
    x0, K = _particular_and_kernel(H.entries, c.entries, p)
    if x0 is None:
        return
    f = K.shape[0]
    coeff = [0] * f
    while True:
        v = x0.copy()
        for t, ct in enumerate(coeff):
            if ct:
                v += ct * K[t]
        yield ZpVector(v % p, p)
        # odometer increment, last coordinate fastest
        j = f - 1
        while j >= 0:
            coeff[j] += 1
            if coeff[j] < p:
                break
            coeff[j] = 0
            j -= 1
        if j < 0:
            return


def as_vector(values: ZpVector | Sequence[int], p: int) -> ZpVector:
    if isinstance(values, ZpVector):
        if values.p != p:
            raise ValueError(f"modulus mismatch: {values.p} vs {p}")
        return values
    return ZpVector(values, p)
