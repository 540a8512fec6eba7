"""Real-valued lattice codebooks built from Z_p codes.

A Z_p word v maps to the point gamma * (v - (p-1)/2). The mod-p lattice replicates
that image by shifts in gamma*p*Z^n; it is never materialised, membership is
decided by reducing mod p and asking the underlying code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .codes import GeneratorNestedCode, gen_codeword
from .zp import ZpVector, check_modulus, lex_tuples

__all__ = [
    "LatticeParams",
    "OffGridError",
    "GRID_TOL",
    "to_lattice_point",
    "from_lattice_point",
    "grid_coordinates",
    "mod_lattice_member",
    "union_of_shifts_member",
    "g_map",
    "fundamental_region",
]

GRID_TOL = 1e-9


class OffGridError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeParams:
    gamma: float
    p: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "p", check_modulus(self.p))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def center(self) -> int:
        return (self.p - 1) // 2

    def alphabet(self) -> np.ndarray:
        """The p scalar letters gamma*(i - (p-1)/2), i = 0..p-1."""
        return self.gamma * (np.arange(self.p) - self.center)

    def index_of(self, values) -> np.ndarray:
        """Letter index for values on the scalar alphabet (raises off grid)."""
        return from_lattice_point(self, np.asarray(values, dtype=float)).entries


def to_lattice_point(params: LatticeParams, v) -> np.ndarray:
    entries = v.entries if isinstance(v, ZpVector) else np.asarray(v, dtype=np.int64)
    return params.gamma * (entries - params.center)


def grid_coordinates(params: LatticeParams, x) -> tuple[np.ndarray, bool]:
    """Integer grid coordinates w = x/gamma + (p-1)/2 and whether x sits on the grid."""
    w = np.asarray(x, dtype=float) / params.gamma + params.center
    wi = np.rint(w)
    on_grid = bool(np.all(np.abs(w - wi) <= GRID_TOL))
    return wi.astype(np.int64), on_grid


def from_lattice_point(params: LatticeParams, x) -> ZpVector:
    """Inverse of `to_lattice_point` on the fundamental region."""
    w, on_grid = grid_coordinates(params, x)
    if not on_grid:
        raise OffGridError("point is not on the gamma grid")
    if w.size and (w.min() < 0 or w.max() >= params.p):
        raise OffGridError("point lies outside the fundamental region")
    return ZpVector(w, params.p)


def mod_lattice_member(params: LatticeParams, member: Callable[[ZpVector], bool], x) -> bool:
    """Membership in the mod-p lattice of the code described by ``member``."""
    w, on_grid = grid_coordinates(params, x)
    if not on_grid:
        return False
    return bool(member(ZpVector(np.mod(w, params.p), params.p)))


def union_of_shifts_member(params: LatticeParams, codewords: Iterable, x) -> bool:
    """Direct check of x in the union over v in pZ^n of (gamma v + Lambda).

    Independent of `mod_lattice_member`: it tests whether x minus the image of some
    codeword is gamma*p times an integer vector, with no reduction of x mod p.
    """
    x = np.asarray(x, dtype=float)
    words = [cw.entries if isinstance(cw, ZpVector) else np.asarray(cw, dtype=np.int64) for cw in codewords]
    if not words:
        return False
    d = (x[None, :] - to_lattice_point(params, np.array(words))) / (params.gamma * params.p)
    return bool(np.any(np.all(np.abs(d - np.rint(d)) <= GRID_TOL, axis=1)))


def g_map(params: LatticeParams, code: GeneratorNestedCode, a, m) -> np.ndarray:
    if code.p != params.p:
        raise ValueError("code and lattice disagree on p")
    return to_lattice_point(params, gen_codeword(code, a, m))


def fundamental_region(params: LatticeParams, n: int) -> np.ndarray:
    """The p^n points of S' in lexicographic order of their Z_p preimages."""
    return to_lattice_point(params, lex_tuples(n, params.p))
