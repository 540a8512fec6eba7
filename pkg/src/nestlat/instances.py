"""Built-in reference instances used by the harness and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gp import ChannelSpec, zero_cost
from .lattice import LatticeParams
from .measures import FiniteMeasure
from .quantization import GaussianChannelInstance
from .tables import letter_index
from .wz import SourceSpec, squared_error

__all__ = [
    "symmetric_flip",
    "input_power",
    "zero_cost",
    "TableReconstruction",
    "gp_z3_flip01",
    "wz_z3_flip01",
    "gauss_rho08",
    "binary_exponent_d1",
    "InstanceDefaults",
    "DEFAULTS",
    "INSTANCES",
    "get_instance",
]


def symmetric_flip(size: int, q: float) -> np.ndarray:
    """Keep the letter w.p. 1-q, else move to one of the other letters uniformly."""
    W = np.full((size, size), q / (size - 1))
    np.fill_diagonal(W, 1 - q)
    return W


def input_power(x, s):
    return np.asarray(x, dtype=float) ** 2 + 0.0 * np.asarray(s, dtype=float)


class TableReconstruction:
    """f(s, u) looked up from a table indexed by (s letter, u letter)."""

    def __init__(self, s_letters, u_letters, table):
        self.s_letters = np.asarray(s_letters, dtype=float)
        self.u_letters = np.asarray(u_letters, dtype=float)
        self.table = np.asarray(table, dtype=float)

    def __call__(self, s, u):
        s, u = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(u, dtype=float))
        return self.table[letter_index(self.s_letters, s), letter_index(self.u_letters, u)]

    @classmethod
    def mmse(cls, x_letters, s_letters, u_letters, joint_xsu) -> "TableReconstruction":
        """Posterior mean E[X | S=s, Û=u]; cells of zero probability fall back to u."""
        psu = joint_xsu.sum(axis=0)
        num = np.einsum("x,xsu->su", np.asarray(x_letters, dtype=float), joint_xsu)
        table = np.where(psu > 0, num / np.where(psu > 0, psu, 1), np.asarray(u_letters)[None, :])
        return cls(s_letters, u_letters, table)


def gp_z3_flip01(gamma: float = 1.0) -> ChannelSpec:
    """S uniform on {0,1}; Û uniform on the Z_3 alphabet, independent of S; X = Û;
    Y = X moved to a uniformly chosen other letter w.p. 0.1; cost x^2."""
    lat = LatticeParams(gamma, 3)
    a = lat.alphabet()
    return ChannelSpec(
        lattice=lat,
        s_letters=np.array([0.0, 1.0]),
        p_s=np.array([0.5, 0.5]),
        p_u_given_s=np.full((2, 3), 1 / 3),
        x_letters=a,
        w_x_given_us=np.repeat(np.eye(3)[:, None, :], 2, axis=1),
        y_letters=a,
        w_y_given_xs=np.repeat(symmetric_flip(3, 0.1)[:, None, :], 2, axis=1),
        cost=input_power,
        budget=float(np.mean(a**2)),
        name="gp-z3-flip01",
    )


def wz_z3_flip01(test_flip: float = 0.2, gamma: float = 1.0) -> SourceSpec:
    """X uniform on the Z_3 alphabet, S = X moved to another letter w.p. 0.1.

    Test channel Û = X moved to another letter w.p. ``test_flip``; the decoder
    reconstructs with the posterior mean E[X | S, Û] under squared error.
    """
    lat = LatticeParams(gamma, 3)
    a = lat.alphabet()
    p_xs = symmetric_flip(3, 0.1) / 3
    W = symmetric_flip(3, test_flip)
    f = TableReconstruction.mmse(a, a, a, p_xs[:, :, None] * W[:, None, :])
    spec = SourceSpec(lat, a, a, p_xs, W, f, squared_error, name="wz-z3-flip01")
    spec.target = spec.expected_distortion()
    return spec


def gauss_rho08() -> GaussianChannelInstance:
    return GaussianChannelInstance(rho=0.8, points=2001, span=5.0)


def binary_exponent_d1() -> tuple[FiniteMeasure, FiniteMeasure]:
    """(P_XY, P_Z): X = Y uniform on {0,1}, Z uniform on {0,1}; D(P_XY || P_Z P_Y) = 1 bit."""
    P_XY = FiniteMeasure([[0.0, 0.0], [1.0, 1.0]], [0.5, 0.5])
    P_Z = FiniteMeasure([[0.0], [1.0]], [0.5, 0.5])
    return P_XY, P_Z


@dataclass(frozen=True)
class InstanceDefaults:
    mode: str
    eps: float | None
    n_values: tuple = ()
    rate_multipliers: tuple = ()
    trials: int = 0


DEFAULTS = {
    "gp-z3-flip01": InstanceDefaults("gp", 0.3, (6, 9, 12), (0.5,), 2000),
    "wz-z3-flip01": InstanceDefaults("wz", 0.25, (6, 9, 12), (1.1,), 2000),
    "gauss-rho08": InstanceDefaults("quantize", None),
    "binary-exponent-d1": InstanceDefaults("exponent", 0.05, (8, 12, 16, 20), (), 10**7),
}

INSTANCES = {
    "gp-z3-flip01": gp_z3_flip01,
    "wz-z3-flip01": wz_z3_flip01,
    "gauss-rho08": gauss_rho08,
    "binary-exponent-d1": binary_exponent_d1,
}


def get_instance(name: str):
    try:
        return INSTANCES[name]()
    except KeyError:
        raise KeyError(f"unknown instance {name!r}; known: {', '.join(sorted(INSTANCES))}") from None
