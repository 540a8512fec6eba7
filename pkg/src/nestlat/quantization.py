"""Dyadic quantizers Q_{gamma,p}, clipping, and MI refinement sweeps.

Continuous laws enter as fine-grid discretisations (`GridJoint`), so every
convergence statement below is a finite computation against that reference.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measures import FiniteMeasure, mi_bits, prokhorov_distance
from .zp import check_modulus, smallest_prime_above

__all__ = [
    "DyadicQuantizer",
    "quantize_value",
    "quantize_joint",
    "clip_value",
    "GridJoint",
    "GaussianChannelInstance",
    "SweepStep",
    "default_schedule",
    "mi_refinement_sweep",
    "clipping_sweep",
    "sweep_to_csv",
]

P_CAP = 1021


@dataclass(frozen=True)
class DyadicQuantizer:
    """Cells A_0 = (-inf, a_0], A_i = (a_{i-1}, a_i], A_{p-1} = (a_{p-2}, inf)."""

    gamma: float
    p: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "p", check_modulus(self.p))

    @property
    def points(self) -> np.ndarray:
        return -self.gamma * (self.p - 1) / 2 + self.gamma * np.arange(self.p)

    def cell_index(self, u) -> np.ndarray:
        # boundaries a_0..a_{p-2}; right-closed cells -> count of boundaries strictly below u
        return np.searchsorted(self.points[:-1], np.asarray(u, dtype=float), side="left")

    def __call__(self, u) -> np.ndarray:
        return self.points[self.cell_index(u)]


def quantize_value(q: DyadicQuantizer, u: float) -> float:
    return float(q(u))


def quantize_joint(P: FiniteMeasure, q: DyadicQuantizer, axis: int = 0) -> FiniteMeasure:
    """Pushforward of P with coordinate ``axis`` replaced by its quantized value."""

    def fn(pts):
        pts[:, axis] = q(pts[:, axis])
        return pts

    return P.pushforward(fn)


def clip_value(x, level: float):
    """sign(x) * min(level, |x|)."""
    if not level > 0:
        raise ValueError("clipping level must be positive")
    out = np.sign(x) * np.minimum(level, np.abs(x))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class GridJoint:
    """Joint pmf on a rectangular grid: rows follow ``u``, columns follow ``y``."""

    u: np.ndarray
    y: np.ndarray
    pmf: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.pmf = np.asarray(self.pmf, dtype=float)
        if self.pmf.shape != (self.u.size, self.y.size):
            raise ValueError("pmf shape must be (len(u), len(y))")

    def mi(self) -> float:
        return mi_bits(self.pmf)

    def quantize(self, q: DyadicQuantizer, axes: str = "u") -> "GridJoint":
        out = self
        if axes in ("u", "both"):
            out = _merge_rows(out, q)
        if axes in ("y", "both"):
            out = _merge_rows(out.transposed(), q).transposed()
        return out

    def transposed(self) -> "GridJoint":
        return GridJoint(self.y, self.u, self.pmf.T)

    def to_measure(self) -> FiniteMeasure:
        uu, yy = np.meshgrid(self.u, self.y, indexing="ij")
        keep = self.pmf > 0
        m = self.pmf[keep]
        return FiniteMeasure(np.column_stack([uu[keep], yy[keep]]), m / m.sum())


def _merge_rows(g: GridJoint, q: DyadicQuantizer) -> GridJoint:
    cells = q.cell_index(g.u)
    used, inv = np.unique(cells, return_inverse=True)
    pmf = np.zeros((used.size, g.y.size))
    np.add.at(pmf, inv, g.pmf)
    return GridJoint(q.points[used], g.y, pmf)


def _gauss_weights(x: np.ndarray, scale: float = 1.0) -> np.ndarray:
    return np.exp(-0.5 * (x / scale) ** 2)


@dataclass
class GaussianChannelInstance:
    """U ~ N(0,1), channel input X = U, output Y = X + N(0, noise_var).

    With noise_var = 1/rho^2 - 1 the pair (U, Y) has correlation rho, so
    I(U;Y) = -1/2 log2(1 - rho^2). Both axes are discretised on ``points``
    grid points spanning +-span standard deviations.
    """

    rho: float = 0.8
    points: int = 2001
    span: float = 5.0

    @property
    def noise_var(self) -> float:
        return 1.0 / self.rho**2 - 1.0

    @property
    def reference_mi(self) -> float:
        return -0.5 * np.log2(1 - self.rho**2)

    def u_grid(self, points: int | None = None) -> np.ndarray:
        return np.linspace(-self.span, self.span, points or self.points)

    def y_grid(self, points: int | None = None) -> np.ndarray:
        sy = np.sqrt(1.0 + self.noise_var)
        return np.linspace(-self.span * sy, self.span * sy, points or self.points)

    def joint(self, points: int | None = None, clip_level: float | None = None) -> GridJoint:
        u = self.u_grid(points)
        y = self.y_grid(points)
        pu = _gauss_weights(u)
        pu /= pu.sum()
        x = u if clip_level is None else clip_value(u, clip_level)
        kern = _gauss_weights(y[None, :] - x[:, None], np.sqrt(self.noise_var))
        kern /= kern.sum(axis=1, keepdims=True)
        return GridJoint(u, y, pu[:, None] * kern)


@dataclass
class SweepStep:
    n: int
    gamma: float
    p: int
    mi_bits: float
    prokhorov_to_ref: float = float("nan")
    meta: dict = field(default_factory=dict)


def default_schedule(steps: int = 6, start: int = 1, cap: int = P_CAP) -> list[tuple[int, float, int]]:
    """(n, 2^-n, p_n) with p_n the smallest prime above 4^n, capped at ``cap``."""
    out = []
    for n in range(start, start + steps):
        p = smallest_prime_above(max(2, 4**n))
        out.append((n, 2.0**-n, min(p, cap)))
    return out


def mi_refinement_sweep(
    grid: GridJoint,
    schedule: Sequence[tuple[int, float, int]] | None = None,
    axes: str = "both",
    prokhorov_ref: GridJoint | None = None,
) -> list[SweepStep]:
    """MI of the quantized joint along a refinement schedule.

    With ``prokhorov_ref`` given, each step also reports the Prokhorov distance
    between that (coarser) grid and its own quantization at the same step.
    """
    schedule = default_schedule() if schedule is None else schedule
    ref_measure = prokhorov_ref.to_measure() if prokhorov_ref is not None else None
    out = []
    for n, gamma, p in schedule:
        q = DyadicQuantizer(gamma, p)
        step = SweepStep(n, gamma, p, grid.quantize(q, axes).mi())
        if ref_measure is not None:
            step.prokhorov_to_ref = prokhorov_distance(prokhorov_ref.quantize(q, axes).to_measure(), ref_measure)
        out.append(step)
    return out


def clipping_sweep(inst: GaussianChannelInstance, levels: Sequence[float] = (1, 2, 4, 8), points: int | None = None):
    """(level, I(U; Y_clipped), |I_clipped - I_unclipped|) per clipping level."""
    ref = inst.joint(points).mi()
    rows = []
    for lv in levels:
        mi = inst.joint(points, clip_level=lv).mi()
        rows.append((float(lv), mi, abs(mi - ref)))
    return rows


def sweep_to_csv(steps: Sequence[SweepStep]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "gamma", "p", "mi_bits", "prokhorov_to_ref"])
    for s in steps:
        w.writerow([s.n, repr(s.gamma), s.p, repr(s.mi_bits), repr(s.prokhorov_to_ref)])
    return buf.getvalue()
