"""Finite-support measures on R^d: Prokhorov distance, typicality, KL and MI.

Prokhorov distance between finite-support measures is computed exactly. For a
fixed radius eps the condition "P1(A) <= P2(A^eps) + eps for every A" only has
to be checked on subsets of the joint support, and by max-flow/min-cut

    max_A [P1(A) - P2(A^eps)] = 1 - maxflow(P1 -> P2 over pairs at distance < eps),

which is symmetric in P1, P2, so one direction suffices. Call that maximum the
deficiency at eps. Deficiency only changes at pairwise distances, so the
distance is the minimum over breakpoints d_j of max(d_j, deficiency just above d_j).
Deficiency splits over connected components of the "closer than eps" graph;
small components are handled by subset enumeration, large ones by an integer
max-flow.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, maximum_flow
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

__all__ = [
    "FiniteMeasure",
    "EmpiricalMeasure",
    "empirical",
    "empirical_joint",
    "total_variation",
    "prokhorov_distance",
    "deficiency",
    "is_typical",
    "is_jointly_typical",
    "kl_divergence",
    "mutual_information",
    "entropy_bits",
    "kl_bits",
    "mi_bits",
    "PairTypicality",
    "TIE_TOL",
]

MASS_TOL = 1e-12
KEY_DECIMALS = 12
# "< eps" comparisons treat values within TIE_TOL of eps as not below it, so that
# rational ties such as a deficiency of exactly 1/4 do not flip on rounding noise.
TIE_TOL = 1e-12
SUBSET_LIMIT = 16
EXACT_SUPPORT_LIMIT = 1500
FLOW_SCALE = 2**29
BISECT_TOL = 1e-9


def _keys(points: np.ndarray) -> list[tuple]:
    return [tuple(r) for r in np.round(points, KEY_DECIMALS) + 0.0]


class FiniteMeasure:
    """Probability measure with finitely many atoms in R^d."""

    def __init__(self, points, masses):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        m = np.asarray(masses, dtype=float).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] != m.size or m.size == 0:
            raise ValueError("need one mass per atom and at least one atom")
        if np.any(m < 0):
            raise ValueError("masses must be non-negative")
        if abs(m.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {m.sum()!r}, not 1")
        keep = m > 0
        pts, m = pts[keep], m[keep]
        if len(set(_keys(pts))) != pts.shape[0]:
            raise ValueError("atom points must be pairwise distinct")
        pts.setflags(write=False)
        m.setflags(write=False)
        self.points = pts
        self.masses = m

    @classmethod
    def from_atoms(cls, points, masses, normalize: bool = False) -> "FiniteMeasure":
        """Build a measure, merging atoms that share coordinates."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        m = np.asarray(masses, dtype=float).reshape(-1)
        uniq, inv = np.unique(np.round(pts, KEY_DECIMALS) + 0.0, axis=0, return_inverse=True)
        merged = np.bincount(inv.reshape(-1), weights=m, minlength=uniq.shape[0])
        if normalize:
            merged = merged / merged.sum()
        return cls(uniq, merged)

    @classmethod
    def from_dict(cls, atoms: dict) -> "FiniteMeasure":
        pts = [k if isinstance(k, tuple) else (k,) for k in atoms]
        return cls(pts, list(atoms.values()))

    @classmethod
    def dirac(cls, point) -> "FiniteMeasure":
        return cls(np.atleast_1d(np.asarray(point, dtype=float))[None, :], [1.0])

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.masses.size

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in zip(_keys(self.points), self.masses)}

    def mass_of(self, point) -> float:
        return self.as_dict().get(_keys(np.atleast_2d(np.asarray(point, dtype=float)))[0], 0.0)

    def marginal(self, axes: Sequence[int] | int) -> "FiniteMeasure":
        axes = [axes] if isinstance(axes, int) else list(axes)
        return FiniteMeasure.from_atoms(self.points[:, axes], self.masses)

    def pushforward(self, fn) -> "FiniteMeasure":
        """Image under a map acting on the (K, d) point array."""
        return FiniteMeasure.from_atoms(fn(self.points.copy()), self.masses)

    def expectation(self, fn) -> float:
        return float(np.dot(self.masses, fn(self.points)))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self), size=n, p=self.masses)
        return self.points[idx]

    def to_text(self) -> str:
        rows = (" ".join(repr(float(c)) for c in pt) + " " + repr(float(w)) for pt, w in zip(self.points, self.masses))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FiniteMeasure":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        arr = np.array([[float(x) for x in r] for r in rows])
        return cls(arr[:, :-1], arr[:, -1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteMeasure):
            return NotImplemented
        a, b = self.as_dict(), other.as_dict()
        return a.keys() == b.keys() and all(abs(a[k] - b[k]) <= MASS_TOL for k in a)

    __hash__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.as_dict()})"


class EmpiricalMeasure(FiniteMeasure):
    """Empirical distribution of n samples; every mass is count/n."""

    def __init__(self, points, counts, n: int):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.sum() != n:
            raise ValueError("counts must sum to n")
        super().__init__(points, counts / n)
        self.n = int(n)
        self.counts = counts[counts > 0]


def _as_points(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def empirical(x) -> EmpiricalMeasure:
    pts = _as_points(x)
    if pts.shape[0] < 1:
        raise ValueError("need at least one sample")
    uniq, counts = np.unique(np.round(pts, KEY_DECIMALS) + 0.0, axis=0, return_counts=True)
    return EmpiricalMeasure(uniq, counts, pts.shape[0])


def empirical_joint(x, y) -> EmpiricalMeasure:
    x, y = _as_points(x), _as_points(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    return empirical(np.hstack([x, y]))


def _common_support(P: FiniteMeasure, Q: FiniteMeasure):
    if P.dim != Q.dim:
        raise ValueError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    kp, kq = _keys(P.points), _keys(Q.points)
    index: dict[tuple, int] = {}
    pts = []
    for k, pt in zip(kp + kq, np.vstack([P.points, Q.points])):
        if k not in index:
            index[k] = len(pts)
            pts.append(pt)
    e1 = np.zeros(len(pts))
    e2 = np.zeros(len(pts))
    e1[[index[k] for k in kp]] = P.masses
    e2[[index[k] for k in kq]] = Q.masses
    return np.array(pts), e1, e2


def total_variation(P: FiniteMeasure, Q: FiniteMeasure) -> float:
    _, e1, e2 = _common_support(P, Q)
    return float(np.clip(e1 - e2, 0, None).sum())


def _subset_matrix(size: int) -> np.ndarray:
    idx = np.arange(1 << size)
    return ((idx[:, None] >> np.arange(size)[None, :]) & 1).astype(bool)


def _flow_deficiency(e1: np.ndarray, e2: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> float:
    """max_T e1(T) - e2(N(T)) on a bipartite graph given as index pairs, via max-flow.

    Capacities are scaled to integers (scipy's solver is integral), so the result
    carries an absolute error of about len(e1) / FLOW_SCALE.
    """
    left = np.nonzero(e1 > 0)[0]
    right = np.nonzero(e2 > 0)[0]
    L, R = left.size, right.size
    lpos = np.full(e1.size, -1)
    lpos[left] = np.arange(L)
    rpos = np.full(e2.size, -1)
    rpos[right] = np.arange(R)
    keep = (lpos[rows] >= 0) & (rpos[cols] >= 0)
    src, snk = 0, L + R + 1
    cap1 = np.rint(e1[left] * FLOW_SCALE).astype(np.int64)
    cap2 = np.rint(e2[right] * FLOW_SCALE).astype(np.int64)
    big = 2 * FLOW_SCALE
    u = np.concatenate([np.full(L, src), 1 + lpos[rows[keep]], 1 + L + np.arange(R)])
    v = np.concatenate([1 + np.arange(L), 1 + L + rpos[cols[keep]], np.full(R, snk)])
    c = np.concatenate([cap1, np.full(int(keep.sum()), big), cap2]).astype(np.int32)
    g = sparse.csr_array((c, (u, v)), shape=(snk + 1, snk + 1))
    g.sum_duplicates()
    flow = maximum_flow(g, src, snk).flow_value
    return max(0.0, float(cap1.sum() - flow) / FLOW_SCALE)


def _component_deficiency(e1: np.ndarray, e2: np.ndarray, adj: np.ndarray) -> float:
    """Deficiency within one connected component given its dense adjacency."""
    left = np.nonzero(e1 > 0)[0]
    if left.size == 0:
        return 0.0
    if left.size <= SUBSET_LIMIT:
        S = _subset_matrix(left.size)
        mass = S.astype(float) @ e1[left]
        nbr = (S.astype(np.int32) @ adj[left].astype(np.int32)) > 0
        return max(0.0, float(np.max(mass - nbr.astype(float) @ e2)))
    r, c = np.nonzero(adj)
    return _flow_deficiency(e1, e2, r, c)


def deficiency(e1: np.ndarray, e2: np.ndarray, adj) -> float:
    """max over T of e1(T) - e2(N(T)) for a symmetric adjacency (dense or sparse)."""
    if sparse.issparse(adj):
        ncomp, labels = connected_components(adj, directed=False)
        adj = sparse.csr_array(adj)
    else:
        adj = np.asarray(adj, dtype=bool)
        ncomp, labels = connected_components(sparse.csr_array(adj), directed=False)
    sizes = np.bincount(labels, minlength=ncomp)
    single = sizes[labels] == 1
    total = float(np.clip(e1[single] - e2[single], 0, None).sum())
    for comp in np.nonzero(sizes > 1)[0]:
        idx = np.nonzero(labels == comp)[0]
        sub1, sub2 = e1[idx], e2[idx]
        if not np.any(sub1 > 0):
            continue
        if sparse.issparse(adj):
            block = adj[idx][:, idx]
            if np.count_nonzero(sub1) <= SUBSET_LIMIT:
                total += _component_deficiency(sub1, sub2, block.toarray().astype(bool))
            else:
                r, c = block.nonzero()
                total += _flow_deficiency(sub1, sub2, r, c)
        else:
            total += _component_deficiency(sub1, sub2, adj[np.ix_(idx, idx)])
    return total


def _prokhorov_exact(pts, e1, e2) -> float:
    D = cdist(pts, pts)
    d = np.unique(D)  # sorted, d[0] == 0

    def delta(j: int) -> float:
        return deficiency(e1, e2, D <= d[j])

    # smallest j with delta(j) <= d[j]; the predicate is monotone in j
    lo, hi = 0, d.size - 1
    cache: dict[int, float] = {}

    def get(j):
        if j not in cache:
            cache[j] = delta(j)
        return cache[j]

    while lo < hi:
        mid = (lo + hi) // 2
        if get(mid) <= d[mid]:
            hi = mid
        else:
            lo = mid + 1
    best = d[lo]
    if lo > 0:
        best = min(best, get(lo - 1))
    return float(min(best, 1.0))


def _adjacency_below(pts: np.ndarray, eps: float, tree: cKDTree):
    K = pts.shape[0]
    pairs = tree.query_pairs(r=eps, output_type="ndarray")
    if pairs.size:
        dist = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
        pairs = pairs[dist < eps]
    r = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(K)]) if pairs.size else np.arange(K)
    c = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(K)]) if pairs.size else np.arange(K)
    return sparse.csr_array((np.ones(r.size, dtype=np.int8), (r, c)), shape=(K, K))


def _prokhorov_bisect(pts, e1, e2, tol: float) -> float:
    tree = cKDTree(pts)
    if deficiency(e1, e2, sparse.identity(pts.shape[0], format="csr")) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if deficiency(e1, e2, _adjacency_below(pts, mid, tree)) <= mid:
            hi = mid
        else:
            lo = mid
    return hi


def prokhorov_distance(P1: FiniteMeasure, P2: FiniteMeasure, tol: float = BISECT_TOL) -> float:
    """Prokhorov distance under the Euclidean metric, in [0, 1].

    Exact (breakpoint search) when the joint support has at most
    EXACT_SUPPORT_LIMIT atoms; otherwise bisection on the radius to ``tol``.
    """
    pts, e1, e2 = _common_support(P1, P2)
    # canonical point order and argument order make the result exactly symmetric
    order = np.lexsort(pts.T[::-1])
    pts, e1, e2 = pts[order], e1[order], e2[order]
    if tuple(e1) > tuple(e2):
        e1, e2 = e2, e1
    if pts.shape[0] <= EXACT_SUPPORT_LIMIT:
        return _prokhorov_exact(pts, e1, e2)
    return _prokhorov_bisect(pts, e1, e2, tol)


def is_typical(x, P: FiniteMeasure, eps: float) -> bool:
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps >= 1:
        return True
    return prokhorov_distance(empirical(x), P) < eps - TIE_TOL


def is_jointly_typical(x, y, P_XY: FiniteMeasure, eps: float) -> bool:
    emp = empirical_joint(x, y)
    if eps >= 1:
        return True
    return prokhorov_distance(emp, P_XY) < eps - TIE_TOL


def _xlogx_ratio(p: np.ndarray, q: np.ndarray) -> float:
    pos = p > 0
    if np.any(q[pos] <= 0):
        return math.inf
    return float(np.sum(p[pos] * np.log2(p[pos] / q[pos])))


def kl_bits(p, q) -> float:
    """Discrete KL divergence in bits on aligned arrays; inf off absolute continuity."""
    return _xlogx_ratio(np.asarray(p, dtype=float).ravel(), np.asarray(q, dtype=float).ravel())


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mi_bits(pxy) -> float:
    """Mutual information of a 2-D joint pmf array (rows X, columns Y)."""
    pxy = np.asarray(pxy, dtype=float)
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    pos = pxy > 0
    ratio = pxy[pos] / (px @ py)[pos]
    return max(0.0, float(np.sum(pxy[pos] * np.log2(ratio))))


def kl_divergence(P: FiniteMeasure, Q: FiniteMeasure) -> float:
    _, e1, e2 = _common_support(P, Q)
    return _xlogx_ratio(e1, e2)


def mutual_information(P_XY: FiniteMeasure, split: int = 1) -> float:
    """I between the first ``split`` coordinates and the rest, in bits."""
    if not 0 < split < P_XY.dim:
        raise ValueError("split must separate the coordinates into two non-empty groups")
    kx = _keys(P_XY.points[:, :split])
    ky = _keys(P_XY.points[:, split:])
    px: dict = {}
    py: dict = {}
    for a, b, w in zip(kx, ky, P_XY.masses):
        px[a] = px.get(a, 0.0) + w
        py[b] = py.get(b, 0.0) + w
    prod = np.array([px[a] * py[b] for a, b in zip(kx, ky)])
    return max(0.0, _xlogx_ratio(P_XY.masses, prod))


class PairTypicality:
    """Vectorised joint typicality test against a fixed reference on a letter grid.

    The reference lives on the product of two finite scalar alphabets; sequences
    are given as letter indices. A pair (x, y) is typical iff the Prokhorov
    distance between its empirical joint and the reference is below eps, which
    equals "deficiency over pairs closer than eps is below eps".
    """

    def __init__(self, x_letters, y_letters, ref_pmf, eps: float):
        self.x_letters = np.asarray(x_letters, dtype=float)
        self.y_letters = np.asarray(y_letters, dtype=float)
        self.ref = np.asarray(ref_pmf, dtype=float)
        if self.ref.shape != (self.x_letters.size, self.y_letters.size):
            raise ValueError("reference pmf shape must be (|X|, |Y|)")
        if abs(self.ref.sum() - 1) > 1e-9:
            raise ValueError("reference pmf must sum to 1")
        self.eps = float(eps)
        kx, ky = self.x_letters.size, self.y_letters.size
        self.ky = ky
        self.K = kx * ky
        pts = np.column_stack([np.repeat(self.x_letters, ky), np.tile(self.y_letters, kx)])
        self.points = pts
        ref = self.ref.ravel()
        adj = cdist(pts, pts) < self.eps
        ncomp, labels = connected_components(sparse.csr_array(adj), directed=False)
        sizes = np.bincount(labels, minlength=ncomp)
        self._single = np.nonzero(sizes[labels] == 1)[0]
        self._single_ref = ref[self._single]
        self._groups = []
        self._flow_groups = []
        for comp in np.nonzero(sizes > 1)[0]:
            idx = np.nonzero(labels == comp)[0]
            if idx.size <= SUBSET_LIMIT:
                S = _subset_matrix(idx.size)
                nbr = (S.astype(np.int32) @ adj[np.ix_(idx, idx)].astype(np.int32)) > 0
                self._groups.append((idx, S.astype(float).T, nbr.astype(float) @ ref[idx]))
            else:
                self._flow_groups.append((idx, adj[np.ix_(idx, idx)]))

    def counts(self, xi, yi) -> np.ndarray:
        """Joint letter counts, shape (N, K), for candidate rows xi against one yi."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.int64))
        yi = np.asarray(yi, dtype=np.int64)
        cells = xi * self.ky + yi[None, :]
        N = cells.shape[0]
        flat = cells + (np.arange(N, dtype=np.int64) * self.K)[:, None]
        return np.bincount(flat.ravel(), minlength=N * self.K).reshape(N, self.K)

    def deficiency(self, counts: np.ndarray, n: int) -> np.ndarray:
        e = np.atleast_2d(counts) / n
        d = np.clip(e[:, self._single] - self._single_ref, 0, None).sum(axis=1)
        for idx, St, nref in self._groups:
            d += np.clip((e[:, idx] @ St - nref).max(axis=1), 0, None)
        for idx, adj in self._flow_groups:
            r, c = np.nonzero(adj)
            ref = self.ref.ravel()[idx]
            d += np.array([_flow_deficiency(row, ref, r, c) for row in e[:, idx]])
        return d

    def typical_counts(self, counts: np.ndarray, n: int) -> np.ndarray:
        if self.eps >= 1:
            return np.ones(np.atleast_2d(counts).shape[0], dtype=bool)
        return self.deficiency(counts, n) < self.eps - TIE_TOL

    def typical(self, xi, yi) -> np.ndarray:
        yi = np.asarray(yi)
        return self.typical_counts(self.counts(xi, yi), yi.size)

    def reference_measure(self) -> FiniteMeasure:
        return FiniteMeasure.from_atoms(self.points, self.ref.ravel() / self.ref.sum())


def iter_chunks(total: int, size: int) -> Iterable[tuple[int, int]]:
    for start in range(0, total, size):
        yield start, min(total, start + size)
