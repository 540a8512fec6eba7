"""Small helpers for finite conditional tables and letter sequences."""

from __future__ import annotations

import numpy as np

NORM_TOL = 1e-12


def check_conditional(table: np.ndarray, name: str) -> np.ndarray:
    """Validate a table whose last axis is a pmf for every conditioning value."""
    t = np.asarray(table, dtype=float)
    if np.any(t < 0):
        raise ValueError(f"{name} has negative entries")
    if np.any(np.abs(t.sum(axis=-1) - 1) > NORM_TOL):
        raise ValueError(f"{name} is not normalised per conditioning value")
    return t


def sample_conditional(table: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one outcome index per entry of ``rows`` from ``table[rows]`` by inverse CDF."""
    cdf = np.cumsum(table[rows], axis=-1)
    r = rng.random(cdf.shape[:-1])
    idx = (r[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, table.shape[-1] - 1)


def letter_index(letters: np.ndarray, values, tol: float = 1e-9) -> np.ndarray:
    """Map real values to positions in a sorted alphabet; off-alphabet values raise."""
    values = np.asarray(values, dtype=float)
    pos = np.clip(np.searchsorted(letters, values), 0, letters.size - 1)
    lower = np.clip(pos - 1, 0, letters.size - 1)
    pick = np.where(np.abs(letters[lower] - values) < np.abs(letters[pos] - values), lower, pos)
    if np.any(np.abs(letters[pick] - values) > tol):
        raise ValueError("value outside the alphabet")
    return pick


def sorted_letters(values) -> np.ndarray:
    a = np.asarray(values, dtype=float).ravel()
    if np.any(np.diff(a) <= 0):
        raise ValueError("alphabet must be strictly increasing")
    return a
