"""Input checking shared by the public modules."""

from __future__ import annotations

import numpy as np

ROW_SUM_TOL = 1e-9


def as_square_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_probability_vector(p, k: int | None = None, name: str = "probability vector",
                             tol: float = 1e-9) -> np.ndarray:
    """Return ``p`` as a float array after checking it is a distribution."""
    arr = np.array(p, dtype=float).ravel()
    if k is not None and arr.size != k:
        raise ValueError(f"{name} has length {arr.size}, expected {k}")
    if np.any(arr < -tol) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has negative or non-finite entries")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"{name} sums to {arr.sum()!r}, not 1")
    return np.clip(arr, 0.0, None)


def check_stochastic(q, name: str = "kernel", tol: float = ROW_SUM_TOL) -> np.ndarray:
    arr = as_square_matrix(q, name)
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    sums = arr.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ValueError(f"{name} rows must sum to 1 (max deviation {np.abs(sums - 1).max():.3g})")
    return arr


def check_fraction_values(x, name: str = "fractions") -> np.ndarray:
    arr = np.array(x, dtype=float).ravel()
    if not np.all(np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def check_random_state(seed) -> np.random.Generator:
    """Turn ``None``, an int, a seed sequence or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
