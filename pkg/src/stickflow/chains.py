"""Finite-state Markov chains, generator matrices and switch-time bookkeeping.

States are 0-based matrix indices.  Paths are stored as integer arrays whose
position ``t`` corresponds to time ``t + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from ._validation import (
    ROW_SUM_TOL,
    as_square_matrix,
    check_probability_vector,
    check_random_state,
    check_stochastic,
)


@dataclass(frozen=True)
class GeneratorMatrix:
    """A validated generator: nonnegative off-diagonal entries and zero row sums."""

    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def zero_rows(self) -> np.ndarray:
        """Indices of absorbing states (rows that are identically zero)."""
        return np.flatnonzero(np.all(self.entries == 0, axis=1))

    @property
    def theta(self) -> float:
        """``max_i |G_ii|``, the smallest theta making ``I + G/theta`` nonnegative."""
        return float(np.max(np.abs(np.diag(self.entries))))

    def kernel(self, theta: float | None = None) -> np.ndarray:
        """The stochastic kernel ``Q = I + G/theta``."""
        theta = self.theta if theta is None else float(theta)
        if theta < self.theta - 1e-12 or theta <= 0:
            raise ValueError(f"I + G/theta is not stochastic for theta={theta!r} "
                             f"(need theta >= {self.theta!r})")
        q = np.eye(self.dim) + self.entries / theta
        return np.clip(q, 0.0, None)


class ChainPath(NamedTuple):
    states: np.ndarray
    k: int | None = None

    def __len__(self) -> int:
        return len(self.states)


class SwitchTimes(NamedTuple):
    switches: np.ndarray
    returns: np.ndarray
    labels: np.ndarray


def validate_generator(g, tol: float = ROW_SUM_TOL) -> GeneratorMatrix:
    """Check ``g`` is a generator matrix and wrap it.

    Raises ``ValueError`` for a negative off-diagonal entry or a row that does
    not sum to zero within ``tol``.
    """
    if isinstance(g, GeneratorMatrix):
        return g
    arr = as_square_matrix(g, "generator")
    if arr.shape[0] < 1:
        raise ValueError("generator must have at least one state")
    off = arr[~np.eye(arr.shape[0], dtype=bool)]
    if np.any(off < 0):
        raise ValueError("generator has a negative off-diagonal entry")
    sums = arr.sum(axis=1)
    if np.any(np.abs(sums) > tol):
        raise ValueError(f"generator rows must sum to 0 (max deviation {np.abs(sums).max():.3g})")
    return GeneratorMatrix(arr)


def generator_from_kernel(q, theta: float) -> GeneratorMatrix:
    """``theta * (Q - I)``."""
    q = check_stochastic(q)
    if not theta > 0:
        raise ValueError("theta must be positive")
    g = theta * (q - np.eye(q.shape[0]))
    # diagonal from the off-diagonal sums, so rows cancel to rounding
    np.fill_diagonal(g, 0.0)
    np.fill_diagonal(g, -g.sum(axis=1))
    return GeneratorMatrix(g)


def _as_generator_array(x) -> np.ndarray:
    """Accept a stochastic kernel or a generator and return a generator array."""
    if isinstance(x, GeneratorMatrix):
        return x.entries
    arr = as_square_matrix(x)
    sums = arr.sum(axis=1)
    if np.all(np.abs(sums) <= ROW_SUM_TOL):
        return validate_generator(arr).entries
    return check_stochastic(arr) - np.eye(arr.shape[0])


def communicating_classes(x) -> list[np.ndarray]:
    """Strongly connected components of the positive-transition graph."""
    g = _as_generator_array(x)
    adj = (g > 0) & ~np.eye(g.shape[0], dtype=bool)
    n, labels = connected_components(adj.astype(int), directed=True, connection="strong")
    return [np.flatnonzero(labels == c) for c in range(n)]


def recurrent_classes(x) -> list[np.ndarray]:
    """Closed communicating classes (the recurrent ones on a finite space)."""
    g = _as_generator_array(x)
    out = []
    for cls in communicating_classes(g):
        outside = np.setdiff1d(np.arange(g.shape[0]), cls)
        if not np.any(g[np.ix_(cls, outside)] > 0):
            out.append(cls)
    return out


def is_irreducible(x) -> bool:
    return len(communicating_classes(x)) == 1


def stationary_distributions(x, tol: float = 1e-10) -> np.ndarray:
    """One stationary law per recurrent class, stacked as rows.

    Each row is the extreme point supported on one closed class.  ``x`` may
    be a stochastic kernel or a generator.
    """
    g = _as_generator_array(x)
    k = g.shape[0]
    rows = []
    for cls in recurrent_classes(g):
        sub = g[np.ix_(cls, cls)]
        a = np.vstack([sub.T, np.ones(cls.size)])
        b = np.zeros(cls.size + 1)
        b[-1] = 1.0
        sol, *_ = np.linalg.lstsq(a, b, rcond=None)
        if np.abs(a @ sol - b).max() > 1e-8 or np.any(sol < -1e-9):
            raise np.linalg.LinAlgError("stationary system is numerically degenerate")
        mu = np.zeros(k)
        mu[cls] = np.clip(sol, 0.0, None)
        mu /= mu.sum()
        rows.append(mu)
    out = np.array(rows)
    if np.abs(out @ g).max() > tol * max(1.0, np.abs(g).max()):
        raise np.linalg.LinAlgError("stationary solve did not converge")
    return out


def stationary_distribution(x) -> np.ndarray:
    """The unique stationary distribution; use :func:`stationary_distributions` otherwise."""
    mus = stationary_distributions(x)
    if mus.shape[0] != 1:
        raise ValueError(f"chain has {mus.shape[0]} recurrent classes; "
                         "call stationary_distributions for all of them")
    return mus[0]


def _cumulative_rows(q: np.ndarray) -> np.ndarray:
    c = np.cumsum(q, axis=1)
    c[:, -1] = 1.0
    return c


def sample_homogeneous(q, init, n: int, seed=None) -> ChainPath:
    """Run a homogeneous chain with kernel ``q`` for ``n`` steps from ``init``.

    ``init`` is a distribution or a single state index.
    """
    q = check_stochastic(q)
    k = q.shape[0]
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = check_random_state(seed)
    if np.isscalar(init):
        p0 = np.zeros(k)
        p0[int(init)] = 1.0
    else:
        p0 = check_probability_vector(init, k, "init")
    cum = _cumulative_rows(q)
    u = rng.random(n)
    states = np.empty(n, dtype=np.int64)
    s = int(np.searchsorted(np.cumsum(p0), u[0], side="right"))
    states[0] = min(s, k - 1)
    for t in range(1, n):
        s = int(np.searchsorted(cum[s], u[t], side="right"))
        states[t] = s
    return ChainPath(states, k)


def switch_and_return_times(path) -> SwitchTimes:
    """Switch positions V, return positions W and the visited labels Y.

    V holds position 0 and every position whose state differs from the one
    before; W holds position 0 and every position revisiting the first
    state; ``Y = states[V]``.  All positions are 0-based.
    """
    states = np.asarray(path.states if isinstance(path, ChainPath) else path)
    if states.size == 0:
        raise ValueError("path is empty")
    switches = np.concatenate(([0], np.flatnonzero(states[1:] != states[:-1]) + 1))
    returns = np.flatnonzero(states == states[0])
    return SwitchTimes(switches, returns, states[switches])


def jump_kernel(x) -> np.ndarray:
    """Kernel of the chain observed only at its switch times.

    From a stochastic ``Q``: ``Q[z, w] / (1 - Q[z, z])`` off the diagonal, and
    1 on the diagonal of absorbing rows.  From a generator ``G``:
    ``G[w, z] / -G[w, w]``, and 1 on the diagonal of zero rows.
    """
    g = _as_generator_array(x)
    k = g.shape[0]
    rates = -np.diag(g)
    out = np.zeros((k, k))
    moving = rates > 0
    off = g.copy()
    np.fill_diagonal(off, 0.0)
    out[moving] = off[moving] / rates[moving, None]
    absorbing = np.flatnonzero(~moving)
    out[absorbing, absorbing] = 1.0
    return out


def reverse_generator(g, mu, tol: float = 1e-9) -> GeneratorMatrix:
    """Time-reversed generator ``G'[i, j] = mu_j / mu_i * G[j, i]`` on the support of ``mu``.

    Rows with ``mu_i = 0`` are zero rows.  ``mu`` must be stationary for ``g``.
    """
    g = validate_generator(g).entries
    mu = check_probability_vector(mu, g.shape[0], "mu")
    if np.abs(mu @ g).max() > tol * max(1.0, np.abs(g).max()):
        raise ValueError("mu is not stationary for the generator")
    pos = mu > 0
    out = np.zeros_like(g)
    ratio = np.zeros_like(g)
    ratio[pos] = mu[None, :] / mu[pos, None]
    out[pos] = ratio[pos] * g.T[pos]
    # restore exact zero row sums on the support
    np.fill_diagonal(out, 0.0)
    np.fill_diagonal(out, -out.sum(axis=1))
    return validate_generator(out, tol=1e-8)
