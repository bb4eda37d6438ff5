"""The chain with kernels ``K_n = I + G/n`` (identity while ``n <= M``).

Simulation keeps step-by-step semantics: the move out of time ``j`` uses its
own uniform ``u_j`` and leaves state ``s`` exactly when
``j * u_j < -G[s, s]`` and ``j > M``.  Rather than looping in Python, the
positions satisfying that test are found with one vectorised comparison per
distinct exit rate, and the chain hops between them.  Destinations come from
a second stream, one uniform per switch.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_probability_vector, check_random_state
from .chains import ChainPath, GeneratorMatrix, jump_kernel, stationary_distributions, validate_generator
from .mccgem import DiscreteMeasure
from .stickcore import StickSequence


@dataclass(frozen=True)
class InhomSpec:
    """Generator, freeze cutoff ``M``, initial law ``pi`` and horizon ``n``.

    ``M`` defaults to ``ceil(theta_G) + 1``; any ``M`` with ``I + G/M``
    nonnegative is accepted.
    """

    g: GeneratorMatrix
    pi: np.ndarray
    n: int
    M: int | None = None

    def __post_init__(self):
        g = validate_generator(self.g)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "pi", check_probability_vector(self.pi, g.dim, "pi"))
        if self.M is None:
            object.__setattr__(self, "M", math.ceil(g.theta) + 1)
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        if np.any(np.eye(g.dim) + g.entries / self.M < -1e-12):
            raise ValueError(f"I + G/M has negative entries for M={self.M}; "
                             f"need M >= {g.theta}")
        if self.n < 1:
            raise ValueError("horizon n must be at least 1")

    def kernel(self, j: int) -> np.ndarray:
        """``K_j``."""
        eye = np.eye(self.g.dim)
        return eye if j <= self.M else eye + self.g.entries / j


@dataclass(frozen=True)
class ClumpExtract:
    """Sojourns up to time ``n`` listed from the most recent one backwards.

    ``tau[j]`` is the integer length of sojourn j, so its weight is exactly
    ``tau[j] / n``.  ``remaining[j]`` is the time left before the first j
    sojourns (``remaining[0] == n``).  Past the recorded sojourns the
    sequence is padded with zero weight and the first state.
    """

    tau: np.ndarray
    labels: np.ndarray
    n: int
    first_state: int

    @property
    def switch_count(self) -> int:
        """``N_n``: the 1-based index of the first switch after time ``n``."""
        return self.tau.size + 1

    @property
    def remaining(self) -> np.ndarray:
        return self.n - np.concatenate(([0], np.cumsum(self.tau)))

    @property
    def weights(self) -> StickSequence:
        return StickSequence(self.tau / self.n, 0.0)

    def padded(self, length: int) -> tuple[np.ndarray, np.ndarray]:
        """Weights and labels extended with the zero-weight padding to ``length`` entries."""
        w = np.zeros(max(length, self.tau.size))
        w[:self.tau.size] = self.tau / self.n
        lab = np.full(w.size, self.first_state, dtype=np.int64)
        lab[:self.tau.size] = self.labels
        return w[:length], lab[:length]

    def occupation_counts(self, k: int) -> np.ndarray:
        """Integer occupation counts regrouped from the sojourns."""
        counts = np.zeros(k, dtype=np.int64)
        np.add.at(counts, self.labels, self.tau)
        return counts


class ErgodicIterate(NamedTuple):
    mu_n: np.ndarray
    mu_n_q: np.ndarray
    history: np.ndarray | None


def _draw_state(p: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(np.cumsum(p), u, side="right")), p.size - 1)


def _switch_positions(spec: InhomSpec, step_u: np.ndarray) -> dict[float, np.ndarray]:
    """For each exit rate, the positions at which a chain with that rate would leave."""
    j = np.arange(1, step_u.size + 1, dtype=float)
    score = j * step_u
    score[:spec.M] = np.inf  # frozen while j <= M
    rates = -np.diag(spec.g.entries)
    return {r: np.flatnonzero(score < r) for r in np.unique(rates) if r > 0}


def _switches(spec: InhomSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Switch positions and the states entered there (position 0 holds the start)."""
    step_rng, jump_rng = rng.spawn(2)
    n = spec.n
    first = _draw_state(spec.pi, step_rng.random())
    step_u = step_rng.random(n - 1)
    cand = _switch_positions(spec, step_u)
    rates = -np.diag(spec.g.entries)
    cum = np.cumsum(jump_kernel(spec.g), axis=1)
    cum[:, -1] = 1.0

    positions = [0]
    states = [first]
    s, t = first, 0
    while True:
        r = rates[s]
        if r == 0:
            break
        c = cand[r]
        i = np.searchsorted(c, t)
        if i == c.size:
            break
        p = int(c[i])
        s = int(np.searchsorted(cum[s], jump_rng.random(), side="right"))
        t = p + 1
        positions.append(t)
        states.append(s)
    return np.asarray(positions, dtype=np.int64), np.asarray(states, dtype=np.int64)


def simulate_inhom(spec: InhomSpec, seed=None) -> ChainPath:
    """Run the chain for ``spec.n`` steps; position ``t`` is time ``t + 1``."""
    pos, states = _switches(spec, check_random_state(seed))
    lengths = np.diff(np.append(pos, spec.n))
    return ChainPath(np.repeat(states, lengths), spec.g.dim)


def simulate_inhom_loop(spec: InhomSpec, seed=None) -> ChainPath:
    """Plain per-step loop over the same random streams as :func:`simulate_inhom`.

    Slow; kept as a reference implementation.
    """
    rng = check_random_state(seed)
    step_rng, jump_rng = rng.spawn(2)
    n = spec.n
    s = _draw_state(spec.pi, step_rng.random())
    step_u = step_rng.random(n - 1)
    rates = -np.diag(spec.g.entries)
    cum = np.cumsum(jump_kernel(spec.g), axis=1)
    cum[:, -1] = 1.0
    out = np.empty(n, dtype=np.int64)
    out[0] = s
    for t in range(n - 1):
        j = t + 1
        if j > spec.M and step_u[t] < rates[s] / j:
            s = int(np.searchsorted(cum[s], jump_rng.random(), side="right"))
        out[t + 1] = s
    return ChainPath(out, spec.g.dim)


def reverse_clumps(path, n: int | None = None) -> ClumpExtract:
    """Sojourn lengths and states of ``path[:n]`` enumerated from time ``n`` backwards."""
    states = np.asarray(path.states if isinstance(path, ChainPath) else path)
    n = states.size if n is None else int(n)
    if not (1 <= n <= states.size):
        raise ValueError(f"n must lie in [1, {states.size}], got {n}")
    s = states[:n]
    starts = np.concatenate(([0], np.flatnonzero(s[1:] != s[:-1]) + 1))
    lengths = np.diff(np.append(starts, n))
    return ClumpExtract(lengths[::-1].astype(np.int64), s[starts][::-1].astype(np.int64), n, int(s[0]))


def occupation_measure(path, n: int | None = None, k: int | None = None) -> DiscreteMeasure:
    """Empirical law of the first ``n`` states."""
    states = np.asarray(path.states if isinstance(path, ChainPath) else path)
    n = states.size if n is None else int(n)
    if not (1 <= n <= states.size):
        raise ValueError(f"n must lie in [1, {states.size}], got {n}")
    if k is None:
        k = path.k if isinstance(path, ChainPath) and path.k is not None else int(states.max()) + 1
    counts = np.bincount(states[:n], minlength=k)
    return DiscreteMeasure(counts / n, 0.0)


def occupation_from_switches(spec: InhomSpec, seed=None) -> np.ndarray:
    """Occupation measure at horizon ``spec.n`` without materialising the path."""
    pos, states = _switches(spec, check_random_state(seed))
    lengths = np.diff(np.append(pos, spec.n))
    return np.bincount(states, weights=lengths, minlength=spec.g.dim) / spec.n


def _replicate_occupations(args) -> np.ndarray:
    spec, seed_base, lo, hi = args
    return np.array([occupation_from_switches(spec, [seed_base, r]) for r in range(lo, hi)])


def occupation_replicates(spec: InhomSpec, replicates: int, seed_base: int = 0,
                          n_jobs: int = 1) -> np.ndarray:
    """Occupation measures of independent runs, one row per replicate.

    Replicate ``r`` uses the seed ``[seed_base, r]`` regardless of ``n_jobs``,
    so rows are identical however the work is split.
    """
    if n_jobs <= 1 or replicates < 2 * n_jobs:
        return _replicate_occupations((spec, seed_base, 0, replicates))
    edges = np.linspace(0, replicates, n_jobs + 1).astype(int)
    jobs = [(spec, seed_base, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return np.vstack(list(pool.map(_replicate_occupations, jobs)))


def weak_ergodic_iterate(spec: InhomSpec, n: int | None = None, theta: float | None = None,
                         keep_history: bool = False) -> ErgodicIterate:
    """``mu^n = pi^T K_1 ... K_n`` and ``mu^n Q`` with ``Q = I + G/theta``.

    With ``keep_history`` the iterates ``mu^1 .. mu^n`` are returned as rows.
    """
    n = spec.n if n is None else int(n)
    g = spec.g.entries
    q = spec.g.kernel(theta)
    mu = spec.pi.copy()
    hist = np.empty((n, g.shape[0])) if keep_history else None
    for j in range(1, n + 1):
        if j > spec.M:
            mu = mu + (mu @ g) / j
        if hist is not None:
            hist[j - 1] = mu
    return ErgodicIterate(mu, mu @ q, hist)


def limiting_law(spec: InhomSpec) -> np.ndarray:
    """Stationary law the iterates converge to (requires a single recurrent class)."""
    mus = stationary_distributions(spec.g)
    if mus.shape[0] != 1:
        raise ValueError("several recurrent classes; the limit depends on pi")
    return mus[0]
