"""MCcGEM joint laws, clumping by switch times, and discrete random measures."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_probability_vector, check_random_state
from .chains import (
    ChainPath,
    GeneratorMatrix,
    jump_kernel,
    sample_homogeneous,
    switch_and_return_times,
    validate_generator,
)
from .stickcore import (
    DEFAULT_EPS,
    StickSequence,
    as_stick,
    fractions_from_weights,
    ram_from_fractions,
    sample_stick,
)


@dataclass(frozen=True)
class MccgemSample:
    weights: StickSequence
    labels: np.ndarray
    generator: GeneratorMatrix
    init: np.ndarray

    @property
    def fractions(self) -> np.ndarray:
        return fractions_from_weights(self.weights).values


class ClumpedPair(NamedTuple):
    weights: StickSequence
    labels: np.ndarray


@dataclass(frozen=True)
class DiscreteMeasure:
    """Masses on states ``0..k-1`` plus the mass lost to truncation."""

    masses: np.ndarray
    deficit: float = 0.0

    def __post_init__(self):
        m = np.array(self.masses, dtype=float).ravel()
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "deficit", float(self.deficit))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.masses, dtype=dtype)

    @property
    def k(self) -> int:
        return self.masses.size

    def to_dict(self) -> dict:
        return {"masses": self.masses.tolist(), "deficit": self.deficit}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["state", "mass"])
        for i, m in enumerate(self.masses):
            writer.writerow([i, repr(float(m))])
        writer.writerow(["deficit", repr(self.deficit)])
        return buf.getvalue()


def sample_mccgem(g, init, eps: float = DEFAULT_EPS, seed=None,
                  max_terms: int = 10**7) -> MccgemSample:
    """Draw (P, Y) from the MCcGEM(G) law started from ``init``.

    Labels run as a chain with the jump kernel of ``g``; given the labels,
    fraction j is Beta(1, -G[y_j, y_j]), with Beta(1, 0) read as the point
    mass at 1.  Sampling stops once the unassigned mass is below ``eps``.
    """
    gen = validate_generator(g)
    k = gen.dim
    p0 = check_probability_vector(init, k, "init")
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    rng = check_random_state(seed)
    cum = np.cumsum(jump_kernel(gen), axis=1)
    cum[:, -1] = 1.0
    rates = -np.diag(gen.entries)
    log_eps = math.log(eps)

    labels = []
    fracs = []
    log_rem = 0.0
    s = min(int(np.searchsorted(np.cumsum(p0), rng.random(), side="right")), k - 1)
    while len(labels) < max_terms:
        labels.append(s)
        rate = rates[s]
        x = 1.0 if rate == 0 else rng.beta(1.0, rate)
        fracs.append(x)
        log_rem += math.log1p(-x) if x < 1.0 else -math.inf
        if log_rem < log_eps:
            break
        s = int(np.searchsorted(cum[s], rng.random(), side="right"))
    stick = ram_from_fractions(np.asarray(fracs), eps=eps)
    return MccgemSample(stick, np.asarray(labels, dtype=np.int64), gen, p0)


def clump_by_switches(p, path) -> ClumpedPair:
    """Sum the weights of ``p`` over the sojourns of ``path``.

    Block j covers positions ``V_j .. V_{j+1} - 1`` and carries the label
    ``path[V_j]``.  Weights at positions the path does not reach are moved
    into the tail mass.
    """
    p = as_stick(p)
    states = np.asarray(path.states if isinstance(path, ChainPath) else path)
    covered = min(len(p), states.size)
    w = p.weights[:covered]
    tail = p.tail_mass + float(p.weights[covered:].sum())
    if covered == 0:
        return ClumpedPair(StickSequence(np.empty(0), min(tail, 1.0)), np.empty(0, dtype=np.int64))
    v = switch_and_return_times(states[:covered]).switches
    return ClumpedPair(StickSequence(np.add.reduceat(w, v), min(tail, 1.0)), states[v])


def assemble_measure(weights, labels, k: int) -> DiscreteMeasure:
    """``masses[l] = sum_j weights[j] * [labels[j] == l]``; the tail becomes the deficit."""
    p = as_stick(weights)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size < len(p):
        raise ValueError(f"{len(p)} weights but only {labels.size} labels")
    labels = labels[:len(p)]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"label out of range for k={k}")
    masses = np.bincount(labels, weights=p.weights, minlength=k)
    return DiscreteMeasure(masses, p.tail_mass)


def stick_breaking_measure(law, q, init, k: int | None = None, eps: float = DEFAULT_EPS,
                           seed=None) -> DiscreteMeasure:
    """``sum_j P_j delta_{T_j}`` with P from ``law`` and T an independent chain with kernel ``q``."""
    rng = check_random_state(seed)
    stick = sample_stick(law, rng, eps)
    q = np.asarray(q, dtype=float)
    k = q.shape[0] if k is None else k
    if len(stick) == 0:
        return DiscreteMeasure(np.zeros(k), stick.tail_mass)
    path = sample_homogeneous(q, init, len(stick), rng)
    return assemble_measure(stick, path.states, k)
