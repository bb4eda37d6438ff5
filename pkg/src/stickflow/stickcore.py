"""Residual allocation models: building, inverting, clumping and sampling.

A residual allocation model (RAM) turns fractions ``x_1, x_2, ...`` in [0, 1]
into weights ``p_j = x_j * prod_{i<j} (1 - x_i)``.  Infinite sequences are
held as a finite prefix plus the mass that was never handed out
(``tail_mass``).  Nothing here renormalises; callers decide what to do with
the tail.

Indices are 0-based throughout.  Clump boundaries are positions into the
fraction list, and ``math.inf`` marks a block that absorbs everything after
it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ._validation import check_fraction_values, check_random_state

DEFAULT_EPS = 1e-12
# below this factor a running product of (1 - x) is accumulated in logs
_LOG_SPACE_FACTOR = 1e-8


# --------------------------------------------------------------------------
# fraction laws


@dataclass(frozen=True)
class Gem:
    """iid Beta(1, theta) fractions."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"GEM requires theta > 0, got {self.theta!r}")

    def draw(self, rng: np.random.Generator, start: int, size: int) -> np.ndarray:
        return rng.beta(1.0, self.theta, size=size)


@dataclass(frozen=True)
class Disordered:
    """Independent Beta(1, theta_j) fractions for a given finite list of theta_j.

    ``theta_j = 0`` means the point mass at 1 and is only accepted when
    ``allow_zero`` is set.
    """

    thetas: tuple[float, ...]
    allow_zero: bool = False

    def __post_init__(self):
        th = tuple(float(t) for t in self.thetas)
        object.__setattr__(self, "thetas", th)
        bad = [t for t in th if not (t > 0 or (self.allow_zero and t == 0))]
        if bad:
            raise ValueError(f"disordered GEM parameters must be > 0, got {bad[0]!r}")

    def draw(self, rng: np.random.Generator, start: int, size: int) -> np.ndarray:
        th = np.asarray(self.thetas[start:start + size], dtype=float)
        if th.size == 0:
            return th
        zero = th == 0
        # draw for every slot so the stream does not depend on where zeros are
        x = rng.beta(1.0, np.where(zero, 1.0, th))
        x[zero] = 1.0
        return x


@dataclass(frozen=True)
class TwoParam:
    """Two-parameter GEM(alpha, theta): X_j ~ Beta(1 - alpha, theta + j*alpha), j >= 1."""

    alpha: float
    theta: float

    def __post_init__(self):
        if not (0 <= self.alpha < 1):
            raise ValueError(f"two-parameter GEM requires 0 <= alpha < 1, got {self.alpha!r}")
        if not self.theta > -self.alpha:
            raise ValueError(f"two-parameter GEM requires theta > -alpha, got {self.theta!r}")

    def draw(self, rng: np.random.Generator, start: int, size: int) -> np.ndarray:
        j = np.arange(start + 1, start + size + 1, dtype=float)
        return rng.beta(1.0 - self.alpha, self.theta + j * self.alpha)


@dataclass(frozen=True)
class Custom:
    """Deterministic fractions, optionally repeated cyclically forever."""

    values: tuple[float, ...]
    repeat: bool = False

    def __post_init__(self):
        vals = tuple(float(v) for v in check_fraction_values(self.values, "custom fractions"))
        if self.repeat and not vals:
            raise ValueError("cannot repeat an empty fraction list")
        object.__setattr__(self, "values", vals)

    def draw(self, rng: np.random.Generator, start: int, size: int) -> np.ndarray:
        vals = np.asarray(self.values, dtype=float)
        if self.repeat:
            return vals[np.arange(start, start + size) % vals.size]
        return vals[start:start + size]


FractionLaw = Union[Gem, Disordered, TwoParam, Custom]


def law_from_dict(spec: dict) -> FractionLaw:
    """Build a law from its JSON form, e.g. ``{"gem": 2.0}`` or ``{"two_param": [0.5, 1]}``."""
    if len(spec) != 1:
        raise ValueError(f"law must have exactly one key, got {sorted(spec)}")
    (kind, arg), = spec.items()
    if kind == "gem":
        return Gem(float(arg))
    if kind == "disordered":
        return Disordered(tuple(arg))
    if kind == "two_param":
        alpha, theta = arg
        return TwoParam(float(alpha), float(theta))
    if kind == "custom":
        return Custom(tuple(arg))
    if kind == "constant":
        return Custom((float(arg),), repeat=True)
    raise ValueError(f"unknown law {kind!r}")


def law_to_dict(law: FractionLaw | None) -> dict | None:
    if law is None:
        return None
    if isinstance(law, Gem):
        return {"gem": law.theta}
    if isinstance(law, Disordered):
        return {"disordered": list(law.thetas)}
    if isinstance(law, TwoParam):
        return {"two_param": [law.alpha, law.theta]}
    if law.repeat and len(law.values) == 1:
        return {"constant": law.values[0]}
    return {"custom": list(law.values)}


# --------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class FractionSequence:
    """A finite prefix of RAM fractions together with the law that produced it."""

    values: np.ndarray
    law: FractionLaw | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", check_fraction_values(self.values))

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class StickSequence:
    """Weights of a (truncated) RAM plus the mass that was never assigned."""

    weights: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not (0.0 <= self.tail_mass <= 1.0 + 1e-12):
            raise ValueError(f"tail_mass must lie in [0, 1], got {self.tail_mass!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    def __len__(self) -> int:
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    @property
    def total(self) -> float:
        return float(self.weights.sum() + self.tail_mass)


@dataclass(frozen=True)
class ClumpIndex:
    """Block start positions: ``boundaries[0] == 0``, strictly increasing, ``inf`` sticky."""

    boundaries: tuple[float, ...] = field(default=(0,))

    def __post_init__(self):
        b = tuple(math.inf if math.isinf(v) else int(v) for v in self.boundaries)
        if not b or b[0] != 0:
            raise ValueError("clump boundaries must start at position 0")
        for prev, cur in zip(b, b[1:]):
            if math.isinf(prev):
                if not math.isinf(cur):
                    raise ValueError("once a boundary is infinite all later ones must be")
            elif not cur > prev:
                raise ValueError("clump boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def regular(cls, step: int, length: int) -> "ClumpIndex":
        """Blocks of ``step`` consecutive indices covering ``length`` positions."""
        return cls(tuple(range(0, length, step)))

    def compose(self, other: "ClumpIndex") -> "ClumpIndex":
        """Boundaries of clumping by ``self`` and then by ``other``."""
        out = []
        for v in other.boundaries:
            if math.isinf(v):
                out.append(math.inf)
            elif v >= len(self.boundaries):
                raise ValueError(f"block {v} does not exist in a {len(self.boundaries)}-block index")
            else:
                out.append(self.boundaries[int(v)])
        return ClumpIndex(tuple(out))


# --------------------------------------------------------------------------
# operations


def _remaining_products(x: np.ndarray) -> np.ndarray:
    """Running products prod_{i<=j} (1 - x_i)."""
    one_minus = 1.0 - x
    if np.any((one_minus > 0) & (one_minus < _LOG_SPACE_FACTOR)):
        with np.errstate(divide="ignore"):
            return np.exp(np.cumsum(np.log(one_minus)))
    return np.cumprod(one_minus)


def ram_from_fractions(x, eps: float = DEFAULT_EPS) -> StickSequence:
    """Weights ``x_j * prod_{i<j}(1 - x_i)``, stopping once the remainder drops below ``eps``.

    ``x`` may be a :class:`FractionSequence` or any array of values in [0, 1].
    """
    if not (0.0 <= eps < 1.0):
        raise ValueError(f"eps must lie in [0, 1), got {eps!r}")
    x = check_fraction_values(np.asarray(x))
    if x.size == 0:
        return StickSequence(np.empty(0), 1.0)
    rem = _remaining_products(x)
    below = np.flatnonzero(rem < eps)
    cut = below[0] + 1 if below.size else x.size
    rem = rem[:cut]
    before = np.concatenate(([1.0], rem[:-1]))
    return StickSequence(x[:cut] * before, float(rem[-1]))


def fractions_from_weights(p, law: FractionLaw | None = None) -> FractionSequence:
    """Invert :func:`ram_from_fractions`.

    Positions with no mass left to share get fraction 1.  A plain array is
    treated as a stick whose tail is whatever it leaves unassigned.
    """
    if isinstance(p, StickSequence):
        w, tail = p.weights, p.tail_mass
    else:
        w = np.array(p, dtype=float).ravel()
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        tail = max(0.0, 1.0 - float(w.sum()))
    if w.sum() + tail > 1.0 + 1e-12:
        raise ValueError(f"weights plus tail exceed 1 ({w.sum() + tail!r})")
    # remaining mass before j, summed from the back for accuracy
    remaining = np.cumsum(w[::-1])[::-1] + tail
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(remaining > 0, w / remaining, 1.0)
    return FractionSequence(np.clip(x, 0.0, 1.0), law)


def clump(x, u: ClumpIndex) -> tuple[StickSequence, FractionSequence]:
    """Clump a RAM into consecutive blocks and return the clumped weights and fractions.

    The fraction of a finite block ``[a, b)`` is ``1 - prod_{a<=i<b}(1 - x_i)``.
    A block running to infinity has fraction 1 and takes the tail mass with
    it.  Finite blocks reaching past the known prefix use what is available
    and leave the tail in place; blocks starting past the prefix are dropped.
    """
    x = check_fraction_values(np.asarray(x))
    bounds = list(u.boundaries)
    length = x.size
    fracs: list[float] = []
    for j, start in enumerate(bounds):
        if math.isinf(start):
            fracs.append(1.0)
            continue
        if start >= length:
            break
        end = bounds[j + 1] if j + 1 < len(bounds) else length
        if math.isinf(end):
            fracs.append(1.0)
            continue
        end = min(int(end), length)
        if end - start == 1:
            fracs.append(float(x[start]))
        else:
            fracs.append(1.0 - float(_remaining_products(x[start:end])[-1]))
    xu = np.asarray(fracs, dtype=float)
    return ram_from_fractions(xu, eps=0.0), FractionSequence(xu)


def sample_stick(law: FractionLaw, seed=None, eps: float = DEFAULT_EPS,
                 max_terms: int = 10**7) -> StickSequence:
    """Draw a RAM from ``law``, truncated once the unassigned mass falls below ``eps``.

    The same ``law``, ``seed`` and ``eps`` always give the same sequence.
    Finite laws (a finite disordered list, a non-repeating custom list) stop
    when their fractions run out and report what is left as tail mass.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    rng = check_random_state(seed)
    log_eps = math.log(eps)
    pieces = []
    log_rem = 0.0
    start = 0
    chunk = 32
    while start < max_terms:
        xs = law.draw(rng, start, min(chunk, max_terms - start))
        if xs.size == 0:
            break
        with np.errstate(divide="ignore"):
            lr = log_rem + np.cumsum(np.log1p(-xs))
        hit = np.flatnonzero(lr < log_eps)
        if hit.size:
            pieces.append(xs[:hit[0] + 1])
            break
        pieces.append(xs)
        log_rem = float(lr[-1])
        start += xs.size
        chunk = min(chunk * 2, 4096)
    x = np.concatenate(pieces) if pieces else np.empty(0)
    return ram_from_fractions(x, eps=eps)


def sample_fractions(law: FractionLaw, size: int, seed=None) -> FractionSequence:
    """Draw exactly ``size`` fractions (fewer if a finite law runs out)."""
    rng = check_random_state(seed)
    return FractionSequence(law.draw(rng, 0, size), law)


def as_stick(p: Union[StickSequence, Sequence[float], np.ndarray]) -> StickSequence:
    if isinstance(p, StickSequence):
        return p
    w = np.array(p, dtype=float).ravel()
    return StickSequence(w, max(0.0, 1.0 - float(w.sum())))
