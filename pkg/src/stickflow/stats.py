"""Monte Carlo estimates and the statistical checks built on them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import stats as sps

from ._validation import check_stochastic
from .chains import recurrent_classes, sample_homogeneous
from .mccgem import assemble_measure
from .stickcore import DEFAULT_EPS, ClumpIndex, FractionLaw, Gem, clump, sample_fractions, sample_stick

KS_ALPHA_STRICT = 0.001
KS_ALPHA_REPORT = 0.01
MOMENT_SIGMAS = 4.0
CYCLE_CAP = 10**6


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    replicates: int
    seed_base: int

    def agrees_with(self, target: float, sigmas: float = MOMENT_SIGMAS) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr


@dataclass
class CheckReport:
    """Outcome of one statistical check, in the JSON report shape."""

    check: str
    params: dict
    statistic: float
    p_value: float
    passed: bool
    seed: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def replicate_rng(seed_base: int, r: int) -> np.random.Generator:
    """Generator for replicate ``r`` of a run seeded with ``seed_base``."""
    return np.random.default_rng([seed_base, r])


def estimate(samples) -> tuple[float, float]:
    """Sample mean and its standard error."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples for a standard error")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def mc_estimate(sampler: Callable[[np.random.Generator], object],
                functional: Callable[[object], float],
                replicates: int, seed_base: int = 0) -> McEstimate:
    """Mean and standard error of ``functional(sampler(rng))`` over seeded replicates."""
    if replicates < 2:
        raise ValueError("replicates must be at least 2")
    vals = np.empty(replicates)
    for r in range(replicates):
        try:
            vals[r] = functional(sampler(replicate_rng(seed_base, r)))
        except Exception as exc:
            raise RuntimeError(f"sampler failed on replicate {r}") from exc
    mean, se = estimate(vals)
    return McEstimate(mean, se, replicates, seed_base)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic with its asymptotic p-value."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("KS test needs two nonempty samples")
    res = sps.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def moments_agree(a, b, sigmas: float = MOMENT_SIGMAS) -> tuple[bool, float, float]:
    """Compare two independent sample means; returns (ok, difference, combined stderr)."""
    ma, sa = estimate(a)
    mb, sb = estimate(b)
    se = math.hypot(sa, sb)
    diff = ma - mb
    return abs(diff) <= sigmas * se, diff, se


# --------------------------------------------------------------------------
# clumped fraction law


def _first_sojourn(q: np.ndarray, y: int, rng: np.random.Generator) -> int:
    """Number of steps the chain started at ``y`` spends there before its first switch."""
    chunk = 16
    length = 0
    while True:
        states = sample_homogeneous(q, y, chunk + 1, rng).states[1:]
        moved = np.flatnonzero(states != y)
        if moved.size:
            return length + 1 + int(moved[0])
        length += chunk
        if length > CYCLE_CAP:
            raise RuntimeError(f"no switch from state {y} within {CYCLE_CAP} steps")
        chunk *= 2


def clumped_draw(theta: float, q: np.ndarray, y: int, rng: np.random.Generator) -> tuple[float, float]:
    """One draw of ``X^V_1`` given ``Y_1 = y``, with ``-log(1 - X^V_1)`` alongside.

    GEM(theta) is clumped by a chain started at y.  The first block only
    involves the fractions inside the first sojourn, so exactly those are
    drawn; no eps truncation enters.  The log complement is summed directly
    and keeps full precision where ``X^V_1`` itself rounds to 1.
    """
    length = _first_sojourn(q, y, rng)
    x = sample_fractions(Gem(theta), length, rng).values
    _, xu = clump(x, ClumpIndex((0, length)))
    with np.errstate(divide="ignore"):
        z = -float(np.sum(np.log1p(-x)))
    return float(xu.values[0]), z


def first_clumped_fraction(theta: float, q: np.ndarray, y: int, rng: np.random.Generator) -> float:
    return clumped_draw(theta, q, y, rng)[0]


def clumped_fraction_beta_check(theta: float, q, y: int, replicates: int = 10_000,
                                seed: int = 0, alpha: float = KS_ALPHA_STRICT) -> CheckReport:
    """KS test of the first switch-clumped GEM(theta) fraction against Beta(1, theta (1 - Q_yy)).

    The test runs on ``-log(1 - X)`` against Exp(rate b), which is the same
    hypothesis: ``1 - (1 - x)^b`` is the Beta(1, b) CDF.  For small b a few
    percent of Beta(1, b) mass lies within 1e-16 of 1 and would collapse
    onto a tied atom at 1.0 in floating point, biasing the raw-scale KS
    statistic.
    """
    q = check_stochastic(q)
    if q[y, y] >= 1.0:
        raise ValueError(f"state {y} is absorbing; its clumped fraction is identically 1")
    shape_b = float(theta * (1.0 - q[y, y]))
    draws = np.array([clumped_draw(theta, q, y, replicate_rng(seed, r)) for r in range(replicates)])
    params = {"theta": theta, "q": q.tolist(), "y": y, "replicates": replicates,
              "alpha": alpha, "beta_b": shape_b}
    if draws.shape[0] < 100:
        return CheckReport("clumped_fraction_beta", params, math.nan, math.nan, False, seed,
                           {"reason": f"only {draws.shape[0]} conditional samples"})
    res = sps.kstest(draws[:, 1], sps.expon(scale=1.0 / shape_b).cdf, method="asymp")
    return CheckReport("clumped_fraction_beta", params, float(res.statistic), float(res.pvalue),
                       bool(res.pvalue >= alpha), seed,
                       {"mean": float(draws[:, 0].mean()), "beta_mean": 1.0 / (1.0 + shape_b)})


# --------------------------------------------------------------------------
# self-similarity


@dataclass(frozen=True)
class SelfSimSpec:
    fraction_law: FractionLaw
    kernel: np.ndarray
    start_state: int
    eps: float = DEFAULT_EPS
    replicates: int = 10_000

    def __post_init__(self):
        q = check_stochastic(self.kernel)
        object.__setattr__(self, "kernel", q)
        recurrent = np.concatenate(recurrent_classes(q))
        if self.start_state not in recurrent:
            raise ValueError(f"start state {self.start_state} is not recurrent")


def _direct_self_sim(spec: SelfSimSpec, rng: np.random.Generator) -> np.ndarray:
    """``sum_j P_j delta_{T_j}`` with ``T_1 = i``."""
    k = spec.kernel.shape[0]
    stick = sample_stick(spec.fraction_law, rng, spec.eps)
    path = sample_homogeneous(spec.kernel, spec.start_state, max(len(stick), 1), rng)
    return assemble_measure(stick, path.states, k).masses


def _cycle_path(q: np.ndarray, i: int, rng: np.random.Generator, min_len: int) -> np.ndarray:
    """Chain from ``i`` run at least ``min_len`` steps and until its first return to ``i``."""
    chunk = max(min_len, 16)
    states = sample_homogeneous(q, i, chunk, rng).states
    while not np.any(states[1:] == i):
        if states.size > CYCLE_CAP:
            raise RuntimeError(f"no return to state {i} within {CYCLE_CAP} steps")
        more = sample_homogeneous(q, int(states[-1]), chunk + 1, rng).states[1:]
        states = np.concatenate([states, more])
        chunk *= 2
    return states


def _composite_self_sim(spec: SelfSimSpec, rng: np.random.Generator) -> np.ndarray:
    """``X^i eta^i + (1 - X^i) nu~`` from one return cycle and a fresh direct draw."""
    k = spec.kernel.shape[0]
    stick = sample_stick(spec.fraction_law, rng, spec.eps)
    path = _cycle_path(spec.kernel, spec.start_state, rng, len(stick))
    ret = 1 + int(np.flatnonzero(path[1:] == spec.start_state)[0])
    inside = min(ret, len(stick))
    w = stick.weights[:inside]
    cycle_part = np.bincount(path[:inside], weights=w, minlength=k)
    x_cycle = float(w.sum())
    fresh = _direct_self_sim(spec, rng)
    return cycle_part + (1.0 - x_cycle) * fresh


def self_similarity_check(spec: SelfSimSpec, seed: int = 0,
                          alpha: float = KS_ALPHA_REPORT) -> CheckReport:
    """Sample the measure directly and through its one-cycle decomposition, then compare.

    Passes when every coordinate's mean and second moment agree within four
    combined standard errors and no per-coordinate KS test rejects at ``alpha``.
    """
    r = spec.replicates
    direct = np.array([_direct_self_sim(spec, replicate_rng(seed, 2 * j)) for j in range(r)])
    comp = np.array([_composite_self_sim(spec, replicate_rng(seed, 2 * j + 1)) for j in range(r)])
    k = direct.shape[1]
    coords = []
    ok = True
    worst_p = 1.0
    worst_stat = 0.0
    for c in range(k):
        m1_ok, d1, s1 = moments_agree(direct[:, c], comp[:, c])
        m2_ok, d2, s2 = moments_agree(direct[:, c] ** 2, comp[:, c] ** 2)
        stat, pval = ks_two_sample(direct[:, c], comp[:, c])
        if np.all(direct[:, c] == direct[0, c]) and np.all(comp[:, c] == direct[0, c]):
            m1_ok = m2_ok = True
            stat, pval = 0.0, 1.0
        c_ok = m1_ok and m2_ok and pval >= alpha
        ok &= c_ok
        if pval < worst_p:
            worst_p, worst_stat = pval, stat
        coords.append({"state": c, "mean_diff": d1, "mean_se": s1, "second_diff": d2,
                       "second_se": s2, "ks": stat, "p_value": pval, "pass": c_ok})
    params = {"law": repr(spec.fraction_law), "kernel": spec.kernel.tolist(),
              "start_state": spec.start_state, "replicates": r, "alpha": alpha}
    return CheckReport("self_similarity", params, worst_stat, worst_p, bool(ok), seed,
                       {"coordinates": coords})


def w_clumped_exchangeability(law: FractionLaw, q, start: int, replicates: int = 10_000,
                              seed: int = 0, alpha: float = KS_ALPHA_STRICT) -> CheckReport:
    """KS test that the first two return-time clumped fractions share a law."""
    q = check_stochastic(q)
    first, second = [], []
    for r in range(replicates):
        rng = replicate_rng(seed, r)
        path = _cycle_path(q, start, rng, 2)
        while np.count_nonzero(path[1:] == start) < 2:
            path = np.concatenate([path, _cycle_path(q, start, rng, 2)[1:]])
        rets = np.flatnonzero(path == start)
        x = sample_fractions(law, int(rets[2]), rng).values
        one_minus = 1.0 - x
        first.append(1.0 - np.prod(one_minus[rets[0]:rets[1]]))
        second.append(1.0 - np.prod(one_minus[rets[1]:rets[2]]))
    stat, pval = ks_two_sample(first, second)
    params = {"law": repr(law), "kernel": q.tolist(), "start": start, "replicates": replicates}
    return CheckReport("w_exchangeability", params, stat, pval, bool(pval >= alpha), seed)


# --------------------------------------------------------------------------
# worked covariance example


@dataclass(frozen=True)
class CovarianceSeries:
    e1: float
    e2: float
    e12: float
    cov: float
    truncation_bound: float


def gem2_clump_covariance(p_stay: float = 0.5, terms: int = 200) -> CovarianceSeries:
    """Covariance of the first two non-atomic switch-clumped fractions of GEM(1/2, 1).

    The clumping chain stays put with probability ``p_stay``, so a sojourn
    lasts m steps with probability ``p_stay^(m-1) (1 - p_stay)``.  Given
    sojourns m and n, ``E[1 - X^V_1] = 3/(3+m)``, ``E[1 - X^V_2] = (3+m)/(3+m+n)``
    and ``E[(1 - X^V_1)(1 - X^V_2)] = 3/(3+m+n)``.  Sums stop at ``terms``;
    every summand lies in [0, 1], so each series loses at most the omitted
    probability and the reported bound covers the covariance.
    """
    if terms < 1:
        raise ValueError("terms must be at least 1")
    if not (0.0 < p_stay < 1.0):
        raise ValueError("p_stay must lie in (0, 1)")
    idx = np.arange(1, terms + 1, dtype=float)
    pm = p_stay ** (idx - 1) * (1.0 - p_stay)
    m = idx[:, None]
    n = idx[None, :]
    pmn = pm[:, None] * pm[None, :]
    e1 = float(np.sum(3.0 / (3.0 + idx) * pm))
    e2 = float(np.sum((3.0 + m) / (3.0 + m + n) * pmn))
    e12 = float(np.sum(3.0 / (3.0 + m + n) * pmn))
    single_tail = p_stay ** terms
    double_tail = 1.0 - (1.0 - single_tail) ** 2
    # |e12 err| + |e1 err| * 1 + |e2 err| * 1 bounds the covariance error
    bound = double_tail + single_tail + double_tail
    return CovarianceSeries(e1, e2, e12, e12 - e1 * e2, bound)
