"""Exact moments of the limiting occupation law of ``K_n = I + G/n`` chains.

For an irreducible generator G with minimal polynomial ``p_min = lambda * q``,
``p_j(lambda) = (p_min(lambda) - p_min(j)) / (lambda - j)`` gives the moment
kernels ``p_j(G) / q(j)``: the resolvent ``(I - G/j)^{-1}`` for ``j >= 1``
and the matrix with every row equal to the stationary law for ``j = 0``.
Joint moments are sums over arrangements of a multiset of states of products
of these kernels; the sum is evaluated by dynamic programming over the
counts placed so far, never by enumerating arrangements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Sequence

import numpy as np

from .chains import GeneratorMatrix, is_irreducible, validate_generator

KRYLOV_TOL = 1e-9
# singular-value ratios between KRYLOV_TOL and this are treated as ambiguous
_AMBIGUOUS_TOL = 1e-6


@dataclass(frozen=True)
class PolySpec:
    """Minimal polynomial data of a generator, coefficients in ascending order.

    ``used_characteristic`` is set when the numerical rank test was too close
    to call and the characteristic polynomial stands in for the minimal one.
    """

    pmin_coeffs: np.ndarray
    q_coeffs: np.ndarray
    nonzero_roots: np.ndarray
    used_characteristic: bool = False

    @property
    def degree(self) -> int:
        """Degree of ``q``."""
        return self.q_coeffs.size - 1

    def q(self, x):
        return np.polynomial.polynomial.polyval(x, self.q_coeffs)


def _check_admissible(g) -> GeneratorMatrix:
    gen = validate_generator(g)
    if gen.dim < 2 or not is_irreducible(gen):
        raise ValueError("moment formulas need an irreducible generator with at least 2 states")
    return gen


def _krylov_minimal(a: np.ndarray) -> tuple[np.ndarray, bool]:
    """Monic annihilating polynomial of ``a`` of least degree (ascending coefficients)."""
    k = a.shape[0]
    powers = [np.eye(k).ravel()]
    cur = np.eye(k)
    for d in range(1, k + 1):
        cur = cur @ a
        powers.append(cur.ravel())
        basis = np.column_stack(powers)
        sv = np.linalg.svd(basis, compute_uv=False)
        ratio = sv[-1] / sv[0]
        if ratio < KRYLOV_TOL:
            coef, *_ = np.linalg.lstsq(basis[:, :-1], -basis[:, -1], rcond=None)
            return np.append(coef, 1.0), False
        if ratio < _AMBIGUOUS_TOL:
            break
    return np.poly(a)[::-1].real.copy(), True


def minimal_and_q(g) -> PolySpec:
    """Minimal polynomial ``p_min``, its cofactor ``q = p_min / lambda`` and the roots of ``q``.

    The generator must be irreducible so that 0 is a simple root of
    ``p_min``.  The degree is found by a Krylov rank test on powers of
    ``G / theta_G``; if that test is inconclusive the characteristic
    polynomial is used instead and the result is flagged.
    """
    gen = _check_admissible(g)
    scale = gen.theta
    c, fallback = _krylov_minimal(gen.entries / scale)
    d = c.size - 1
    # undo the scaling: p_G(x) = scale^d p_A(x / scale)
    pmin = c * scale ** (d - np.arange(d + 1))
    if abs(pmin[0]) > 1e-8 * scale ** d:
        raise ArithmeticError("minimal polynomial does not vanish at 0")
    pmin[0] = 0.0
    q = pmin[1:].copy()
    if abs(q[0]) <= 1e-9 * scale ** (d - 1):
        raise ValueError("eigenvalue 0 is repeated in the minimal polynomial")
    roots = np.roots(q[::-1]) if q.size > 1 else np.empty(0, dtype=complex)
    roots = roots.astype(complex)
    if np.any(roots.real >= 1e-9 * scale):
        raise ArithmeticError("q has a root with nonnegative real part")
    return PolySpec(pmin, q, roots, fallback)


def _shifted_coeffs(poly: PolySpec, j: float) -> np.ndarray:
    """Coefficients b_k = sum_{l>=k} a_l j^(l-k) of p_j; b_0 equals q(j)."""
    a = poly.q_coeffs
    b = np.empty_like(a)
    b[-1] = a[-1]
    for k in range(a.size - 2, -1, -1):
        b[k] = a[k] + j * b[k + 1]
    return b


def _matrix_poly(b: np.ndarray, g: np.ndarray) -> np.ndarray:
    eye = np.eye(g.shape[0])
    out = b[-1] * eye
    for coef in b[-2::-1]:
        out = out @ g + coef * eye
    return out


def moment_kernel(g, poly: PolySpec | None = None, j: int = 1, check: bool = True) -> np.ndarray:
    """``p_j(G) / q(j)``.

    For ``j >= 1`` this is ``(I - G/j)^{-1}``; with ``check`` the direct
    inverse is computed as well and a disagreement above 1e-8 raises.  For
    ``j = 0`` every row is the stationary law.
    """
    gen = _check_admissible(g)
    if j < 0:
        raise ValueError("j must be nonnegative")
    poly = minimal_and_q(gen) if poly is None else poly
    b = _shifted_coeffs(poly, float(j))
    qj = b[0]
    if qj == 0 or not np.isfinite(qj):
        raise ArithmeticError(f"q({j}) = {qj}; the polynomial data is corrupt")
    out = _matrix_poly(b, gen.entries) / qj
    if check and j >= 1:
        direct = np.linalg.inv(np.eye(gen.dim) - gen.entries / j)
        err = np.abs(out - direct).max()
        if err > 1e-8:
            raise ArithmeticError(f"p_j(G)/q(j) differs from the resolvent by {err:.3g} at j={j}")
    return out


def moment_kernels(g, count: int, poly: PolySpec | None = None) -> list[np.ndarray]:
    """``[K~_0, ..., K~_{count-1}]``."""
    gen = _check_admissible(g)
    poly = minimal_and_q(gen) if poly is None else poly
    return [moment_kernel(gen, poly, j, check=False) for j in range(count)]


def multinomial(m: Sequence[int]) -> int:
    out = math.factorial(sum(m))
    for mi in m:
        out //= math.factorial(mi)
    return out


def _check_multi_index(m, k: int) -> tuple[int, ...]:
    m = tuple(int(v) for v in m)
    if len(m) != k:
        raise ValueError(f"multi-index has length {len(m)}, generator has {k} states")
    if any(v < 0 for v in m):
        raise ValueError("multi-index entries must be nonnegative")
    if sum(m) < 1:
        raise ValueError("moment order N = sum(m) must be at least 1")
    return m


def joint_moment(g, m, poly: PolySpec | None = None, start: int = 0) -> float:
    """``E[prod_i nu_i^{m_i}]`` for the limiting occupation law of G.

    ``start`` is the fixed initial state of each arrangement; its choice does
    not change the value.
    """
    gen = _check_admissible(g)
    k = gen.dim
    m = _check_multi_index(m, k)
    n_total = sum(m)
    kernels = moment_kernels(gen, n_total, poly)
    init = np.zeros(k)
    init[start] = 1.0
    level = {(0,) * k: init}
    for t in range(n_total):
        nxt: dict[tuple[int, ...], np.ndarray] = {}
        for counts, vec in level.items():
            w = vec @ kernels[t]
            for s in range(k):
                if counts[s] < m[s]:
                    key = counts[:s] + (counts[s] + 1,) + counts[s + 1:]
                    acc = nxt.setdefault(key, np.zeros(k))
                    acc[s] += w[s]
        level = nxt
    return float(level[m].sum()) / multinomial(m)


def moment_table(g, order: int, poly: PolySpec | None = None) -> dict[tuple[int, ...], float]:
    """All joint moments with ``sum(m) == order`` from a single pass."""
    gen = _check_admissible(g)
    if order < 1:
        raise ValueError("order must be at least 1")
    k = gen.dim
    kernels = moment_kernels(gen, order, poly)
    init = np.zeros(k)
    init[0] = 1.0
    level = {(0,) * k: init}
    for t in range(order):
        nxt: dict[tuple[int, ...], np.ndarray] = {}
        for counts, vec in level.items():
            w = vec @ kernels[t]
            for s in range(k):
                key = counts[:s] + (counts[s] + 1,) + counts[s + 1:]
                acc = nxt.setdefault(key, np.zeros(k))
                acc[s] += w[s]
        level = nxt
    return {m: float(v.sum()) / multinomial(m) for m, v in sorted(level.items(), reverse=True)}


def pochhammer(a, n: int):
    """Rising factorial ``a (a+1) ... (a+n-1)`` as an explicit product."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = 1.0 if not isinstance(a, complex) else 1.0 + 0j
    for j in range(n):
        out *= a + j
    return out


def diagonal_roots(g, poly: PolySpec, i: int) -> np.ndarray:
    """Roots in j of ``[p_j(G)]_{ii}``."""
    gen = validate_generator(g)
    a = poly.q_coeffs
    n = a.size - 1
    diag_pow = np.empty(n + 1)
    cur = np.eye(gen.dim)
    for k in range(n + 1):
        diag_pow[k] = cur[i, i]
        cur = cur @ gen.entries
    # coefficient of j^m is sum_k a_{k+m} [G^k]_ii
    coef = np.array([sum(a[k + mm] * diag_pow[k] for k in range(n - mm + 1)) for mm in range(n + 1)])
    if n == 0:
        return np.empty(0, dtype=complex)
    return np.roots(coef[::-1]).astype(complex)


def marginal_moment(g, poly: PolySpec | None, i: int, order: int) -> float:
    """``E[nu_i^N]`` as a ratio of Pochhammer products over the roots of q and of ``[p_j(G)]_ii``."""
    gen = _check_admissible(g)
    if order < 1:
        raise ValueError("order must be at least 1")
    poly = minimal_and_q(gen) if poly is None else poly
    gammas = diagonal_roots(gen, poly, i)
    lambdas = poly.nonzero_roots
    val = 1.0 + 0j
    for gam, lam in zip(gammas, lambdas):
        val *= pochhammer(complex(-gam), order) / pochhammer(complex(-lam), order)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"marginal moment has imaginary part {val.imag:.3g}")
    return float(val.real)


def dirichlet_moment(theta: float, mu, m) -> float:
    """Moment ``prod_i (theta mu_i)_{m_i} / (theta)_N`` of a Dirichlet(theta * mu) vector."""
    mu = np.asarray(mu, dtype=float)
    num = math.prod(pochhammer(theta * float(mi), int(c)) for mi, c in zip(mu, m))
    return num / pochhammer(float(theta), int(sum(m)))


def multi_indices(k: int, order: int):
    """All ``m`` in N_0^k with ``sum(m) == order``, in lexicographic order."""
    for m in iproduct(range(order + 1), repeat=k):
        if sum(m) == order:
            yield m


def dirichlet_generator(theta: float, mu) -> np.ndarray:
    """``theta (Q - I)`` with every row of Q equal to ``mu``."""
    mu = np.asarray(mu, dtype=float)
    return theta * (np.tile(mu, (mu.size, 1)) - np.eye(mu.size))


__all__ = [
    "PolySpec",
    "minimal_and_q",
    "moment_kernel",
    "moment_kernels",
    "joint_moment",
    "moment_table",
    "marginal_moment",
    "pochhammer",
    "dirichlet_moment",
    "dirichlet_generator",
    "multi_indices",
    "multinomial",
]
