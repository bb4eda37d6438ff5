from __future__ import annotations

import math
from itertools import permutations

import numpy as np
import pytest

from stickflow.acceptance import random_generator
from stickflow.chains import stationary_distribution
from stickflow.moments import (
    dirichlet_generator,
    dirichlet_moment,
    joint_moment,
    marginal_moment,
    minimal_and_q,
    moment_kernel,
    moment_kernels,
    moment_table,
    multi_indices,
    multinomial,
    pochhammer,
)

G2 = np.array([[-1.0, 1.0], [2.0, -2.0]])
CYCLE = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]])


# minimal polynomial ---------------------------------------------------------

def test_q_two_state():
    poly = minimal_and_q(G2)
    np.testing.assert_allclose(poly.q_coeffs, [3.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(poly.nonzero_roots, [-3.0], atol=1e-12)
    assert not poly.used_characteristic


def test_q_dirichlet_is_linear():
    poly = minimal_and_q(dirichlet_generator(2.5, [0.2, 0.3, 0.5]))
    assert poly.degree == 1
    np.testing.assert_allclose(poly.q_coeffs, [2.5, 1.0], atol=1e-12)


def test_q_cycle():
    poly = minimal_and_q(CYCLE)
    np.testing.assert_allclose(poly.q_coeffs, [3.0, 3.0, 1.0], atol=1e-12)
    expected = np.array([(-3 + 1j * math.sqrt(3)) / 2, (-3 - 1j * math.sqrt(3)) / 2])
    got = np.sort_complex(poly.nonzero_roots)
    np.testing.assert_allclose(got, np.sort_complex(expected), atol=1e-12)


def test_q_annihilates_generator():
    rng = np.random.default_rng(1)
    for _ in range(10):
        g = random_generator(rng, int(rng.integers(2, 6)))
        poly = minimal_and_q(g)
        acc = np.zeros_like(g)
        power = np.eye(g.shape[0])
        for c in poly.pmin_coeffs:
            acc += c * power
            power = power @ g
        assert np.abs(acc).max() <= 1e-8 * max(1.0, np.abs(g).max() ** poly.degree)


def test_reducible_generator_rejected():
    g = np.array([[-1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, -1.0]])
    with pytest.raises(ValueError):
        minimal_and_q(g)
    with pytest.raises(ValueError):
        joint_moment(g, (1, 0, 0))


# kernels --------------------------------------------------------------------

def test_kernel_zero_has_stationary_rows():
    k0 = moment_kernel(G2, j=0)
    np.testing.assert_allclose(k0, [[2 / 3, 1 / 3], [2 / 3, 1 / 3]], atol=1e-12)


@pytest.mark.parametrize("g", [G2, CYCLE, dirichlet_generator(1.5, [0.5, 0.25, 0.25])])
def test_kernels_are_resolvents(g):
    for j, kj in enumerate(moment_kernels(g, 30)):
        if j == 0:
            np.testing.assert_allclose(kj, np.tile(stationary_distribution(g), (g.shape[0], 1)), atol=1e-12)
        else:
            direct = np.linalg.inv(np.eye(g.shape[0]) - g / j)
            np.testing.assert_allclose(kj, direct, atol=1e-12)
        np.testing.assert_allclose(kj.sum(axis=1), 1.0, atol=1e-12)


def test_kernel_two_state_value():
    # (I - G)^{-1} for the two-state generator
    np.testing.assert_allclose(moment_kernel(G2, j=1), [[0.75, 0.25], [0.5, 0.5]], atol=1e-12)


def test_kernel_negative_j():
    with pytest.raises(ValueError):
        moment_kernel(G2, j=-1)


# joint moments --------------------------------------------------------------

def test_joint_moment_two_state():
    assert joint_moment(G2, (1, 0)) == pytest.approx(2 / 3, abs=1e-12)
    assert joint_moment(G2, (1, 1)) == pytest.approx(1 / 6, abs=1e-12)
    assert joint_moment(G2, (2, 0)) == pytest.approx(1 / 2, abs=1e-12)


def test_joint_moment_cycle():
    assert joint_moment(CYCLE, (1, 0, 0)) == pytest.approx(1 / 3, abs=1e-12)
    assert joint_moment(CYCLE, (2, 0, 0)) == pytest.approx(4 / 21, abs=1e-12)


def test_joint_moment_rejects_bad_index():
    with pytest.raises(ValueError):
        joint_moment(G2, (0, 0))
    with pytest.raises(ValueError):
        joint_moment(G2, (1, 0, 0))
    with pytest.raises(ValueError):
        joint_moment(G2, (-1, 2))


def test_start_state_does_not_matter():
    rng = np.random.default_rng(2)
    g = random_generator(rng, 4)
    for m in [(1, 2, 0, 1), (3, 0, 0, 0), (1, 1, 1, 1)]:
        vals = [joint_moment(g, m, start=s) for s in range(4)]
        assert max(vals) - min(vals) <= 1e-13


def _arrangement_sum(g, m):
    """Sum over distinct orderings of the multiset ``m`` with direct inverses."""
    k = g.shape[0]
    mu = stationary_distribution(g)
    n = sum(m)
    kern = [np.linalg.inv(np.eye(k) - g / j) for j in range(1, n)]
    word = [s for s, c in enumerate(m) for _ in range(c)]
    total = 0.0
    for seq in set(permutations(word)):
        val = mu[seq[0]]
        for t in range(1, n):
            val *= kern[t - 1][seq[t - 1], seq[t]]
        total += val
    return total / multinomial(m)


def test_joint_moment_matches_arrangement_sum():
    rng = np.random.default_rng(3)
    gens = [G2, CYCLE] + [random_generator(rng, k) for k in (2, 3, 3, 4)]
    for g in gens:
        k = g.shape[0]
        for order in range(1, 7 if k <= 3 else 5):
            for m in multi_indices(k, order):
                assert joint_moment(g, m) == pytest.approx(_arrangement_sum(g, m), abs=1e-12)


def test_moment_table_normalised_and_consistent():
    rng = np.random.default_rng(4)
    g = random_generator(rng, 3)
    for order in (1, 3, 5):
        table = moment_table(g, order)
        assert set(table) == set(multi_indices(3, order))
        weighted = sum(multinomial(m) * v for m, v in table.items())
        assert weighted == pytest.approx(1.0, abs=1e-12)
        for m, v in table.items():
            assert v == pytest.approx(joint_moment(g, m), abs=1e-13)


def test_dirichlet_moments():
    mu = [0.2, 0.3, 0.5]
    g = dirichlet_generator(1.7, mu)
    for m, v in moment_table(g, 4).items():
        assert v == pytest.approx(dirichlet_moment(1.7, mu, m), abs=1e-13)


# marginals ------------------------------------------------------------------

def test_pochhammer():
    assert pochhammer(2.5, 0) == 1.0
    assert pochhammer(2, 3) == 24
    assert pochhammer(-3, 2) == 6
    with pytest.raises(ValueError):
        pochhammer(1.0, -1)


def test_marginal_examples():
    assert marginal_moment(dirichlet_generator(1.0, [0.4, 0.6]), None, 0, 1) == pytest.approx(0.4, abs=1e-12)
    assert marginal_moment(CYCLE, None, 0, 1) == pytest.approx(1 / 3, abs=1e-12)
    assert marginal_moment(CYCLE, None, 2, 2) == pytest.approx(4 / 21, abs=1e-12)
    assert marginal_moment(G2, None, 0, 2) == pytest.approx(1 / 2, abs=1e-12)


def test_marginal_matches_joint():
    rng = np.random.default_rng(5)
    for _ in range(8):
        k = int(rng.integers(2, 5))
        g = random_generator(rng, k)
        poly = minimal_and_q(g)
        for i in range(k):
            for order in range(1, 6):
                m = tuple(order if s == i else 0 for s in range(k))
                assert marginal_moment(g, poly, i, order) == pytest.approx(joint_moment(g, m, poly), abs=1e-10)


def test_marginal_rejects_zero_order():
    with pytest.raises(ValueError):
        marginal_moment(G2, None, 0, 0)
