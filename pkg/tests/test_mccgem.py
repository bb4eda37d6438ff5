from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import stats as sps

from stickflow.chains import jump_kernel, sample_homogeneous
from stickflow.mccgem import (
    DiscreteMeasure,
    assemble_measure,
    clump_by_switches,
    sample_mccgem,
    stick_breaking_measure,
)
from stickflow.stats import clumped_fraction_beta_check
from stickflow.stickcore import Gem, StickSequence, sample_stick


def test_constant_diagonal_weights_are_gem():
    g = np.array([[-2.0, 1.0, 1.0], [0.5, -2.0, 1.5], [1.0, 1.0, -2.0]])
    a = np.array([sample_mccgem(g, [1 / 3] * 3, seed=[1, r]).weights.weights[0] for r in range(5000)])
    b = np.array([sample_stick(Gem(2.0), [2, r]).weights[0] for r in range(5000)])
    assert sps.ks_2samp(a, b, method="asymp").pvalue >= 0.001


def test_zero_row_gives_single_atom():
    g = np.array([[0.0, 0.0], [1.0, -1.0]])
    s = sample_mccgem(g, [1.0, 0.0], seed=3)
    assert s.weights.weights.tolist() == [1.0]
    assert s.labels.tolist() == [0]
    assert s.weights.tail_mass == 0.0


def test_sample_mccgem_deterministic():
    g = [[-1.0, 1.0], [2.0, -2.0]]
    a = sample_mccgem(g, [0.5, 0.5], seed=4)
    b = sample_mccgem(g, [0.5, 0.5], seed=4)
    assert np.array_equal(a.weights.weights, b.weights.weights)
    assert np.array_equal(a.labels, b.labels)
    assert len(a.labels) >= len(a.weights)
    assert a.weights.tail_mass < 1e-12


def test_label_chain_uses_jump_kernel():
    g = np.array([[-2.0, 1.5, 0.5], [1.0, -3.0, 2.0], [0.2, 0.8, -1.0]])
    k = jump_kernel(g)
    counts = np.zeros((3, 3))
    total = 0
    r = 0
    while total < 100_000:
        y = sample_mccgem(g, [1 / 3] * 3, seed=[5, r]).labels
        np.add.at(counts, (y[:-1], y[1:]), 1)
        total += y.size - 1
        r += 1
    rows = counts.sum(axis=1, keepdims=True)
    freq = counts / rows
    se = np.sqrt(k * (1 - k) / rows)
    off = ~np.eye(3, dtype=bool)
    assert np.all(np.abs(freq - k)[off] <= 4 * se[off] + 1e-12)
    assert np.all(np.diag(counts) == 0)


def test_conditional_fraction_law():
    # labels fixed to alternate: fractions should be Beta(1, 1) then Beta(1, 3)
    g = np.array([[-1.0, 1.0], [3.0, -3.0]])
    first, second = [], []
    for r in range(4000):
        s = sample_mccgem(g, [1.0, 0.0], seed=[6, r])
        x = s.fractions
        if x.size >= 2:
            first.append(x[0])
            second.append(x[1])
    assert sps.kstest(first, sps.beta(1, 1).cdf).pvalue >= 0.001
    assert sps.kstest(second, sps.beta(1, 3).cdf).pvalue >= 0.001


# clump_by_switches ----------------------------------------------------------

def test_clump_first_block():
    p = StickSequence(0.5 ** np.arange(1, 11), 0.5 ** 10)
    out = clump_by_switches(p, [0, 0, 1, 1, 0, 0, 0, 1, 1, 1])
    assert out.weights.weights[0] == 0.75
    assert out.labels.tolist() == [0, 1, 0, 1]
    np.testing.assert_allclose(out.weights.weights, [3 / 4, 3 / 16, 7 / 128, 7 / 1024], atol=1e-15)
    assert out.weights.tail_mass == 0.5 ** 10


def test_clump_constant_path():
    p = StickSequence([0.5, 0.25, 0.125], 0.125)
    out = clump_by_switches(p, [2, 2, 2])
    assert out.weights.weights.tolist() == [0.875]
    assert out.labels.tolist() == [2]


def test_clump_short_path_moves_mass_to_deficit():
    p = StickSequence([0.5, 0.25, 0.125], 0.125)
    out = clump_by_switches(p, [0, 1])
    assert out.weights.weights.tolist() == [0.5, 0.25]
    assert out.weights.tail_mass == 0.25


def test_clump_gem_first_fraction_beta():
    rep = clumped_fraction_beta_check(2.0, [[0.5, 0.5], [0.5, 0.5]], 0, replicates=10_000, seed=7)
    assert rep.passed, rep.to_dict()


def test_unclumping_identity():
    rng = np.random.default_rng(8)
    q = np.array([[0.6, 0.4, 0.0], [0.3, 0.3, 0.4], [0.5, 0.0, 0.5]])
    for r in range(50):
        p = sample_stick(Gem(1.5), rng)
        path = sample_homogeneous(q, 0, len(p), rng).states
        c = clump_by_switches(p, path)
        a = assemble_measure(c.weights, c.labels, 3)
        b = assemble_measure(p, path, 3)
        np.testing.assert_allclose(a.masses, b.masses, atol=1e-12)
        assert a.deficit == b.deficit


# assemble_measure -----------------------------------------------------------

def test_assemble_example():
    m = assemble_measure(StickSequence([0.5, 0.25, 0.25], 0.0), [1, 0, 1], 2)
    assert m.masses.tolist() == [0.25, 0.75]
    assert m.deficit == 0.0


def test_assemble_reports_deficit():
    m = assemble_measure(StickSequence([0.5, 0.5 - 1e-6], 1e-6), [0, 1], 2)
    assert m.deficit == 1e-6
    assert abs(m.masses.sum() - (1 - 1e-6)) < 1e-15


def test_assemble_label_errors():
    with pytest.raises(ValueError):
        assemble_measure(StickSequence([0.5, 0.5]), [0, 2], 2)
    with pytest.raises(ValueError):
        assemble_measure(StickSequence([0.5, 0.5]), [0], 2)


def test_measure_exports():
    m = DiscreteMeasure([0.25, 0.75], 0.0)
    assert json.loads(m.to_json()) == {"masses": [0.25, 0.75], "deficit": 0.0}
    assert m.to_csv() == "state,mass\n0,0.25\n1,0.75\ndeficit,0.0\n"


def test_dirichlet_stick_breaking_means():
    mu = np.array([0.5, 0.3, 0.2])
    q = np.tile(mu, (3, 1))
    m = np.array([stick_breaking_measure(Gem(2.0), q, mu, seed=[9, r]).masses for r in range(4000)])
    se = m.std(axis=0, ddof=1) / math.sqrt(m.shape[0])
    assert np.all(np.abs(m.mean(axis=0) - mu) <= 4 * se)
