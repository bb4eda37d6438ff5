from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from stickflow.stickcore import (
    ClumpIndex,
    Custom,
    Disordered,
    FractionSequence,
    Gem,
    StickSequence,
    TwoParam,
    clump,
    fractions_from_weights,
    law_from_dict,
    law_to_dict,
    ram_from_fractions,
    sample_fractions,
    sample_stick,
)

fractions = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40)


# ram_from_fractions ---------------------------------------------------------

def test_ram_geometric_halving():
    p = ram_from_fractions([0.5] * 6, eps=0.0)
    np.testing.assert_allclose(p.weights, [1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64], atol=0)
    assert p.tail_mass == 1 / 64


def test_ram_absorbing_first_fraction():
    p = ram_from_fractions([1.0, 0.3, 0.7], eps=0.0)
    assert p.weights.tolist() == [1.0, 0.0, 0.0]
    assert p.tail_mass == 0.0


def test_ram_product_formula():
    p = ram_from_fractions([0.2, 0.5, 1.0], eps=0.0)
    np.testing.assert_allclose(p.weights, [0.2, 0.4, 0.4], atol=1e-15)
    assert p.tail_mass == 0.0


def test_ram_stops_below_eps():
    p = ram_from_fractions([0.9] * 100, eps=1e-6)
    assert len(p) == 6  # 0.1**6 < 1e-6 first at the sixth term
    assert p.tail_mass < 1e-6
    assert abs(p.total - 1.0) < 1e-12


@pytest.mark.parametrize("bad", [[-0.1, 0.5], [0.5, 1.2], [math.nan]])
def test_ram_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        ram_from_fractions(bad)


def test_ram_log_space_keeps_tiny_products():
    x = np.array([1 - 1e-9, 0.5, 1 - 1e-10, 0.25])
    p = ram_from_fractions(x, eps=0.0)
    assert p.tail_mass == pytest.approx(math.prod(1 - x), rel=1e-12)
    assert abs(p.total - 1.0) < 1e-12


# fractions_from_weights -----------------------------------------------------

def test_fractions_inverse_example():
    x = fractions_from_weights([0.2, 0.4, 0.4])
    np.testing.assert_allclose(x.values, [0.2, 0.5, 1.0], atol=1e-15)


def test_fractions_after_full_mass_are_one():
    x = fractions_from_weights([1.0, 0.0, 0.0, 0.0])
    assert x.values.tolist() == [1.0, 1.0, 1.0, 1.0]


def test_fractions_geometric():
    w = 0.5 ** np.arange(1, 21)
    x = fractions_from_weights(StickSequence(w, 0.5 ** 20))
    np.testing.assert_allclose(x.values, 0.5, atol=1e-15)


def test_fractions_reject_negative():
    with pytest.raises(ValueError):
        fractions_from_weights([0.5, -0.1])


@given(fractions)
@settings(max_examples=200, deadline=None)
def test_round_trip(x):
    p = ram_from_fractions(x, eps=0.0)
    back = ram_from_fractions(fractions_from_weights(p), eps=0.0)
    np.testing.assert_allclose(back.weights, p.weights, atol=1e-12)
    assert abs(back.tail_mass - p.tail_mass) <= 1e-12


@given(fractions)
@settings(max_examples=200, deadline=None)
def test_telescoping_identity(x):
    a = np.asarray(x)
    for k in range(1, a.size + 1):
        prod = np.prod(1 - a[:k])
        s = sum(a[j] * np.prod(1 - a[:j]) for j in range(k))
        assert abs(prod + s - 1.0) <= 1e-12
    p = ram_from_fractions(a, eps=0.0)
    assert abs(p.total - 1.0) <= 1e-12


# clump ----------------------------------------------------------------------

def test_clump_pairs_of_halves():
    x = np.full(20, 0.5)
    pu, xu = clump(x, ClumpIndex(tuple(range(0, 20, 2))))
    np.testing.assert_allclose(xu.values, 0.75, atol=1e-15)
    np.testing.assert_allclose(pu.weights[:3], [3 / 4, 3 / 16, 3 / 64], atol=1e-15)


def test_clump_infinite_block_absorbs_tail():
    x = np.full(20, 0.5)
    pu, xu = clump(x, ClumpIndex((0, 2, math.inf, math.inf)))
    np.testing.assert_allclose(pu.weights, [3 / 4, 1 / 4, 0, 0], atol=1e-15)
    assert xu.values.tolist() == [0.75, 1.0, 1.0, 1.0]
    assert pu.tail_mass == 0.0


def test_clump_identity_is_exact():
    rng = np.random.default_rng(1)
    x = rng.random(30)
    pu, xu = clump(x, ClumpIndex(tuple(range(30))))
    assert np.array_equal(xu.values, x)
    assert np.array_equal(pu.weights, ram_from_fractions(x, eps=0.0).weights)


def test_clump_weights_are_block_sums():
    rng = np.random.default_rng(2)
    x = rng.random(25)
    bounds = (0, 3, 4, 10, 17)
    pu, _ = clump(x, ClumpIndex(bounds))
    p = ram_from_fractions(x, eps=0.0).weights
    sums = np.add.reduceat(p, bounds)
    np.testing.assert_allclose(pu.weights, sums, atol=1e-12)


@st.composite
def nested_clumps(draw):
    n = draw(st.integers(3, 30))
    x = draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    inner = sorted(set(draw(st.lists(st.integers(1, n - 1), max_size=n))))
    u = ClumpIndex(tuple([0] + inner))
    blocks = len(u.boundaries)
    outer = [] if blocks == 1 else sorted(set(draw(st.lists(st.integers(1, blocks - 1), max_size=blocks))))
    v = ClumpIndex(tuple([0] + outer))
    return np.asarray(x), u, v


@given(nested_clumps())
@settings(max_examples=200, deadline=None)
def test_clump_composition(args):
    x, u, v = args
    _, xu = clump(x, u)
    pv, _ = clump(xu.values, v)
    pc, _ = clump(x, u.compose(v))
    np.testing.assert_allclose(pv.weights, pc.weights, atol=1e-12)


def test_clump_index_validation():
    with pytest.raises(ValueError):
        ClumpIndex((1, 2))
    with pytest.raises(ValueError):
        ClumpIndex((0, 3, 3))
    with pytest.raises(ValueError):
        ClumpIndex((0, math.inf, 5))
    with pytest.raises(ValueError):
        ClumpIndex((0, 2)).compose(ClumpIndex((0, 5)))


# laws and sampling ----------------------------------------------------------

def test_law_validation():
    with pytest.raises(ValueError):
        Gem(0.0)
    with pytest.raises(ValueError):
        Disordered((1.0, 0.0))
    Disordered((1.0, 0.0), allow_zero=True)
    with pytest.raises(ValueError):
        TwoParam(1.0, 1.0)
    with pytest.raises(ValueError):
        TwoParam(0.5, -0.6)
    with pytest.raises(ValueError):
        FractionSequence([0.5, 2.0])


def test_disordered_zero_means_point_mass():
    x = sample_fractions(Disordered((2.0, 0.0, 3.0), allow_zero=True), 3, seed=1).values
    assert x[1] == 1.0


@pytest.mark.parametrize("law", [Gem(2.0), Disordered((1.0, 2.0, 3.0)), TwoParam(0.5, 1.0),
                                 Custom((0.3,), repeat=True)])
def test_law_dict_round_trip(law):
    assert law_from_dict(law_to_dict(law)) == law


def test_sample_stick_is_deterministic():
    a = sample_stick(Gem(0.7), seed=42)
    b = sample_stick(Gem(0.7), seed=42)
    assert np.array_equal(a.weights, b.weights) and a.tail_mass == b.tail_mass
    assert a.tail_mass < 1e-12
    assert abs(a.total - 1.0) < 1e-12


def test_sample_stick_rejects_bad_eps():
    with pytest.raises(ValueError):
        sample_stick(Gem(1.0), seed=0, eps=0.0)


def test_sample_stick_small_theta_uses_log_space():
    s = sample_stick(Gem(0.01), seed=3)
    assert abs(s.total - 1.0) < 1e-12 and len(s) >= 1


def test_finite_law_reports_tail():
    s = sample_stick(Disordered((1.0, 1.0)), seed=0)
    assert len(s) <= 2 and abs(s.total - 1.0) < 1e-12


def _first_two_weights(law, draws, seed):
    out = np.empty((draws, 2))
    rng = np.random.default_rng(seed)
    for r in range(draws):
        s = sample_stick(law, rng)
        w = np.zeros(2)
        w[:min(2, len(s))] = s.weights[:2]
        out[r] = w
    return out


@pytest.mark.slow
def test_gem1_first_weight_mean():
    w = _first_two_weights(Gem(1.0), 100_000, 11)[:, 0]
    se = w.std(ddof=1) / math.sqrt(w.size)
    assert abs(w.mean() - 0.5) <= 4 * se


@pytest.mark.slow
def test_gem3_second_weight_mean():
    w = _first_two_weights(Gem(3.0), 100_000, 12)[:, 1]
    se = w.std(ddof=1) / math.sqrt(w.size)
    assert abs(w.mean() - 3 / 16) <= 4 * se


def test_disordered_constant_matches_gem():
    a = _first_two_weights(Gem(2.0), 5000, 13)[:, 0]
    b = _first_two_weights(Disordered((2.0,) * 200), 5000, 14)[:, 0]
    assert sps.ks_2samp(a, b, method="asymp").pvalue >= 0.001


def test_gem_first_fraction_is_beta():
    rng = np.random.default_rng(15)
    x = np.array([sample_stick(Gem(2.5), rng).weights[0] for _ in range(100_000)])
    assert sps.kstest(x, sps.beta(1, 2.5).cdf).pvalue >= 0.001


def test_two_param_fraction_means():
    law = TwoParam(0.5, 1.0)
    x = np.array([sample_fractions(law, 3, seed=[16, r]).values for r in range(20_000)])
    # X_j ~ Beta(1/2, 1 + j/2) has mean (1/2) / (3/2 + j/2)
    expected = [0.5 / (1.5 + j / 2) for j in (1, 2, 3)]
    se = x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - expected) <= 4 * se)
