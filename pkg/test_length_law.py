#!/usr/bin/env python3
"""
Tests for length laws, their moments and the reference intensities.
"""

import math

import numpy as np
import pytest

from frilab.laws import (
    EPSILON_4,
    Dirac,
    Geometric,
    PmfTable,
    Scaled,
    SizeBiased,
    appropriateness_theta,
    default_epsilon,
    from_spec,
    moment,
    parse_shorthand,
    perturbed,
    reference_intensity,
    tail_moment,
)


@pytest.mark.parametrize("T", [0.5, 4.0, 30.0])
def test_geometric_closed_form_moments(T):
    """Test the geometric moments against mu_1 = T and mu_2 = T + 2 T^2."""
    rho = Geometric.with_mean(T)
    assert rho.mean == pytest.approx(T)
    assert moment(rho, 1) == pytest.approx(T)
    assert moment(rho, 2) == pytest.approx(T + 2 * T ** 2)


def test_geometric_moments_match_table():
    rho = Geometric.with_mean(6.0)
    values, probs = rho.table()
    assert probs.sum() == pytest.approx(1.0)
    assert np.sum(values * probs) == pytest.approx(rho.mu1, rel=1e-9)
    assert np.sum(values.astype(float) ** 3 * probs) == pytest.approx(rho.moment(3), rel=1e-9)


@pytest.mark.parametrize("k,m", [(0, 3), (1, 0), (1, 5), (2, 4)])
def test_geometric_tail_moments(k, m):
    """Test closed-form tail moments against a direct sum."""
    rho = Geometric.with_mean(3.0)
    values, probs = rho.table()
    mask = values >= m
    direct = np.sum(values[mask].astype(float) ** k * probs[mask])
    assert tail_moment(rho, k, m) == pytest.approx(direct, rel=1e-9)


def test_dirac():
    rho = Dirac(7)
    assert rho.mu1 == 7
    assert rho.mu2 == 49
    assert rho.tail_moment(1, 8) == 0.0
    assert rho.tail_moment(1, 7) == 7.0
    assert rho.support_max == 7
    assert np.all(rho.sample(np.random.default_rng(0), 10) == 7)


def test_pmf_merges_and_validates():
    rho = PmfTable([3, 1, 3], [0.25, 0.5, 0.25])
    assert rho.values.tolist() == [1, 3]
    assert rho.probs.tolist() == [0.5, 0.5]
    assert rho.mu1 == pytest.approx(2.0)
    assert rho.pmf(2) == 0.0
    with pytest.raises(ValueError):
        PmfTable([1, 2], [0.5, 0.6])
    with pytest.raises(ValueError):
        PmfTable([-1], [1.0])


def test_scaled_law():
    rho = Scaled(10, [0.5, 1.0], [0.5, 0.5])
    assert rho.values.tolist() == [5, 10]
    assert rho.mu1 == pytest.approx(7.5)
    assert from_spec(rho.to_spec()) == rho


def test_size_biased():
    base = PmfTable([1, 3], [0.5, 0.5])
    biased = SizeBiased(base)
    assert biased.pmf(1) == pytest.approx(0.25)
    assert biased.pmf(3) == pytest.approx(0.75)
    assert biased.mu1 == pytest.approx(base.mu2 / base.mu1)
    with pytest.raises(ValueError):
        SizeBiased(Dirac(0))


def test_geometric_sampling_mean():
    rho = Geometric.with_mean(5.0)
    draws = rho.sample(np.random.default_rng(3), 200000)
    assert draws.min() >= 0
    assert draws.mean() == pytest.approx(5.0, rel=0.03)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_geometric_quantile(p):
    rho = Geometric.with_mean(4.0)
    q = rho.quantile(p)
    assert rho.cdf(q) >= p - 1e-12
    if q > 0:
        assert rho.cdf(q - 1) < p


def test_rerooted_split_weights():
    """Test that totals m + l follow the (T + 1) rho(T) weighting."""
    rho = PmfTable([1, 4], [0.5, 0.5])
    m, l = rho.rerooted_split(np.random.default_rng(9), 100000)
    totals = m + l
    assert set(np.unique(totals).tolist()) == {1, 4}
    assert np.mean(totals == 4) == pytest.approx(5 / 7, abs=0.01)
    assert np.all(m >= 0) and np.all(l >= 0)


def test_rerooted_split_band():
    rho = PmfTable([1, 4], [0.5, 0.5])
    m, l = rho.rerooted_split(np.random.default_rng(1), 100, band=(2, 10))
    assert np.all(m + l == 4)
    with pytest.raises(ValueError):
        rho.rerooted_split(np.random.default_rng(1), 10, band=(5, 9))


def test_band_mass():
    rho = PmfTable([1, 4], [0.5, 0.5])
    assert rho.band_mass() == 1.0
    assert rho.band_mass((2, 10)) == pytest.approx(5 / 7)


def test_appropriateness_theta():
    rho = PmfTable([1, 10], [0.5, 0.5])
    assert appropriateness_theta(rho, 0) == pytest.approx(1.0)
    assert appropriateness_theta(rho, 1.0) == pytest.approx(100 / 101)
    assert appropriateness_theta(rho, 3.0) == pytest.approx(0.0)


def test_reference_intensity():
    rho = Geometric.with_mean(4.0)
    u4 = reference_intensity(rho, 4, EPSILON_4)
    assert u4 == pytest.approx(4 * (1 + math.log(4)) / (EPSILON_4 * 36))
    assert reference_intensity(rho, 5, 0.5) == pytest.approx(4 / (0.5 * 36))
    with pytest.raises(ValueError):
        reference_intensity(rho, 5, 0.0)


def test_perturbed_and_default_epsilon():
    assert perturbed(2.0, 0.25) == (1.5, 2.5)
    with pytest.raises(ValueError):
        perturbed(1.0, 0.5)
    assert default_epsilon(4) == EPSILON_4
    assert default_epsilon(5, {'5': 0.7}) == 0.7
    with pytest.raises(ValueError):
        default_epsilon(6)


def test_shorthand_parsing():
    assert parse_shorthand('geometric:4') == Geometric.with_mean(4)
    assert parse_shorthand('dirac:8') == Dirac(8)
    assert parse_shorthand('{"family": "dirac", "params": {"n": 3}}') == Dirac(3)
    with pytest.raises(ValueError):
        parse_shorthand('poisson:3')
