"""Degree-distribution tests: drift bookkeeping, integration, closed forms."""

import math
from fractions import Fraction

import numpy as np
import pytest

from netopinion import (DegreeDistribution, IntegrationError, Network,
                        empirical_degree_distribution, init_network,
                        integrate_master, loglog_slope, master_rhs, restrict,
                        stationary_poisson, stationary_power_law,
                        total_variation)
from netopinion.degree_master import power_law_raw, stable_step


def rhs_reference(probs, d_rate, n_edges, n_nodes, alpha):
    """Flux-by-flux drift bookkeeping in exact rational arithmetic.

    Independent of the vectorized implementation: walks every degree level
    and moves probability along the two channels explicitly.
    """
    removal = Fraction(d_rate, n_edges)
    gain = Fraction(2 * d_rate, 2 * n_edges + n_nodes * alpha)
    out = [Fraction(0)] * len(probs)
    for c, p in enumerate(probs):
        p = Fraction(p)
        if p == 0:
            continue
        # downward channel: degree c -> c - 1 at rate removal * c
        flux = removal * c * p
        out[c] -= flux
        if c >= 1:
            out[c - 1] += flux
        # upward channel: degree c -> c + 1, suppressed at the top
        if c < n_edges:
            flux = gain * (c + alpha) * p
            out[c] -= flux
            out[c + 1] += flux
    return out


def random_distribution(rng, size):
    probs = rng.dirichlet(np.ones(size))
    return probs


# ---------------------------------------------------------------------------
# drift


def test_rhs_matches_reference_on_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n_edges = int(rng.integers(3, 20))
        n_nodes = int(rng.integers(2, 30))
        probs = random_distribution(rng, n_edges + 1)
        got = master_rhs(probs, 2.0, n_edges, n_nodes, 1.0)
        want = [float(x) for x in rhs_reference(probs, 2, n_edges, n_nodes, 1)]
        assert np.allclose(got, want, atol=1e-13)


def test_rhs_sums_to_zero():
    rng = np.random.default_rng(1)
    for _ in range(10):
        probs = random_distribution(rng, 12)
        dp = master_rhs(probs, 1.5, 11, 7, 0.3)
        assert abs(dp.sum()) < 1e-12
    # exact statement, rational arithmetic
    ref = rhs_reference([Fraction(1, 3), Fraction(1, 3), Fraction(1, 3),
                         Fraction(0)], 1, 3, 2, 1)
    assert sum(ref) == 0


def test_first_moment_drift_identity():
    # d(mean)/dt = -(D/E)*m + 2D*(m + alpha)/(2E + N*alpha), exactly
    d_rate, n_edges, n_nodes, alpha = 1, 8, 4, 1
    probs = [Fraction(1, 4), Fraction(1, 4), Fraction(1, 8), Fraction(1, 8),
             Fraction(1, 8), Fraction(1, 8), Fraction(0), Fraction(0),
             Fraction(0)]
    ref = rhs_reference(probs, d_rate, n_edges, n_nodes, alpha)
    mean = sum(c * p for c, p in enumerate(probs))
    moment_drift = sum(c * dp for c, dp in enumerate(ref))
    predicted = (-Fraction(d_rate, n_edges) * mean
                 + Fraction(2 * d_rate, 2 * n_edges + n_nodes * alpha)
                 * (mean + alpha))
    assert moment_drift == predicted


def test_first_moment_conserved_at_mean_degree_gamma():
    # when the mean equals 2E/N the two channels balance exactly
    n_edges, n_nodes = 10, 5  # gamma = 4
    probs = np.zeros(n_edges + 1)
    probs[3] = probs[5] = 0.5  # mean 4
    dp = master_rhs(probs, 3.0, n_edges, n_nodes, 0.25)
    assert abs(np.arange(n_edges + 1) @ dp) < 1e-12


def test_point_mass_fluxes_at_tiny_support():
    # one edge, two nodes: all mass at degree 1 drains into degree 0
    dp = master_rhs([0.0, 1.0], 1.0, 1, 2, 1.0)
    assert dp[0] == pytest.approx(1.0, abs=1e-15)
    assert dp[1] == pytest.approx(-1.0, abs=1e-15)
    assert abs(dp.sum()) < 1e-15


def test_interior_gain_coefficient():
    # point mass at degree 1, E=4, N=2, alpha=1: flow into degree 2 is
    # 2D/(2E + N*alpha) * (1 + alpha) = (2/10) * 2 = 0.4
    probs = np.zeros(5)
    probs[1] = 1.0
    dp = master_rhs(probs, 1.0, 4, 2, 1.0)
    assert dp[2] == pytest.approx(0.4, abs=1e-15)


def test_rhs_support_length_enforced():
    with pytest.raises(ValueError):
        master_rhs([0.5, 0.5], 1.0, 5, 4, 0.1)


# ---------------------------------------------------------------------------
# integration


def test_zero_horizon_returns_initial():
    p0 = DegreeDistribution([0.2, 0.3, 0.5])
    out = integrate_master(p0, 1.0, 2, 4, 0.5, 0.0, 0.01)
    assert np.allclose(out.probs, p0.probs)


def test_mass_conserved_along_integration():
    p0 = np.zeros(21)
    p0[4] = 1.0
    current = DegreeDistribution(p0)
    for _ in range(5):
        current = integrate_master(current, 2.0, 20, 10, 0.1, 3.0, 0.05)
        assert abs(current.probs.sum() - 1.0) < 1e-10
        assert current.probs.min() >= 0.0


def test_time_rescaling_invariance():
    p0 = np.zeros(13)
    p0[2] = 1.0
    slow = integrate_master(DegreeDistribution(p0), 1.0, 12, 6, 0.2,
                            8.0, 0.05)
    fast = integrate_master(DegreeDistribution(p0), 2.0, 12, 6, 0.2,
                            4.0, 0.025)
    assert np.abs(slow.probs - fast.probs).max() < 1e-8


def test_unstable_step_raises():
    p0 = np.zeros(41)
    p0[40] = 1.0
    with pytest.raises(IntegrationError):
        # dt far above the stability heuristic for this top-heavy state
        integrate_master(DegreeDistribution(p0), 10.0, 40, 4, 0.1,
                         50.0, 60.0)


def test_long_run_approaches_power_law_shape():
    # mean-degree-4 system relaxes onto the 1/c profile over degrees 1..50
    n_nodes, n_edges, alpha, d_rate = 200, 400, 0.01, 1.0
    p0 = np.zeros(n_edges + 1)
    p0[4] = 1.0
    out = integrate_master(DegreeDistribution(p0), d_rate, n_edges, n_nodes,
                           alpha, 70_000.0, 0.5)
    shape = stationary_power_law(alpha, 4.0, n_edges)
    tv = total_variation(restrict(out, 1, 50), restrict(shape, 1, 50))
    assert tv < 0.05
    assert abs(out.probs.sum() - 1.0) < 1e-10


# ---------------------------------------------------------------------------
# closed forms


def test_power_law_raw_hand_value():
    assert power_law_raw(0.01, 30.0, 10) == pytest.approx(9.2305e-4,
                                                          rel=1e-4)


def test_power_law_is_pure_inverse_degree():
    raw = power_law_raw(0.01, 30.0, np.arange(1, 101))
    assert np.allclose(raw[:50] / raw[1::2], 2.0)  # p(c) / p(2c) = 2


def test_power_law_normalization_and_zero_at_origin():
    dist = stationary_power_law(0.01, 30.0, 200)
    assert dist.probs[0] == 0.0
    assert abs(dist.probs.sum() - 1.0) < 1e-12
    assert loglog_slope(dist, 2, 40) == pytest.approx(-1.0, abs=1e-9)


def test_poisson_hand_value_and_mode():
    dist = stationary_poisson(2.0, 30)
    assert dist.probs[0] == pytest.approx(math.exp(-2.0), abs=1e-8)
    assert dist.probs.argmax() in (1, 2)  # ties at floor(gamma) and below
    gamma = 3.7
    dist = stationary_poisson(gamma, 60)
    assert dist.probs.argmax() == math.floor(gamma)


def test_poisson_truncated_mean():
    gamma = 6.0
    c_max = int(gamma + 10 * math.sqrt(gamma))
    dist = stationary_poisson(gamma, c_max)
    assert abs(dist.mean_degree - gamma) < 1e-6


# ---------------------------------------------------------------------------
# empirical histograms and metrics


def test_empirical_point_masses():
    k4 = Network(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    dist = empirical_degree_distribution(k4)
    assert dist.probs[3] == 1.0

    rng = np.random.default_rng(9)
    regular = init_network(100, 30, "uniform_degree", rng)
    dist = empirical_degree_distribution(regular)
    assert dist.probs[30] == 1.0


def test_empirical_mean_is_degree_density():
    rng = np.random.default_rng(10)
    net = init_network(50, 4, "uniform_random", rng)
    dist = empirical_degree_distribution(net)
    assert dist.mean_degree == pytest.approx(2 * net.n_edges / net.n_nodes,
                                             abs=1e-12)


def test_total_variation_cases():
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert total_variation([0.5, 0.5], [1.0, 0.0]) == 0.5
    with pytest.raises(ValueError):
        total_variation([1.0], [0.5, 0.5])


def test_restrict_renormalizes():
    dist = DegreeDistribution([0.5, 0.25, 0.25])
    window = restrict(dist, 1, 2)
    assert np.allclose(window, [0.5, 0.5])
    with pytest.raises(ValueError):
        restrict(dist, 1, 5)


def test_distribution_validation():
    with pytest.raises(ValueError):
        DegreeDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        DegreeDistribution([1.5, -0.5])


def test_stable_step_heuristic():
    assert stable_step(2.0, 100) == pytest.approx(0.05)
    assert stable_step(1.0, 400, c_max=40) == pytest.approx(1.0)
