import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from frogsim.operators import (
    INFINITE,
    B_from_U,
    FinitePmf,
    Poisson,
    PoissonMixture,
    ShiftedBinomialMixture,
    StarModelParams,
    U_doubleprime_dist,
    case2_bound,
    case2_probability,
    dist_from_dict,
    exact_B,
    exact_B_binary,
    exact_U,
    exact_U_binary,
    hoeffding_exponent,
    kappa,
    monte_carlo_B,
    monte_carlo_star,
    monte_carlo_U,
    sample_star,
    total_variation,
)


def test_exact_U_binary_examples():
    assert exact_U_binary(0, 0).pmf([1])[0] == 1.0
    assert exact_U_binary(3, 0).pmf([2])[0] == pytest.approx(0.6321206, abs=1e-7)
    assert exact_U_binary(1.5, 1.0).pmf([1])[0] == pytest.approx(0.3678794, abs=1e-7)
    with pytest.raises(ValueError):
        exact_U_binary(-1, 0)


def test_exact_B_binary_examples():
    b = exact_B_binary(2.0, 0.0)
    assert b.pmf(np.arange(10)) == pytest.approx(Poisson(2 / 3).pmf(np.arange(10)), abs=1e-15)
    b = exact_B_binary(3, 2)
    assert b.rates.tolist() == [2.0, 3.0]
    assert b.weights[0] == pytest.approx(math.exp(-2), abs=1e-15)
    assert b.zero_prob() == pytest.approx(0.0613648, abs=1e-7)
    with pytest.raises(ValueError):
        exact_B_binary(1, -0.1)


@given(st.floats(0, 20), st.floats(0, 20))
def test_B_from_U_matches_binary_display(mu, lam):
    a = B_from_U(mu, 2, lam, exact_U_binary(mu, lam))
    b = exact_B_binary(mu, lam)
    keep = b.weights > 0
    assert np.max(np.abs(a.weights - b.weights[keep])) <= 1e-12
    assert np.max(np.abs(a.rates - b.rates[keep])) <= 1e-12


def test_B_from_U_examples():
    full = B_from_U(1.0, 4, 2.0, FinitePmf.point_mass(4))
    assert full.rates.tolist() == pytest.approx([1.0 / 5 + 2.0])
    uni = B_from_U(4, 3, 1, FinitePmf(np.array([1, 2, 3]), np.full(3, 1 / 3)))
    assert uni.rates == pytest.approx([1 + 1 / 3, 1 + 2 / 3, 2])
    expected = (math.exp(-4 / 3) + math.exp(-5 / 3) + math.exp(-2)) / 3
    assert uni.zero_prob() == pytest.approx(expected, abs=1e-14)
    with pytest.raises(ValueError):
        B_from_U(1, 2, 1, FinitePmf(np.array([0, 1]), np.array([0.5, 0.5])))
    with pytest.raises(ValueError):
        B_from_U(1, 2, 1, FinitePmf(np.array([1, 3]), np.array([0.5, 0.5])))


def test_exact_U_general_reduces_to_binary():
    for mu, lam in [(0.3, 2.0), (1.5, 0.8), (4.0, 0.0)]:
        assert exact_U(2, mu, lam).probs == pytest.approx(exact_U_binary(mu, lam).probs, abs=1e-14)


def test_exact_U_against_brute_force_d3():
    # d = 3: enumerate the epidemic on leaves {u2, u3} by hand
    mu, lam = 1.2, 0.9
    a = 1 - math.exp(-mu / 4)
    h1, h2 = 1 - math.exp(-lam / 3), 1 - math.exp(-2 * lam / 3)
    p_only_u1 = (1 - a) ** 2 * (1 - h1) ** 2
    # exactly one more leaf: rho' hits one and neither infected leaf reaches the third,
    # or rho' hits none, u1 hits one, and both then miss the third
    p_two = 2 * a * (1 - a) * (1 - h2) + 2 * (1 - a) ** 2 * h1 * (1 - h1) * (1 - h1)
    got = exact_U(3, mu, lam)
    assert got.pmf([1])[0] == pytest.approx(p_only_u1, abs=1e-14)
    assert got.pmf([2])[0] == pytest.approx(p_two, abs=1e-14)


@pytest.mark.parametrize("d,mu,lam", [(3, 1.0, 2.0), (5, 2.0, 3.0), (4, 0.0, 1.0)])
def test_exact_general_against_monte_carlo(d, mu, lam):
    params = StarModelParams(d, mu, Poisson(lam))
    n = 200000
    assert total_variation(monte_carlo_U(params, n, seed=1), exact_U(d, mu, lam)) < 0.01
    assert total_variation(monte_carlo_B(params, n, seed=2), exact_B(d, mu, lam)) < 0.012


def test_sample_star_examples():
    rng = np.random.default_rng(0)
    assert sample_star(StarModelParams(3, 0.0, FinitePmf.point_mass(0)), rng) == (0, 1)
    # binary: P[both leaves activated] = 1 - exp(-mu/3 - lam/2)
    mu, lam, n = 1.2, 0.7, 20000
    p = StarModelParams(2, mu, Poisson(lam))
    leaves = [sample_star(p, np.random.default_rng(i))[1] for i in range(n)]
    target = 1 - math.exp(-mu / 3 - lam / 2)
    assert abs(np.mean(np.array(leaves) == 2) - target) < 4 * math.sqrt(target * (1 - target) / n)


def test_scalar_and_batch_samplers_agree_in_law():
    p = StarModelParams(3, 1.5, Poisson(1.0))
    scalar = FinitePmf.from_samples([sample_star(p, np.random.default_rng(i))[0] for i in range(20000)])
    batch = monte_carlo_B(p, 200000, seed=9)
    assert total_variation(scalar, batch) < 0.03


def test_poisson_thinning_at_the_centre():
    # leaves hold no frogs: returns ~ Poi(mu/(d+1)), other leaves hit independently
    d, mu, n = 4, 2.0, 200000
    returns, leaves, _ = monte_carlo_star(StarModelParams(d, mu, FinitePmf.point_mass(0)), n, seed=4)
    r = mu / (d + 1)
    assert abs(returns.mean() - r) < 4 * math.sqrt(r / n)
    a = 1 - math.exp(-r)
    obs = np.bincount(leaves - 1, minlength=d)
    exp = stats.binom.pmf(np.arange(d), d - 1, a) * n
    assert stats.chisquare(obs, exp).pvalue > 1e-4
    # returns and leaf hits are uncorrelated
    assert abs(np.corrcoef(returns, leaves)[0, 1]) < 4 / math.sqrt(n)


def test_B_monotone_under_coupling():
    small = StarModelParams(3, 1.0, Poisson(0.5))
    large = StarModelParams(3, 1.0, Poisson(2.0))
    for i in range(2000):
        a = sample_star(small, np.random.default_rng(i))
        b = sample_star(large, np.random.default_rng(i))
        assert a[0] <= b[0] and a[1] <= b[1]


def test_infinite_leaf_mass_propagates():
    law = FinitePmf(np.array([0]), np.array([0.5]), infinity=0.5)
    est = monte_carlo_B(StarModelParams(2, 1.0, law), 20000, seed=1)
    # u1 alone decides: infinite output iff u1 or any later-activated leaf is infinite
    assert 0.5 <= est.inf_mass < 0.8


def test_monte_carlo_deterministic_and_thread_free():
    p = StarModelParams(2, 1.5, Poisson(0.8))
    a = monte_carlo_B(p, 150000, seed=3)
    b = monte_carlo_B(p, 150000, seed=3, threads=3)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.probs, b.probs)
    one = monte_carlo_B(p, 1, seed=0)
    assert len(one.values) == 1 and one.probs[0] == 1.0


def test_U_doubleprime_examples():
    assert kappa(10, 3.26) == 4
    assert hoeffding_exponent(2.27, 3.26) == pytest.approx(0.6960569, abs=1e-7)
    u0 = U_doubleprime_dist(0.0, 10, 2.27, 3.26, use_exact_q=True)
    q = case2_probability(10, 2.27, 3.26)
    assert u0.pmf([4])[0] == pytest.approx(1 - q) and u0.pmf([1])[0] == pytest.approx(q)
    with pytest.raises(ValueError):
        U_doubleprime_dist(1.0, 3, 2.0, 1.2)  # kappa = 3 = d
    with pytest.raises(ValueError):
        U_doubleprime_dist(1.0, 10, 2.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 30), st.floats(0.2, 3.0), st.floats(1.5, 6.0), st.floats(0, 30))
def test_U_doubleprime_below_exact_U(d, C, c, lam):
    if kappa(d, c) >= d:
        return
    target = exact_U(d, C * (d + 1), lam)
    k = np.arange(d + 1)
    for exact_q in (True, False):
        lower = U_doubleprime_dist(lam, d, C, c, use_exact_q=exact_q)
        assert np.all(lower.cdf(k) >= target.cdf(k) - 1e-10)
    assert case2_probability(d, C, c) <= case2_bound(d, C, c) + 1e-15


def test_U_doubleprime_below_sampled_U():
    d, C, c, lam = 8, 1.2, 2.5, 3.0
    emp = monte_carlo_U(StarModelParams(d, C * (d + 1), Poisson(lam)), 100000, seed=8)
    lower = U_doubleprime_dist(lam, d, C, c, use_exact_q=True)
    k = np.arange(d + 1)
    assert np.all(lower.cdf(k) >= emp.cdf(k) - 4 * math.sqrt(0.25 / 100000))


def test_validation():
    with pytest.raises(ValueError):
        PoissonMixture(np.array([0.5, 0.4]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        Poisson(-1.0)
    with pytest.raises(ValueError):
        FinitePmf(np.array([1, 1]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        ShiftedBinomialMixture(((1.0, 0, 3, 1.5),))
    with pytest.raises(ValueError):
        StarModelParams(1, 1.0, Poisson(1.0))


@pytest.mark.parametrize(
    "dist",
    [
        Poisson(1.5),
        PoissonMixture(np.array([0.25, 0.75]), np.array([1.0, 4.0])),
        FinitePmf(np.array([0, 3]), np.array([0.25, 0.5]), infinity=0.25),
        ShiftedBinomialMixture(((0.5, 2, 4, 0.3), (0.5, 1, 5, 0.9))),
    ],
)
def test_json_round_trip_and_consistency(dist):
    data = json.loads(dist.to_json())
    assert "kind" in data
    back = dist_from_dict(data)
    k = np.arange(12)
    assert back.pmf(k) == pytest.approx(dist.pmf(k))
    assert dist.cdf(k) + dist.sf(k) == pytest.approx(np.ones(12))
    table, rem = dist.pmf_table()
    assert table.sum() + rem + dist.inf_mass == pytest.approx(1.0, abs=1e-12)


def test_sampling_matches_pmf():
    rng = np.random.default_rng(0)
    dist = PoissonMixture(np.array([0.3, 0.7]), np.array([0.5, 3.0]))
    emp = FinitePmf.from_samples(dist.sample(rng, 100000))
    assert total_variation(emp, dist) < 0.01
    assert dist.ppf(0.0) == 0
    inf = FinitePmf(np.array([2]), np.array([0.5]), infinity=0.5)
    assert inf.ppf(0.9) == INFINITE and inf.ppf(0.3) == 2
