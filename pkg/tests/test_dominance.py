import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frogsim.dominance import (
    brute_force_dominates,
    critical_rate,
    critical_rate_affine,
    h_n,
    h_n_derivative,
    poisson_dominance,
)
from frogsim.operators import FinitePmf, Poisson, PoissonMixture, exact_B_binary


def five_point(f, x, eps):
    """Central difference with O(eps^4) truncation error."""
    return (-f(x + 2 * eps) + 8 * f(x + eps) - 8 * f(x - eps) + f(x - 2 * eps)) / (12 * eps)

TWO_POINT = PoissonMixture(np.array([0.5, 0.5]), np.array([0.0, 2.0]))


def test_h_n_examples():
    for x in (0.01, 0.3, 1.0):
        assert h_n(0, x) == x
    for n in range(6):
        assert h_n(n, 1.0) == 1.0
    assert h_n(1, math.exp(-1)) == pytest.approx(0.7357589, abs=1e-7)
    with pytest.raises(ValueError):
        h_n(2, 0.0)
    with pytest.raises(ValueError):
        h_n(2, 1.5)


@given(st.integers(0, 30), st.floats(0, 40))
def test_h_n_is_poisson_cdf(n, lam):
    x = math.exp(-lam)
    if x == 0:
        return
    assert h_n(n, x) == pytest.approx(float(Poisson(lam).cdf([n])[0]), abs=1e-12)


def test_h_n_increasing_concave_and_derivative():
    xs = np.linspace(0.02, 0.98, 97)
    eps = 1e-4
    for n in range(0, 9):
        h = h_n(n, xs)
        hp = h_n(n, xs + eps)
        # strict increase wherever the step is resolvable in double precision
        visible = h_n_derivative(n, xs) * eps > 1e-12
        assert np.all(hp[visible] > h[visible]) and np.all(hp >= h - 1e-15)
        mid = h_n(n, xs + eps / 2)
        assert np.all(mid >= (h + hp) / 2 - 1e-15)
        fd = five_point(lambda x: h_n(n, x), xs, 1e-3 * np.minimum(xs, 1 - xs))
        assert np.max(np.abs(fd - h_n_derivative(n, xs))) < 1e-8
        assert h_n_derivative(n, xs) == pytest.approx((-np.log(xs)) ** n / math.factorial(n))


def test_critical_rate_examples():
    assert critical_rate(Poisson(1.7)) == 1.7
    assert critical_rate(TWO_POINT) == pytest.approx(0.5662192, abs=1e-7)
    for mu, lam in [(2.0, 0.5), (1.0, 3.0), (5.0, 0.0)]:
        expected = lam + mu / 3 - math.log(1 - math.exp(-mu / 3 - lam / 2) + math.exp(-mu / 3))
        assert critical_rate(exact_B_binary(mu, lam)) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        critical_rate(FinitePmf.point_mass(1))


def test_critical_rate_affine():
    U = FinitePmf(np.array([1, 2, 3]), np.full(3, 1 / 3))
    mix = PoissonMixture(np.full(3, 1 / 3), 1.0 + np.array([1, 2, 3]) / 3)
    assert critical_rate_affine(1.0, U, 1 / 3) == pytest.approx(critical_rate(mix), abs=1e-14)


def test_log_space_stability():
    mix = PoissonMixture(np.array([0.5, 0.5]), np.array([900.0, 1000.0]))
    assert critical_rate(mix) == pytest.approx(900 + math.log(2), abs=1e-9)


def test_verdict():
    v = poisson_dominance(0.5, TWO_POINT)
    assert v.dominated and v.margin > 0
    v = poisson_dominance(0.6, TWO_POINT)
    assert not v.dominated and v.margin < 0


def test_brute_force_examples():
    assert brute_force_dominates(Poisson(1), Poisson(2), 60).holds is True
    assert brute_force_dominates(Poisson(1), Poisson(1), 60).holds is True
    assert brute_force_dominates(Poisson(2), Poisson(1), 60).holds is False
    assert brute_force_dominates(Poisson(0.56), TWO_POINT, 80).holds is True
    assert brute_force_dominates(Poisson(0.57), TWO_POINT, 80).holds is False


def test_brute_force_three_valued():
    res = brute_force_dominates(Poisson(1.0), PoissonMixture(np.array([0.999, 0.001]), np.array([0.0, 30.0])), 5)
    assert res.holds in (None, False)
    mix = PoissonMixture(np.array([0.5, 0.5]), np.array([1.9, 6.0]))
    res = brute_force_dominates(Poisson(2.0), mix, 0)
    assert res.holds is None
    assert brute_force_dominates(Poisson(2.0), mix, 200).holds is True
    with pytest.raises(ValueError):
        bool(res)


def test_brute_force_finite_and_infinite():
    assert brute_force_dominates(FinitePmf.point_mass(0), Poisson(5), 10).holds is True
    assert brute_force_dominates(Poisson(1), FinitePmf.point_mass(3), 10).holds is False
    inf = FinitePmf(np.array([0]), np.array([0.2]), infinity=0.8)
    assert brute_force_dominates(Poisson(1), inf, 20).holds is True


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.01, 1), st.floats(0, 10)), min_size=1, max_size=5),
    st.sampled_from([-1e-4, 1e-4, -1e-6, 1e-6, -0.1, 0.1]),
)
def test_criterion_equivalence(components, offset):
    w = np.array([c[0] for c in components])
    mix = PoissonMixture(w / w.sum(), np.array([c[1] for c in components]))
    crit = critical_rate(mix)
    lam = crit + offset
    if lam < 0:
        return
    res = brute_force_dominates(Poisson(lam), mix, 400)
    assert res.holds is (lam <= crit)


@given(st.lists(st.tuples(st.floats(0.01, 1), st.floats(0, 10)), min_size=1, max_size=5))
def test_zero_probability_identity(components):
    w = np.array([c[0] for c in components])
    mix = PoissonMixture(w / w.sum(), np.array([c[1] for c in components]))
    assert mix.zero_prob() == pytest.approx(math.exp(-critical_rate(mix)), rel=1e-12, abs=1e-300)
