import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaincc

from qsverify import adversarial as adv
from qsverify import iid
from qsverify.errors import DomainError
from qsverify.stats_core import binom_tail, rel_entropy_ext

import oracles


def test_accept_prob_examples():
    assert iid.accept_prob_iid(50, 3, 0.5, 0.0) == 1.0
    assert iid.accept_prob_iid(1307, 0, 0.5, 0.005) == pytest.approx(0.0379, abs=5e-4)
    exact = oracles.tail_fraction(20, 3, Fraction(1, 10))
    assert iid.accept_prob_iid(20, 3, 0.5, 0.2) == pytest.approx(float(exact), rel=1e-13)


@pytest.mark.parametrize("N,delta,lam", [(1, 0.6, 0.5), (10, 0.05, 0.5), (1000, 1e-6, 0.2),
                                         (77, 0.5, 0.9)])
def test_eps_bar_iid_zero_failures(N, delta, lam):
    assert iid.eps_bar_iid(0, N, delta, lam) == pytest.approx(
        -math.expm1(math.log(delta) / N) / (1 - lam), rel=1e-13)


def test_eps_bar_iid_solves_defining_equation():
    k, N, delta, lam = 2, 40, 0.05, 0.5
    e = iid.eps_bar_iid(k, N, delta, lam)
    assert binom_tail(N, k, 0.5 * e) <= delta
    assert binom_tail(N, k, 0.5 * math.nextafter(e, 0) * (1 - 1e-14)) > delta


def test_eps_bar_iid_trivial():
    assert iid.eps_bar_iid(5, 10, binom_tail(10, 5, 0.5), 0.5) == 1.0
    with pytest.raises(DomainError):
        iid.eps_bar_iid(3, 3, 0.1, 0.5)


@settings(max_examples=300)
@given(st.integers(1, 500), st.floats(0.0, 0.95), st.floats(1e-6, 1.0), st.data())
def test_iid_never_exceeds_adversarial(N, lam, delta, data):
    k = data.draw(st.integers(0, N - 1))
    lam = max(lam, 1e-3)
    assert iid.eps_bar_iid(k, N, delta, lam) <= adv.eps_bar(k, N, delta, lam) * (1 + 1e-12)


def test_fixed_rate_bounds_iid():
    for s in (0.01, 0.05, 0.1):
        for N in (100, 1000, 10 ** 4, 10 ** 5):
            k = math.floor(0.5 * s * N)
            lo, hi = iid.fixed_rate_bounds_iid(s, N, 0.05, 0.5)
            assert lo < iid.eps_bar_iid(k, N, 0.05, 0.5) <= hi


def test_failure_window_iid():
    N, eps, delta, lam = 10 ** 4, 0.1, 0.01, 0.5
    x = 0.5 * eps * N
    ell = iid.l_iid(N, eps, delta, lam)
    assert ell == math.floor(x - math.sqrt(2 * x * math.log(1 / delta)))
    for k in (0, ell):
        assert iid.eps_bar_iid(k, N, delta, lam) <= eps
    assert iid.eps_bar_iid(math.ceil(x), N, delta, lam) > eps


def test_sufficient_N_iid():
    eps, delta, lam = 0.1, 0.01, 0.5
    assert iid.sufficient_N_iid(0.0, eps, delta, lam) == math.ceil(
        math.log(1 / delta) / -math.log1p(-0.5 * eps))
    for s in (0.0, 0.03, 0.07):
        n0 = iid.sufficient_N_iid(s, eps, delta, lam)
        for N in (n0, 3 * n0):
            assert iid.eps_bar_iid(math.floor(0.5 * s * N), N, delta, lam) <= eps


def test_robust_pair_example():
    eps, delta, lam, r, s = 0.1, 0.01, 0.5, 0.5, 0.08
    div = min(rel_entropy_ext(0.5 * s, 0.5 * r * eps), rel_entropy_ext(0.5 * s, 0.5 * eps))
    n = math.ceil(math.log(1 / delta) / div)
    assert iid.robust_pair_iid(eps, delta, lam, r, s) == (math.floor(0.5 * s * n), n)
    k, n = iid.robust_pair_iid(eps, delta, lam, r, iid.s_opt(lam, r, eps))
    assert iid.tail_sound(k, n, eps, delta, lam) and iid.tail_robust(k, n, eps, delta, lam, r)


def test_s_opt_grid_argmax():
    lam, r, eps = 0.5, 0.5, 0.1
    nu = 1 - lam
    grid = [r * eps + (1 - r) * eps * i / 20000 for i in range(1, 20000)]

    def score(s):
        return min(rel_entropy_ext(nu * s, nu * r * eps), rel_entropy_ext(nu * s, nu * eps))

    best = max(grid, key=score)
    assert iid.s_opt(lam, r, eps) == pytest.approx(best, abs=(1 - r) * eps / 20000)


def test_zeta_limit():
    assert iid.zeta_coeff(0.5, 1e-6) == pytest.approx(iid.xi_coeff(0.5), rel=1e-5)
    assert iid.xi_coeff(0.5) == pytest.approx(23.25, abs=0.05)


def test_zero_failure_count_iid():
    # closed form ceil(ln 0.01 / ln 0.995) = ceil(918.73) = 919
    assert iid.N_fixed_failures_iid(0, 0.01, 0.01, 0.5) == math.ceil(math.log(0.01) / math.log(0.995)) == 919


@pytest.mark.parametrize("k", [0, 2, 10, 50])
def test_fixed_failures_iid_brackets(k):
    eps, delta, lam = 0.02, 0.05, 0.5
    n = iid.N_fixed_failures_iid(k, eps, delta, lam)
    b = iid.n_fixed_failures_iid_bounds(k, eps, delta, lam)
    assert b["lower_geometric"] <= n and b["lower_linear"] <= n
    assert n <= b["upper_tight"] <= b["upper"]
    assert oracles.tail_float(n, k, 0.5 * eps) <= delta
    assert n == k + 1 or oracles.tail_float(n - 1, k, 0.5 * eps) > delta


@pytest.mark.parametrize("k", [0, 3])
def test_poisson_limit(k):
    delta, lam = 0.05, 0.5
    tp = iid.t_poisson(k, delta)
    gaps = [abs(e * iid.N_fixed_failures_iid(k, e, delta, lam) * (1 - lam) - tp)
            for e in (1e-2, 1e-3, 1e-4, 1e-5)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-4 * tp


def test_t_poisson():
    assert iid.t_poisson(0, 0.05) == math.log(20)
    for k in (1, 4, 30):
        x = iid.t_poisson(k, 0.01)
        assert gammaincc(k + 1, x) == pytest.approx(0.01, rel=1e-12)


def test_plan_iid_zero_robustness():
    p = iid.plan_min_tests_iid(0.01, 0.01, 0.5, 0.0)
    assert p.k_min == 0
    assert p.N_min == 919


@pytest.mark.parametrize("eps,delta,lam,r", [(0.2, 0.1, 0.5, 0.5), (0.3, 0.2, 0.5, 0.5),
                                             (0.1, 0.05, 0.3, 0.25)])
def test_plan_iid_matches_exhaustive_scan(eps, delta, lam, r):
    p = iid.plan_min_tests_iid(eps, delta, lam, r)
    ref = oracles.exhaustive_plan(
        2000, lambda k, n: iid.tail_sound(k, n, eps, delta, lam),
        lambda k, n: iid.tail_robust(k, n, eps, delta, lam, r))
    assert (p.k_min, p.N_min) == ref


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_plan_iid_bound(eps):
    p = iid.plan_min_tests_iid(eps, eps, 0.5, 0.5)
    assert p.N_min <= 41 / eps * math.log(1 / eps)
    assert iid.tail_sound(p.k_min, p.N_min, eps, eps, 0.5)
    assert iid.tail_robust(p.k_min, p.N_min, eps, eps, 0.5, 0.5)
    assert not (iid.tail_sound(p.k_min, p.N_min - 1, eps, eps, 0.5)
                and iid.tail_robust(p.k_min, p.N_min - 1, eps, eps, 0.5, 0.5))
