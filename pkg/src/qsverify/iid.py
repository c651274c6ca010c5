"""Guaranteed infidelity and test planning when every system is prepared i.i.d.

With identical independent copies of a state of infidelity eps, each test
fails independently with probability nu * eps, so the number of failures is
binomial and the acceptance probability is B(N, k, nu * eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from scipy.optimize import brentq
from scipy.special import gammaincc

from .adversarial import StrategyLike, as_strategy
from .errors import DomainError, ResourceError
from .stats_core import (
    INFINITE,
    binom_sf,
    binom_tail,
    ceil_guard,
    certified_leq,
    first_true,
    floor_guard,
    largest_accepting_M,
    rel_entropy_ext,
)

_BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class IIDPlanResult:
    k_min: int
    N_min: int
    tail_at_eps: float
    tail_at_r_eps: float


def _check_kN(k: int, N: int) -> None:
    if k < 0 or N < k + 1:
        raise DomainError(f"need 0 <= k <= N - 1, got k={k}, N={N}")


def accept_prob_iid(N: int, k: int, strategy: StrategyLike, eps_state: float) -> float:
    """Acceptance probability of N i.i.d. copies with infidelity eps_state."""
    _check_kN(k, N)
    if not 0.0 <= eps_state <= 1.0:
        raise DomainError("eps_state must lie in [0, 1]")
    return binom_tail(N, k, as_strategy(strategy).nu * eps_state)


def eps_bar_iid(k: int, N: int, delta: float, strategy: StrategyLike) -> float:
    """Solve B(N, k, nu * eps) = delta for eps by bisection.

    Returns 1 when even eps = 1 is accepted with probability >= delta, and 0
    at delta = 1 (only the perfect state is accepted with certainty).  The
    upper end of the final bracket is returned, so the value never
    understates the guaranteed infidelity.
    """
    _check_kN(k, N)
    if not 0.0 < delta <= 1.0:
        raise DomainError("delta must lie in (0, 1]")
    nu = as_strategy(strategy).nu
    if binom_tail(N, k, nu) >= delta:
        return 1.0
    if delta == 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if binom_tail(N, k, nu * mid) > delta:
            lo = mid
        else:
            hi = mid
    return hi


def fixed_rate_bounds_iid(s: float, N: int, delta: float,
                          strategy: StrategyLike) -> Tuple[float, float]:
    """Bounds on eps_bar_iid(floor(nu s N), N, delta) for a fixed error rate s."""
    if not 0.0 < s < 1.0:
        raise DomainError("s must lie in (0, 1)")
    if not 0.0 < delta <= 0.5:
        raise DomainError("need 0 < delta <= 1/2")
    nu = as_strategy(strategy).nu
    L = math.log(1.0 / delta)
    return s - 1.0 / (nu * N), s + math.sqrt(2 * s * L / (nu * N)) + 2 * L / (nu * N)


def l_iid(N: int, epsilon: float, delta: float, strategy: StrategyLike) -> int:
    """Largest failure budget certified sound by the closed-form window; may be negative."""
    if not 0.0 < delta <= 0.5:
        raise DomainError("l_iid requires 0 < delta <= 1/2")
    nu = as_strategy(strategy).nu
    x = nu * epsilon * N
    return floor_guard(x - math.sqrt(2 * x * math.log(1.0 / delta)))


def sufficient_N_iid(s: float, epsilon: float, delta: float, strategy: StrategyLike) -> int:
    """N above which eps_bar_iid(floor(nu s N), N, delta) <= epsilon."""
    if not 0.0 <= s < epsilon < 1.0:
        raise DomainError("need 0 <= s < epsilon < 1")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    nu = as_strategy(strategy).nu
    return max(1, ceil_guard(math.log(1.0 / delta) / rel_entropy_ext(nu * s, nu * epsilon)))


def robust_pair_iid(epsilon: float, delta: float, strategy: StrategyLike, r: float,
                    s: float) -> Tuple[int, int]:
    """(k, N) meeting both tail conditions for an error rate s in (r eps, eps)."""
    if not r * epsilon < s < epsilon:
        raise DomainError("s must lie strictly between r*epsilon and epsilon")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    nu = as_strategy(strategy).nu
    div = min(rel_entropy_ext(nu * s, nu * r * epsilon), rel_entropy_ext(nu * s, nu * epsilon))
    n = ceil_guard(math.log(1.0 / delta) / div)
    return floor_guard(nu * s * n), n


def _beta(r: float, p: float) -> float:
    t = math.log1p(-p) - math.log1p(-r * p)
    return t / (math.log(r) + t)


def s_opt(strategy: StrategyLike, r: float, epsilon: float) -> float:
    """Error rate that equalizes the two divergences in robust_pair_iid."""
    if not 0.0 < r < 1.0:
        raise DomainError("s_opt requires 0 < r < 1")
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    nu = as_strategy(strategy).nu
    return _beta(r, nu * epsilon) / nu


def zeta_coeff(r: float, p: float) -> float:
    """Coefficient of ln(1/delta)/(nu eps) in the robust i.i.d. test count, at p = nu eps."""
    if not (0.0 < r < 1.0 and 0.0 < p < 1.0):
        raise DomainError("need 0 < r, p < 1")
    return p / rel_entropy_ext(_beta(r, p), p)


def xi_coeff(r: float) -> float:
    """Small-p limit of zeta_coeff."""
    if not 0.0 < r < 1.0:
        raise DomainError("need 0 < r < 1")
    a = (r - 1.0) / math.log(r)
    return 1.0 / (a * math.log(a) + 1.0 - a)


def N_fixed_failures_iid(k: int, epsilon: float, delta: float, strategy: StrategyLike,
                         hi: Optional[int] = None) -> int:
    """Smallest N >= k + 1 with B(N, k, nu eps) <= delta."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise DomainError("need 0 < epsilon, delta < 1")
    p = as_strategy(strategy).nu * epsilon
    return first_true(lambda n: certified_leq(binom_tail(n, k, p), delta), k + 1, hi)


def n_fixed_failures_iid_bounds(k: int, epsilon: float, delta: float,
                                strategy: StrategyLike) -> dict:
    """Closed-form brackets on N_fixed_failures_iid."""
    nu = as_strategy(strategy).nu
    L = math.log(1.0 / delta)
    pe = nu * epsilon
    out = {
        "lower_geometric": math.log(delta) / math.log1p(-pe),
        "upper_tight": ceil_guard((k + L + math.sqrt(L * L + 2 * k * L)) / pe),
        "upper": ceil_guard((k + 2 * L + math.sqrt(2 * k * L)) / pe),
    }
    if delta <= 0.5:
        out["lower_linear"] = k / pe
    return out


def t_poisson(k: int, delta: float) -> float:
    """Root x >= 0 of exp(-x) sum_{j<=k} x^j / j! = delta."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if k == 0:
        return math.log(1.0 / delta)
    f = lambda x: gammaincc(k + 1, x) - delta
    hi = k + 1.0 + 2 * math.log(1.0 / delta)
    while f(hi) > 0:
        hi *= 2
    return brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def tail_sound(k: int, N: int, epsilon: float, delta: float, strategy: StrategyLike) -> bool:
    return certified_leq(binom_tail(N, k, as_strategy(strategy).nu * epsilon), delta)


def tail_robust(k: int, N: int, epsilon: float, delta: float, strategy: StrategyLike,
                r: float) -> bool:
    return binom_sf(N, k, as_strategy(strategy).nu * r * epsilon) <= delta


def plan_min_tests_iid(epsilon: float, delta: float, strategy: StrategyLike,
                       r: float) -> IIDPlanResult:
    """Minimum number of tests for robust verification of i.i.d. preparations."""
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise DomainError("need 0 < epsilon, delta < 1")
    if not 0.0 <= r < 1.0:
        raise DomainError("need 0 <= r < 1")
    st = as_strategy(strategy)
    nu = st.nu
    hi = None
    if r == 0.0:
        k_min = 0
    else:
        cap = ceil_guard(nu * epsilon * ceil_guard(
            xi_coeff(r) * math.log(1.0 / delta) / (nu * epsilon))) + 1
        p_honest = nu * r * epsilon
        hint = 0
        for k in range(cap + 1):
            M = largest_accepting_M(k, p_honest, delta, lo_hint=hint)
            if M is None:
                continue
            if M is INFINITE:
                raise ResourceError("unbounded acceptance search")
            hint = M
            if M >= k + 1 and tail_sound(k, M, epsilon, delta, st):
                k_min, hi = k, M
                break
        else:
            raise ResourceError(f"failure-budget loop exceeded its cap k <= {cap}")
    n_min = N_fixed_failures_iid(k_min, epsilon, delta, st, hi=hi)
    return IIDPlanResult(
        k_min=k_min,
        N_min=n_min,
        tail_at_eps=binom_tail(n_min, k_min, nu * epsilon),
        tail_at_r_eps=binom_tail(n_min, k_min, nu * r * epsilon),
    )
