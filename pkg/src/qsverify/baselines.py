"""Test counts and acceptance probabilities of earlier verification protocols.

Several of these numbers are astronomically large (or small), so counts are
carried as :class:`BigCount` values holding a base-10 logarithm, plus the
exact integer when it is below 10**15.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

from .adversarial import N_fixed_failures, StrategyLike, as_strategy, plan_min_tests
from .errors import DomainError
from .stats_core import binom_tail, ceil_guard, floor_guard

EXACT_LIMIT = 10 ** 15
_LN10 = math.log(10.0)


@dataclass(frozen=True)
class BigCount:
    """A positive count stored as log10, with the exact value when small."""

    log10: float
    exact: Optional[int] = None

    @classmethod
    def of(cls, n: int) -> "BigCount":
        n = int(n)
        if n < 1:
            raise DomainError("counts must be positive")
        return cls(math.log10(n), n if n < EXACT_LIMIT else None)

    def __mul__(self, other: "BigCount") -> "BigCount":
        if self.exact is not None and other.exact is not None:
            return BigCount.of(self.exact * other.exact)
        return BigCount(self.log10 + other.log10, None)

    def to_json(self):
        return self.exact if self.exact is not None else {"log10": self.log10}

    def __str__(self) -> str:
        if self.exact is not None:
            return str(self.exact)
        return f"10^{self.log10:.6f}"


@dataclass(frozen=True)
class ProtocolCost:
    """Cost summary of one protocol at a common (epsilon, delta) target.

    ``accept_log10`` is the log10 of the acceptance probability (or of its
    upper bound) for i.i.d. preparations with infidelity eps_tau; it is None
    when the protocol has no such analysis.  ``total`` is tests times
    repetitions.
    """

    name: str
    tests: BigCount
    accept_log10: Optional[float]
    repetitions: Optional[BigCount]
    total: BigCount
    note: str = ""

    @property
    def accept_prob_bound(self) -> Optional[float]:
        return None if self.accept_log10 is None else 10.0 ** self.accept_log10


def _check_eps_delta(epsilon: float, delta: float) -> None:
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise DomainError("need 0 < epsilon, delta < 1")


# ---------------------------------------------------------------------------
# repetitions

def repetitions_required(p_acc: float, confidence_delta: float) -> int:
    """Runs needed so that at least one accepts with probability >= 1 - confidence_delta."""
    if not 0.0 < confidence_delta < 1.0:
        raise DomainError("confidence_delta must lie in (0, 1)")
    if not 0.0 < p_acc <= 1.0:
        raise DomainError("p_acc must lie in (0, 1]")
    if p_acc == 1.0:
        return 1
    return max(1, ceil_guard(math.log(confidence_delta) / math.log1p(-p_acc)))


def repetitions_required_log10(log10_p_acc: float, confidence_delta: float) -> BigCount:
    """repetitions_required for an acceptance probability given as log10 (may underflow)."""
    if log10_p_acc > -300.0:
        return BigCount.of(repetitions_required(10.0 ** log10_p_acc, confidence_delta))
    # ln(1 - p) = -p to double precision here
    return BigCount(math.log10(math.log(1.0 / confidence_delta)) - log10_p_acc, None)


# ---------------------------------------------------------------------------
# HM

def hm_tests(epsilon: float, delta: float) -> int:
    """Tests of the all-pass protocol with a 1/(delta eps) budget."""
    _check_eps_delta(epsilon, delta)
    return ceil_guard(1.0 / (delta * epsilon) - 1.0)


def hm_log10_accept_bound(eps_tau: float, N: int) -> float:
    if not 0.0 <= eps_tau <= 1.0:
        raise DomainError("eps_tau must lie in [0, 1]")
    return N * math.log1p(-eps_tau / 2.0) / _LN10


def hm_accept_bound(eps_tau: float, N: int) -> float:
    """Upper bound (1 - eps_tau/2)^N on acceptance of i.i.d. states."""
    return 10.0 ** hm_log10_accept_bound(eps_tau, N)


# ---------------------------------------------------------------------------
# ZH (the zero-failure special case)

def zh_tests(epsilon: float, delta: float, strategy: StrategyLike) -> int:
    _check_eps_delta(epsilon, delta)
    return N_fixed_failures(0, epsilon, delta, strategy)


def zh_log10_accept(eps_tau: float, N: int, strategy: StrategyLike) -> float:
    if not 0.0 <= eps_tau <= 1.0:
        raise DomainError("eps_tau must lie in [0, 1]")
    return N * math.log1p(-as_strategy(strategy).nu * eps_tau) / _LN10


def zh_accept(eps_tau: float, N: int, strategy: StrategyLike) -> float:
    """(1 - nu eps_tau)^N."""
    return 10.0 ** zh_log10_accept(eps_tau, N, strategy)


def zh_lower_bound(epsilon: float, delta: float, strategy: StrategyLike) -> float:
    """k_- + ceil(k_- (1 - eps)/(lambda eps)) with k_- = floor(log_lambda delta)."""
    _check_eps_delta(epsilon, delta)
    lam = as_strategy(strategy).lam
    if lam == 0.0:
        raise DomainError("requires 0 < lambda < 1")
    k_minus = floor_guard(math.log(delta) / math.log(lam))
    return k_minus + ceil_guard(k_minus * (1.0 - epsilon) / (lam * epsilon))


# ---------------------------------------------------------------------------
# TMMMF

def tmmmf_params(n: int, c: float):
    """(N_total, N_test, epsilon, delta) for n qudits and constant c."""
    if n < 2:
        raise DomainError("n must be at least 2")
    if not 64.0 / 5.0 < c < (n - 1) ** 2 / 4.0:
        raise DomainError("c must satisfy 64/5 < c < (n-1)^2/4")
    blocks = math.ceil(5 * n ** 4 * math.log(n) / 32)
    n_test = n * blocks
    return 2 * n_test, n_test, (2 * math.sqrt(c) + 1) / n, n ** (1 - 5 * c / 64)


def tmmmf_log10_accept_bound(n: int) -> float:
    """log10 of the bound exp(-0.245 n^3 ln n) at eps_tau = eps/2."""
    if n < 2:
        raise DomainError("n must be at least 2")
    return -0.245 * n ** 3 * math.log(n) / _LN10


def tmmmf_accept_bound(n: int) -> float:
    return 10.0 ** tmmmf_log10_accept_bound(n)


def tmmmf_min_qudits(epsilon: float, delta: float, n_max: int = 10 ** 7):
    """Smallest n (and a matching c) whose guarantees reach (epsilon, delta).

    Needs c > 64/5, c >= (64/5)(1 + ln(1/delta)/ln n) for the significance
    level, and (2 sqrt(c) + 1)/n <= epsilon; both sides are monotone in n.
    """
    _check_eps_delta(epsilon, delta)
    L = math.log(1.0 / delta)

    def c_needed(n: int) -> float:
        return 64.0 / 5.0 * (1.0 + L / math.log(n))

    def ok(n: int) -> bool:
        c = c_needed(n)
        return (2 * math.sqrt(c) + 1) / n <= epsilon and c < (n - 1) ** 2 / 4.0

    n = 3
    while not ok(n):
        n *= 2
        if n > n_max:
            raise DomainError("no admissible qudit number below n_max")
    lo, hi = n // 2, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    # open constraint c > 64/5: nudge upward when the delta condition is slack
    c = max(c_needed(hi), math.nextafter(64.0 / 5.0, math.inf))
    return hi, c


# ---------------------------------------------------------------------------
# TM

def _tm_total(n: int, k: int) -> BigCount:
    """m + n k with m the smallest integer >= (2 ln 2) n^3 k^(18/7)."""
    log10_m = math.log10(2 * math.log(2)) + 3 * math.log10(n) + 18.0 / 7.0 * math.log10(k)
    if log10_m < 15.0:
        m = math.ceil(2 * math.log(2) * n ** 3 * k ** (18.0 / 7.0))
        return BigCount.of(m + n * k)
    return BigCount(math.log10(10.0 ** (log10_m - 15.0) + n * k * 1e-15) + 15.0, None)


def tm_cost(epsilon: float, delta: float, n: int):
    """(k, N_TM) for n qubits at the smallest admissible k reaching (epsilon, delta).

    Infidelity and significance are both k^(-1/7), with k >= (4n)^7.
    """
    _check_eps_delta(epsilon, delta)
    if n < 1:
        raise DomainError("n must be positive")
    target = min(epsilon, delta)
    k = max((4 * n) ** 7, math.ceil(target ** -7 * (1 - 1e-12)))
    while k ** (-1.0 / 7.0) > target * (1 + 1e-12):
        k += 1
    return k, _tm_total(n, k)


def tm_samples(n: int) -> BigCount:
    """N_TM = m + n k at k = (4n)^7 and m = (2 ln 2) n^3 k^(18/7)."""
    if n < 1:
        raise DomainError("n must be positive")
    k = (4 * n) ** 7
    log10_m = (math.log10(2 * math.log(2)) + 3 * math.log10(n) + 18 * math.log10(4 * n))
    m_real = 10.0 ** log10_m
    total = m_real + n * k
    log10_total = math.log10(total)
    exact = math.ceil(m_real) + n * k if total < EXACT_LIMIT else None
    return BigCount(log10_total, exact)


# ---------------------------------------------------------------------------
# side-by-side comparison

def compare_protocols(epsilon: float, delta: float, strategy: StrategyLike, r: float,
                      eps_tau: Optional[float] = None, qudits: int = 1) -> List[ProtocolCost]:
    """One cost row per protocol; eps_tau defaults to epsilon / 2."""
    _check_eps_delta(epsilon, delta)
    st = as_strategy(strategy)
    if eps_tau is None:
        eps_tau = epsilon / 2.0
    rows = []

    n_hm = hm_tests(epsilon, delta)
    a_hm = hm_log10_accept_bound(eps_tau, n_hm)
    m_hm = repetitions_required_log10(a_hm, delta)
    rows.append(ProtocolCost("HM", BigCount.of(n_hm), a_hm, m_hm, BigCount.of(n_hm) * m_hm,
                             "acceptance is an upper bound, so repetitions are a lower bound"))

    n_zh = zh_tests(epsilon, delta, st)
    a_zh = zh_log10_accept(eps_tau, n_zh, st)
    m_zh = repetitions_required_log10(a_zh, delta)
    rows.append(ProtocolCost("ZH", BigCount.of(n_zh), a_zh, m_zh, BigCount.of(n_zh) * m_zh))

    n_q, _ = tmmmf_min_qudits(epsilon, delta)
    blocks = math.ceil(5 * n_q ** 4 * math.log(n_q) / 32)
    n_total = BigCount.of(2 * n_q * blocks)
    a_t = tmmmf_log10_accept_bound(n_q)
    m_t = repetitions_required_log10(a_t, delta)
    rows.append(ProtocolCost("TMMMF", n_total, a_t, m_t, n_total * m_t,
                             f"n={n_q} qudits; acceptance bound assumes eps_tau = eps/2"))

    _, n_tm = tm_cost(epsilon, delta, qudits)
    rows.append(ProtocolCost("TM", n_tm, None, None, n_tm,
                             f"n={qudits} qubits; robustness not analysed"))

    plan = plan_min_tests(epsilon, delta, st, r)
    p_this = binom_tail(plan.N_min, plan.k_min, st.nu * eps_tau)
    m_this = BigCount.of(repetitions_required(p_this, delta))
    rows.append(ProtocolCost("THIS", BigCount.of(plan.N_min), math.log10(p_this), m_this,
                             BigCount.of(plan.N_min) * m_this, f"k_min={plan.k_min}"))
    return rows
