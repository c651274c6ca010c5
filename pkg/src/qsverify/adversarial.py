"""Guaranteed infidelity and test-number planning in the adversarial scenario.

The adversary may prepare any state on N + 1 systems.  After a random
permutation the problem reduces to a permutation-invariant classical model:
z of the N + 1 systems are "bad", a bad system passes a test with probability
lambda and a good one always passes.  ``h_z`` is the acceptance probability
for a point mass at z and ``g_z`` the probability of accepting with a good
unmeasured system.  The guaranteed infidelity is the worst conditional
infidelity of the unmeasured system over mixtures with acceptance >= delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

from .errors import DomainError, ResourceError
from .stats_core import (
    INFINITE,
    binom_pmf,
    binom_sf,
    binom_tail,
    ceil_guard,
    certified_leq,
    first_true,
    floor_guard,
    largest_accepting_M,
    rel_entropy,
    z_star,
)


@dataclass(frozen=True)
class Strategy:
    """Homogeneous strategy: eigenvalue 1 on the target and ``lam`` elsewhere."""

    lam: float

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0) or math.isnan(self.lam):
            raise DomainError(f"lambda must lie in [0, 1), got {self.lam!r}")

    @property
    def nu(self) -> float:
        """Spectral gap 1 - lambda."""
        return 1.0 - self.lam


StrategyLike = Union[Strategy, float]


def as_strategy(s: StrategyLike) -> Strategy:
    return s if isinstance(s, Strategy) else Strategy(float(s))


@dataclass(frozen=True)
class ProtocolSpec:
    N: int
    k: int
    epsilon: float
    delta: float
    r: float = 0.0

    def __post_init__(self):
        if not 0 <= self.k <= self.N - 1:
            raise DomainError("need 0 <= k <= N - 1")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")
        if not 0.0 < self.delta <= 1.0:
            raise DomainError("delta must lie in (0, 1]")
        if not 0.0 <= self.r < 1.0:
            raise DomainError("r must lie in [0, 1)")


@dataclass(frozen=True)
class MixtureSpec:
    """Distribution over the number z of bad systems among N + 1."""

    weights: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple((int(z), float(w)) for z, w in self.weights))
        if any(w < 0 for _, w in self.weights):
            raise DomainError("mixture masses must be nonnegative")
        if abs(math.fsum(w for _, w in self.weights) - 1.0) > 1e-12:
            raise DomainError("mixture masses must sum to 1")

    @classmethod
    def point(cls, z: int) -> "MixtureSpec":
        return cls(((z, 1.0),))

    def support_max(self) -> int:
        return max(z for z, _ in self.weights)


@dataclass(frozen=True)
class PlanResult:
    k_min: int
    N_min: int
    eps_bar_at_plan: float
    accept_prob_at_r: float


# ---------------------------------------------------------------------------
# h_z, g_z and the exact guaranteed infidelity

def _check_kN(k: int, N: int) -> None:
    if k < 0 or N < k + 1:
        raise DomainError(f"need 0 <= k <= N - 1, got k={k}, N={N}")


def _tail(z: int, k: int, nu: float) -> float:
    return 1.0 if z <= k else binom_tail(z, k, nu)


def h_z(z: int, k: int, N: int, strategy: StrategyLike) -> float:
    """Acceptance probability when exactly z of the N + 1 systems are bad."""
    _check_kN(k, N)
    if not 0 <= z <= N + 1:
        raise DomainError(f"z must lie in [0, N + 1], got {z}")
    if z <= k:
        return 1.0
    nu = as_strategy(strategy).nu
    return ((N - z + 1) * _tail(z, k, nu) + z * _tail(z - 1, k, nu)) / (N + 1)


def g_z(z: int, k: int, N: int, strategy: StrategyLike) -> float:
    """Probability of accepting with a good unmeasured system, given z bad."""
    _check_kN(k, N)
    if not 0 <= z <= N + 1:
        raise DomainError(f"z must lie in [0, N + 1], got {z}")
    if z <= k:
        return (N - z + 1) / (N + 1)
    nu = as_strategy(strategy).nu
    return (N - z + 1) * _tail(z, k, nu) / (N + 1)


def _bad_accept(z: int, k: int, N: int, nu: float) -> float:
    """h_z - g_z: accept while the unmeasured system is bad."""
    if z == 0:
        return 0.0
    return z * _tail(z - 1, k, nu) / (N + 1)


def _h_step(z: int, k: int, N: int, nu: float) -> float:
    """h_z - h_{z+1} for k <= z <= N, written without cancellation."""
    a = z * binom_pmf(k, z - 1, nu) if z >= 1 else 0.0
    b = (N - z) * binom_pmf(k, z, nu)
    return nu * (a + b) / (N + 1)


def eps_bar(k: int, N: int, delta: float, strategy: StrategyLike) -> float:
    """Exact guaranteed infidelity for N tests with at most k failures."""
    _check_kN(k, N)
    if not 0.0 < delta <= 1.0:
        raise DomainError("delta must lie in (0, 1]")
    st = as_strategy(strategy)
    if st.lam == 0.0:
        raise DomainError("eps_bar requires 0 < lambda < 1")
    nu = st.nu
    if delta <= binom_tail(N, k, nu):
        return 1.0

    def h(z: int) -> float:
        if z <= k:
            return 1.0
        return ((N - z + 1) * _tail(z, k, nu) + z * _tail(z - 1, k, nu)) / (N + 1)

    # largest z in [k, N] with h_z >= delta; h_{N+1} < delta here
    zhat = first_true(lambda z: h(z) < delta, k, N + 1) - 1
    step = _h_step(zhat, k, N, nu)
    if step <= 0.0:
        kappa = 1.0
    else:
        kappa = min(1.0, max(0.0, (delta - h(zhat + 1)) / step))
    bad = (1.0 - kappa) * _bad_accept(zhat + 1, k, N, nu) + kappa * _bad_accept(zhat, k, N, nu)
    return min(1.0, bad / delta)


def accept_and_fidelity(mixture: MixtureSpec, k: int, N: int,
                        strategy: StrategyLike) -> Tuple[float, Optional[float]]:
    """Acceptance probability and conditional fidelity of the unmeasured system.

    Returns ``(p_k, None)`` when the acceptance probability vanishes.
    """
    _check_kN(k, N)
    if mixture.support_max() > N + 1 or min(z for z, _ in mixture.weights) < 0:
        raise DomainError("mixture must be supported on 0..N+1")
    st = as_strategy(strategy)
    acc = math.fsum(w * h_z(z, k, N, st) for z, w in mixture.weights if w > 0)
    good = math.fsum(w * g_z(z, k, N, st) for z, w in mixture.weights if w > 0)
    if acc <= 0.0:
        return 0.0, None
    return acc, min(1.0, good / acc)


# ---------------------------------------------------------------------------
# analytic bounds

def eps_bar_bounds(k: int, N: int, delta: float, strategy: StrategyLike) -> Tuple[float, float]:
    """Sandwich on eps_bar built from the critical trial count z*."""
    _check_kN(k, N)
    if not 0.0 < delta <= 0.5:
        raise DomainError("eps_bar_bounds requires 0 < delta <= 1/2")
    st = as_strategy(strategy)
    lam, nu = st.lam, st.nu
    zs = z_star(k, delta, lam)
    zl = zs - 1
    den_lo = lam * (N + 1) + nu * zl - k
    lower = 1.0 if den_lo <= 0 else min(1.0, (zl - k) / den_lo)
    num = zs - k + 1 + math.sqrt(lam * k)
    den_hi = lam * (N - zs) + num
    upper = 1.0 if den_hi <= 0 else min(1.0, num / den_hi)
    return lower, upper


def fixed_rate_bounds(s: float, N: int, delta: float,
                      strategy: StrategyLike) -> Tuple[float, float]:
    """Bounds on eps_bar(floor(nu s N), N, delta) for a fixed error rate s."""
    if not 0.0 < s < 1.0:
        raise DomainError("s must lie in (0, 1)")
    if N < 1:
        raise DomainError("N must be positive")
    st = as_strategy(strategy)
    lam, nu = st.lam, st.nu
    if lam == 0.0:
        raise DomainError("fixed_rate_bounds requires 0 < lambda < 1")
    L = math.log(1.0 / delta)
    uppers = []
    if 0.0 < delta <= 0.25:
        uppers.append(s + math.sqrt(s * L / N) / (nu * lam)
                      + L / (2 * nu * nu * lam * N) + 2.0 / (lam * N))
    if lam >= 0.5 and 0.0 < delta <= 1.0 / 3.0:
        uppers.append(s + 2.0 * math.sqrt(s * L / (nu * lam * N))
                      + 2.0 * L / (nu * N) + 2.0 / (lam * N))
    if not uppers:
        raise DomainError("need delta <= 1/4, or lambda >= 1/2 and delta <= 1/3")
    return s - 1.0 / (nu * N), min(uppers)


def sufficient_N_fixed_rate(s: float, epsilon: float, delta: float,
                            strategy: StrategyLike) -> int:
    """N above which eps_bar(floor(nu s N), N, delta) <= epsilon is guaranteed."""
    if not 0.0 <= s < epsilon < 1.0:
        raise DomainError("need 0 <= s < epsilon < 1")
    if not 0.0 < delta <= 0.5:
        raise DomainError("need 0 < delta <= 1/2")
    st = as_strategy(strategy)
    lam, nu = st.lam, st.nu
    if lam == 0.0:
        raise DomainError("requires 0 < lambda < 1")
    L = math.log(1.0 / delta)
    gap = epsilon - s
    n = epsilon * (L + 4 * lam * nu * nu) / (lam * nu * gap) ** 2
    if lam >= 0.5:
        n = min(n, 4 * epsilon * (L + nu) / (lam * nu * gap * gap))
    return max(1, ceil_guard(n))


def allowed_failures(N: int, epsilon: float, delta: float, strategy: StrategyLike) -> int:
    """Largest k certified sound by the closed-form window; may be negative."""
    if not 0.0 < delta <= 0.25:
        raise DomainError("allowed_failures requires 0 < delta <= 1/4")
    st = as_strategy(strategy)
    lam, nu = st.lam, st.nu
    if lam == 0.0:
        raise DomainError("requires 0 < lambda < 1")
    L = math.log(1.0 / delta)
    l_main = floor_guard(nu * epsilon * N - math.sqrt(N * epsilon * L) / lam
                         - L / (2 * lam * nu) - 2 * nu / lam)
    if lam >= 0.5:
        l_alt = floor_guard(nu * epsilon * N - 2 * math.sqrt(nu * epsilon * N * L / lam)
                            - 2 * L - 2 * nu / lam)
        return max(l_main, l_alt)
    return l_main


def asymptotic_accept(N: int, epsilon: float, eps_tau: float, strategy: StrategyLike) -> float:
    """Leading-order acceptance 1 - exp(-D(nu eps || nu eps_tau) N); diagnostic only."""
    if not 0.0 < eps_tau < epsilon < 1.0:
        raise DomainError("need 0 < eps_tau < epsilon < 1")
    nu = as_strategy(strategy).nu
    return -math.expm1(-rel_entropy(nu * epsilon, nu * eps_tau) * N)


# ---------------------------------------------------------------------------
# planning

def is_sound(k: int, N: int, epsilon: float, delta: float, strategy: StrategyLike) -> bool:
    return certified_leq(eps_bar(k, N, delta, strategy), epsilon)


def is_robust(k: int, N: int, epsilon: float, delta: float, strategy: StrategyLike,
              r: float) -> bool:
    """B(N, k, nu r eps) >= 1 - delta, evaluated on the upper tail."""
    nu = as_strategy(strategy).nu
    return binom_sf(N, k, nu * r * epsilon) <= delta


def verify_plan(k: int, N: int, epsilon: float, delta: float, strategy: StrategyLike,
                r: float) -> bool:
    """Both the soundness and robustness conditions for the pair (k, N)."""
    if not 0 <= k <= N - 1:
        return False
    return (is_robust(k, N, epsilon, delta, strategy, r)
            and is_sound(k, N, epsilon, delta, strategy))


def N_fixed_failures(k: int, epsilon: float, delta: float, strategy: StrategyLike,
                     hi: Optional[int] = None) -> int:
    """Smallest N >= k + 1 with eps_bar(k, N, delta) <= epsilon."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
        raise DomainError("need 0 < epsilon, delta < 1")
    st = as_strategy(strategy)
    return first_true(lambda n: is_sound(k, n, epsilon, delta, st), k + 1, hi)


def n_fixed_failures_bounds(k: int, epsilon: float, delta: float,
                            strategy: StrategyLike) -> dict:
    """Closed-form brackets on N_fixed_failures (valid for delta <= 1/2)."""
    if not 0.0 < delta <= 0.5:
        raise DomainError("bounds require 0 < delta <= 1/2")
    st = as_strategy(strategy)
    lam, nu = st.lam, st.nu
    L = math.log(1.0 / delta)
    zs = z_star(k, delta, lam)
    upper = (k / (nu * epsilon) + L / (2 * nu * nu * lam * epsilon)
             + math.sqrt(2 * nu * k * L) / (2 * nu * nu * lam * epsilon)
             + math.sqrt(lam * k) / (lam * epsilon) + 2.0 / (lam * epsilon))
    if lam >= 0.5:
        upper = min(upper, k / (nu * epsilon) + 2 * L / (nu * epsilon)
                    + math.sqrt(2 * lam * k * L) / (lam * nu * epsilon)
                    + math.sqrt(lam * k) / (lam * epsilon) + 2.0 / (lam * epsilon))
    return {
        "lower_linear": k / (nu * epsilon),
        "lower_log": ((1 - nu * epsilon) * L / (lam * epsilon * math.log(1.0 / lam))
                      - (1 - epsilon) * (k + 1) / (lam * epsilon) - 2),
        "lower_zstar": ((1 - nu * epsilon) * (zs - 1) - (1 - epsilon) * k) / (lam * epsilon) - 1,
        "upper_zstar": (zs - k + 1 + math.sqrt(lam * k)) / (lam * epsilon),
        "upper": upper,
    }


def theorem3_plan(epsilon: float, delta: float, strategy: StrategyLike,
                  r: float) -> Tuple[int, int]:
    """Closed-form (k, N) pair meeting both conditions."""
    if not 0.0 < delta <= 0.5:
        raise DomainError("closed-form plan requires 0 < delta <= 1/2")
    if not 0.0 < epsilon < 1.0 or not 0.0 <= r < 1.0:
        raise DomainError("need 0 < epsilon < 1 and 0 <= r < 1")
    st = as_strategy(strategy)
    lam, nu = st.lam, st.nu
    if lam == 0.0:
        raise DomainError("requires 0 < lambda < 1")
    L = math.log(1.0 / delta)
    a = lam * math.sqrt(2 * nu)
    n_main = ceil_guard(((a + 1) / (lam * nu * (1 - r))) ** 2 * (L + 4 * lam * nu * nu) / epsilon)
    k_main = floor_guard((a + r) / (a + 1) * nu * epsilon * n_main)
    if lam >= 0.5:
        sl, s2 = math.sqrt(lam), math.sqrt(2.0)
        n_alt = ceil_guard(2 * ((s2 + sl) / (sl * (1 - r))) ** 2 * (L + nu) / (nu * epsilon))
        if n_alt < n_main:
            return floor_guard((sl + s2 * r) / (sl + s2) * nu * epsilon * n_alt), n_alt
    return k_main, n_main


def closed_form_N(epsilon: float, delta: float, strategy: StrategyLike, r: float) -> int:
    """N of the general closed-form plan (valid for every lambda)."""
    st = as_strategy(strategy)
    lam, nu = st.lam, st.nu
    L = math.log(1.0 / delta)
    a = lam * math.sqrt(2 * nu)
    return ceil_guard(((a + 1) / (lam * nu * (1 - r))) ** 2 * (L + 4 * lam * nu * nu) / epsilon)


def plan_min_tests(epsilon: float, delta: float, strategy: StrategyLike, r: float) -> PlanResult:
    """Minimum number of tests for robust verification, with its failure budget."""
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise DomainError("need 0 < epsilon, delta < 1")
    if not 0.0 <= r < 1.0:
        raise DomainError("need 0 <= r < 1")
    st = as_strategy(strategy)
    if st.lam == 0.0:
        raise DomainError("adversarial planning requires 0 < lambda < 1")
    nu = st.nu
    hi = None
    if r == 0.0:
        k_min = 0
    else:
        # a plan feasible at min(delta, 1/2) is feasible at delta
        cap = ceil_guard(nu * epsilon * closed_form_N(epsilon, min(delta, 0.5), st, r)) + 1
        p_honest = nu * r * epsilon
        hint = 0
        for k in range(cap + 1):
            M = largest_accepting_M(k, p_honest, delta, lo_hint=hint)
            if M is None:
                continue
            if M is INFINITE:
                raise ResourceError("unbounded acceptance search")
            hint = M
            if M >= k + 1 and is_sound(k, M, epsilon, delta, st):
                k_min, hi = k, M
                break
        else:
            raise ResourceError(f"failure-budget loop exceeded its cap k <= {cap}")
    n_min = N_fixed_failures(k_min, epsilon, delta, st, hi=hi)
    return PlanResult(
        k_min=k_min,
        N_min=n_min,
        eps_bar_at_plan=eps_bar(k_min, n_min, delta, st),
        accept_prob_at_r=binom_tail(n_min, k_min, nu * r * epsilon),
    )


def scan_min_tests(epsilon: float, delta: float, strategy: StrategyLike, r: float,
                   n_max: int, sound=None, robust=None) -> Optional[Tuple[int, int]]:
    """Direct scan of N = 1..n_max for the first N admitting a feasible k.

    For each N the robust k form an up-set and the sound k a down-set, so it
    suffices to test sound(k) for robust k in increasing order until the
    first unsound one.  Returns (k, N) with the smallest feasible k, or None.
    """
    st = as_strategy(strategy)
    sound = sound or (lambda k, n: is_sound(k, n, epsilon, delta, st))
    robust = robust or (lambda k, n: is_robust(k, n, epsilon, delta, st, r))
    for n in range(1, n_max + 1):
        for k in range(n):
            if not robust(k, n):
                continue
            if sound(k, n):
                return k, n
            break
    return None
