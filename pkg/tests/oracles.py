"""Reference implementations used only by the tests.

Everything here is written from the defining formulas, independently of the
package kernels: exact rational sums, direct enumeration and dense matrices.
"""

from __future__ import annotations

import math
from functools import lru_cache
from fractions import Fraction
from itertools import product

import numpy as np


def tail_fraction(z: int, k: int, p) -> Fraction:
    """P[Bin(z, p) <= k] as an exact rational (p converted without rounding)."""
    p = Fraction(p)
    q = 1 - p
    return sum((math.comb(z, j) * p ** j * q ** (z - j) for j in range(min(k, z) + 1)),
               Fraction(0))


def tail_float(z: int, k: int, p: float) -> float:
    return float(tail_fraction(z, k, p))


def tail_mp(z: int, k: int, p: float, dps: int = 40) -> float:
    """P[Bin(z, p) <= k] by high-precision summation downward from j = k."""
    import mpmath as mp
    with mp.workdps(dps):
        p_ = mp.mpf(p)
        q_ = 1 - p_
        term = mp.exp(mp.loggamma(z + 1) - mp.loggamma(k + 1) - mp.loggamma(z - k + 1)
                      + k * mp.log(p_) + (z - k) * mp.log(q_))
        total = term
        ratio_base = q_ / p_
        mode = (z + 1) * p
        j = k
        tiny = mp.mpf(10) ** (-dps + 5)
        while j > 0:
            term = term * j / (z - j + 1) * ratio_base
            j -= 1
            total += term
            if j < mode and term < tiny * total:
                break
        return float(total)


def rel_entropy_mp(p: float, q: float) -> float:
    import mpmath as mp
    with mp.workdps(50):
        p_, q_ = mp.mpf(p), mp.mpf(q)
        return float(p_ * mp.log(p_ / q_) + (1 - p_) * mp.log((1 - p_) / (1 - q_)))


# ---------------------------------------------------------------------------
# the bad/good reduction, enumerated directly

@lru_cache(maxsize=None)
def accept_profile(k: int, N: int, lam: float):
    """Arrays over z = 0..N+1 of (acceptance, acceptance with a bad kept system).

    z of the N + 1 systems are bad and the kept one is a uniformly random
    slot; each tested bad system fails with probability 1 - lam.
    """
    nu = 1.0 - lam
    acc = np.empty(N + 2)
    bad = np.empty(N + 2)
    for z in range(N + 2):
        kept_good = Fraction(N + 1 - z, N + 1) * tail_fraction(z, k, nu) if z <= N else 0
        kept_bad = Fraction(z, N + 1) * tail_fraction(z - 1, k, nu) if z >= 1 else 0
        acc[z] = float(kept_good + kept_bad)
        bad[z] = float(kept_bad)
    return acc, bad


def eps_bar_brute(k: int, N: int, delta: float, lam: float) -> float:
    """Max over mixtures of P[bad kept | accept] subject to acceptance >= delta.

    The objective is linear-fractional, so the optimum sits on a mixture of at
    most two support points; every pair is enumerated.
    """
    acc, bad = accept_profile(k, N, lam)
    best = 0.0
    ok = acc >= delta
    if ok.any():
        best = float(np.max(bad[ok] / acc[ok]))
    hi = np.nonzero(acc >= delta)[0]
    lo = np.nonzero(acc < delta)[0]
    if hi.size and lo.size:
        ai, aj = acc[hi][:, None], acc[lo][None, :]
        bi, bj = bad[hi][:, None], bad[lo][None, :]
        w = (delta - aj) / (ai - aj)
        vals = (w * bi + (1 - w) * bj) / delta
        best = max(best, float(vals.max()))
    return best


# ---------------------------------------------------------------------------
# exhaustive planner scans (every (k, N) pair is visited)

def exhaustive_plan(n_max: int, sound, robust):
    """First N (then smallest k) with both predicates true, visiting all k < N."""
    for n in range(1, n_max + 1):
        feasible = [k for k in range(n) if robust(k, n) and sound(k, n)]
        if feasible:
            return min(feasible), n
    return None


# ---------------------------------------------------------------------------
# dense qudit linear algebra

def dense_graph_state(d: int, n: int, edges) -> np.ndarray:
    """prod CZ^m |+>^n from full d^n x d^n matrices."""
    w = np.exp(2j * np.pi / d)
    plus = np.ones(d) / math.sqrt(d)
    psi = plus
    for _ in range(n - 1):
        psi = np.kron(psi, plus)
    basis = list(product(range(d), repeat=n))
    for i, j, m in edges:
        phases = np.array([w ** ((m * b[i] * b[j]) % d) for b in basis])
        psi = phases * psi
    return psi


def dense_site_op(d: int, n: int, site: int, op: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for s in range(n):
        out = np.kron(out, op if s == site else np.eye(d))
    return out


def dense_generator(d: int, n: int, edges, i: int) -> np.ndarray:
    """X_i times Z_j^{m_ij} on every neighbour j."""
    X = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    Z = np.diag(np.exp(2j * np.pi / d) ** np.arange(d))
    g = dense_site_op(d, n, i, X)
    for a, b, m in edges:
        if i in (a, b):
            j = b if a == i else a
            g = g @ dense_site_op(d, n, j, np.linalg.matrix_power(Z, m % d))
    return g


def dense_stabilizer(d: int, n: int, edges, k_vec) -> np.ndarray:
    out = np.eye(d ** n, dtype=complex)
    for i, ki in enumerate(k_vec):
        out = out @ np.linalg.matrix_power(dense_generator(d, n, edges, i), ki % d)
    return out
