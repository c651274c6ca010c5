"""Binomial tail, relative entropy and monotone search kernels.

Every analytic module builds on the lower tail

    B(z, k, p) = sum_{j<=k} C(z, j) p^j (1 - p)^(z - j)

with the convention 0^0 = 1.  Individual terms are evaluated in log space
with the saddle-point (deviance) form of the binomial pmf, which keeps the
log of each term accurate to a few ulps of its magnitude even for z ~ 1e7.
Terms are then rescaled by the largest one and summed with ``math.fsum``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ResourceError

# Relative tolerance used when certifying soundness conditions.
CERT_RTOL = 1e-12
# Absolute guard applied before floor/ceil truncation.
INT_GUARD = 1e-9

_LN_2PI = math.log(2.0 * math.pi)
_LN_SQRT_2PI = 0.5 * _LN_2PI


class InfiniteCount:
    """Marker for an unbounded search result (e.g. p = 0 in a tail search)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITE"


INFINITE = InfiniteCount()


def floor_guard(x: float) -> int:
    """Floor that snaps values within INT_GUARD of an integer onto it."""
    r = round(x)
    if abs(x - r) <= INT_GUARD:
        return int(r)
    return math.floor(x)


def ceil_guard(x: float) -> int:
    """Ceil that snaps values within INT_GUARD of an integer onto it."""
    r = round(x)
    if abs(x - r) <= INT_GUARD:
        return int(r)
    return math.ceil(x)


def certified_leq(value: float, bound: float, rtol: float = CERT_RTOL) -> bool:
    """``value <= bound`` with the favorable side shrunk by ``rtol``."""
    return value * (1.0 + rtol) <= bound


def _check_prob(name: str, p: float) -> None:
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")


# ---------------------------------------------------------------------------
# log pmf via the saddle-point expansion

def _stirlerr_small(n: int) -> float:
    return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI


_STIRLERR_TABLE = np.array([0.0] + [_stirlerr_small(n) for n in range(1, 16)])

_S0 = 1.0 / 12
_S1 = 1.0 / 360
_S2 = 1.0 / 1260
_S3 = 1.0 / 1680
_S4 = 1.0 / 1188


def _stirlerr(n: np.ndarray) -> np.ndarray:
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for integer-valued arrays n >= 0."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    out[small] = _STIRLERR_TABLE[n[small].astype(int)]
    big = ~small
    if np.any(big):
        m = n[big]
        nn = m * m
        series = (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / m
        series = np.where(m > 35, (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / m, series)
        series = np.where(m > 80, (_S0 - (_S1 - _S2 / nn) / nn) / m, series)
        series = np.where(m > 500, (_S0 - _S1 / nn) / m, series)
        out[big] = series
    return out


def _bd0(x: np.ndarray, np_: np.ndarray) -> np.ndarray:
    """Deviance term x log(x/np) + np - x, accurate when x is close to np."""
    x = np.asarray(x, dtype=float)
    np_ = np.asarray(np_, dtype=float) * np.ones_like(x)
    out = np.empty_like(x)
    close = np.abs(x - np_) < 0.1 * (x + np_)
    far = ~close
    if np.any(far):
        xf, mf = x[far], np_[far]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[far] = np.where(xf > 0, xf * np.log(xf / mf), 0.0) + mf - xf
    if np.any(close):
        xc, mc = x[close], np_[close]
        v = (xc - mc) / (xc + mc)
        s = (xc - mc) * v
        ej = 2.0 * xc * v
        v2 = v * v
        for j in range(1, 200):
            ej = ej * v2
            s1 = s + ej / (2 * j + 1)
            if np.array_equal(s1, s):
                break
            s = s1
        out[close] = s
    return out


def binom_logpmf(j, z: int, p: float) -> np.ndarray:
    """Log of C(z, j) p^j (1-p)^(z-j) for an array of j, with 0 < p < 1."""
    j = np.atleast_1d(np.asarray(j, dtype=float))
    q = 1.0 - p
    out = np.empty_like(j)
    zero = j == 0
    full = j == z
    mid = ~(zero | full)
    if np.any(zero):
        lc = -_bd0(np.array([float(z)]), z * q)[0] - z * p if p < 0.1 else z * math.log1p(-p)
        out[zero] = lc
    if np.any(full):
        lc = -_bd0(np.array([float(z)]), z * p)[0] - z * q if q < 0.1 else z * math.log(p)
        out[full] = lc
    if np.any(mid):
        x = j[mid]
        lc = (_stirlerr(np.array([float(z)]))[0] - _stirlerr(x) - _stirlerr(z - x)
              - _bd0(x, z * p) - _bd0(z - x, z * q))
        lf = _LN_2PI + np.log(x) + np.log1p(-x / z)
        out[mid] = lc - 0.5 * lf
    return out


def _stirlerr_scalar(n: float) -> float:
    if n <= 15:
        return float(_STIRLERR_TABLE[int(n)])
    nn = n * n
    if n > 500:
        return (_S0 - _S1 / nn) / n
    if n > 80:
        return (_S0 - (_S1 - _S2 / nn) / nn) / n
    if n > 35:
        return (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / n
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / n


def _bd0_scalar(x: float, m: float) -> float:
    if abs(x - m) < 0.1 * (x + m):
        v = (x - m) / (x + m)
        s = (x - m) * v
        ej = 2.0 * x * v
        v2 = v * v
        for j in range(1, 200):
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                break
            s = s1
        return s
    return (x * math.log(x / m) if x > 0 else 0.0) + m - x


def _logpmf_scalar(j: int, z: int, p: float) -> float:
    """Scalar twin of binom_logpmf, free of array overhead."""
    q = 1.0 - p
    if j == 0:
        return -_bd0_scalar(float(z), z * q) - z * p if p < 0.1 else z * math.log1p(-p)
    if j == z:
        return -_bd0_scalar(float(z), z * p) - z * q if q < 0.1 else z * math.log(p)
    x = float(j)
    lc = (_stirlerr_scalar(float(z)) - _stirlerr_scalar(x) - _stirlerr_scalar(z - x)
          - _bd0_scalar(x, z * p) - _bd0_scalar(z - x, z * q))
    return lc - 0.5 * (_LN_2PI + math.log(x) + math.log1p(-x / z))


def _log_sum_from(z: int, start: int, stop: int, step: int, p: float) -> float:
    """Log of sum_{j=start, start+step, ...} pmf(j) stopping before ``stop``.

    Only the first term is evaluated through the saddle-point form; later
    terms follow from the exact ratio of neighbouring pmf values.  Terms
    must decrease along the walk (true on either side of the mode by
    log-concavity), and the walk stops once a geometric bound on the
    remainder is negligible.
    """
    if (start - stop) * step >= 0:
        return -math.inf
    anchor = _logpmf_scalar(start, z, p)
    q = 1.0 - p
    factor = q / p if step < 0 else p / q
    parts: list[float] = [1.0]
    total = 1.0
    cur = 1.0
    pos = start
    chunk = 64
    while True:
        end = pos + step * chunk
        if (end - (stop - step)) * step > 0:
            end = stop - step
        if (end - pos) * step <= 0:
            break
        js = np.arange(pos, end, step, dtype=float)
        if step < 0:
            ratios = js / (z - js + 1.0) * factor
        else:
            ratios = (z - js) / (js + 1.0) * factor
        vals = cur * np.cumprod(ratios)
        parts.extend(vals.tolist())
        total = math.fsum(parts)
        cur = float(vals[-1])
        pos = end
        last_ratio = float(ratios[-1])
        if cur == 0.0:
            break
        if last_ratio < 1.0 and cur * last_ratio / (1.0 - last_ratio) <= 1e-18 * total:
            break
        chunk = min(chunk * 4, 1 << 16)
    return anchor + math.log(total)


def _tail_pieces(z: int, k: int, p: float) -> tuple[str, float]:
    """Return ('lower', log B) or ('upper', log(1 - B)), whichever is accurate."""
    if k <= z * p:
        return "lower", _log_sum_from(z, k, -1, -1, p)
    return "upper", _log_sum_from(z, k + 1, z + 1, 1, p)


def _validate_tail(z: int, k: int, p: float) -> None:
    if z < 0 or k < 0:
        raise DomainError("z and k must be nonnegative")
    if k > z:
        raise DomainError(f"binomial tail requires k <= z, got k={k}, z={z}")
    _check_prob("p", p)


def binom_tail(z: int, k: int, p: float) -> float:
    """Lower binomial tail B(z, k, p) = P[Bin(z, p) <= k]."""
    _validate_tail(z, k, p)
    if k == z or p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    side, lv = _tail_pieces(z, k, p)
    if side == "lower":
        return min(1.0, math.exp(lv))
    return max(0.0, -math.expm1(lv))


def binom_sf(z: int, k: int, p: float) -> float:
    """Upper tail 1 - B(z, k, p) = P[Bin(z, p) > k], accurate when tiny."""
    _validate_tail(z, k, p)
    if k == z or p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    side, lv = _tail_pieces(z, k, p)
    if side == "upper":
        return min(1.0, math.exp(lv))
    return max(0.0, -math.expm1(lv))


def log_binom_tail(z: int, k: int, p: float) -> float:
    """Natural log of B(z, k, p); finite even when B underflows."""
    _validate_tail(z, k, p)
    if k == z or p == 0.0:
        return 0.0
    if p == 1.0:
        return -math.inf
    side, lv = _tail_pieces(z, k, p)
    if side == "lower":
        return min(0.0, lv)
    return math.log1p(-math.exp(lv))


def binom_pmf(j: int, z: int, p: float) -> float:
    """C(z, j) p^j (1-p)^(z-j) with 0^0 = 1."""
    if j < 0 or j > z:
        return 0.0
    if p == 0.0:
        return 1.0 if j == 0 else 0.0
    if p == 1.0:
        return 1.0 if j == z else 0.0
    return math.exp(_logpmf_scalar(j, z, p))


def binom_tail_exact(z: int, k: int, p) -> Fraction:
    """Exact rational tail; ``p`` is converted to a Fraction without rounding."""
    if k > z:
        raise DomainError("k > z")
    p = Fraction(p)
    q = 1 - p
    total = Fraction(0)
    c = 1
    for j in range(k + 1):
        total += c * p ** j * q ** (z - j)
        c = c * (z - j) // (j + 1)
    return total


# ---------------------------------------------------------------------------
# relative entropy and Chernoff bounds

def rel_entropy(p: float, q: float) -> float:
    """Binary relative entropy D(p||q) in nats, for 0 < p, q < 1."""
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise DomainError(f"rel_entropy requires 0 < p, q < 1, got p={p}, q={q}")
    if p == q:
        return 0.0
    a = p * math.log(p / q)
    b = (1.0 - p) * (math.log1p(-p) - math.log1p(-q))
    return max(0.0, a + b)


def rel_entropy_ext(p: float, q: float) -> float:
    """D(p||q) extended to the closed square where the limit is finite."""
    _check_prob("p", p)
    _check_prob("q", q)
    if p == q:
        return 0.0
    if q == 0.0 or q == 1.0:
        return math.inf
    if p == 0.0:
        return -math.log1p(-q)
    if p == 1.0:
        return -math.log(q)
    return rel_entropy(p, q)


def chernoff_upper(z: int, k: int, p: float) -> float:
    """exp(-z D(k/z || p)), an upper bound on B(z, k, p) when k <= p z."""
    if not 0.0 < p < 1.0:
        raise DomainError("chernoff_upper requires 0 < p < 1")
    if z <= 0 or k < 0 or k > p * z:
        raise DomainError(f"chernoff_upper requires 0 <= k <= p z, got k={k}, z={z}, p={p}")
    return math.exp(-z * rel_entropy_ext(k / z, p))


def chernoff_lower(z: int, k: int, p: float) -> float:
    """(e sqrt(k))^-1 exp(-z D(k/z || p)), a lower bound on B(z, k, p)."""
    if not 0.0 < p < 1.0:
        raise DomainError("chernoff_lower requires 0 < p < 1")
    if k < 1 or k >= z:
        raise DomainError(f"chernoff_lower requires 1 <= k <= z - 1, got k={k}, z={z}")
    return math.exp(-z * rel_entropy(k / z, p) - 1.0 - 0.5 * math.log(k))


# ---------------------------------------------------------------------------
# monotone searches

def first_true(pred: Callable[[int], bool], lo: int, hi: Optional[int] = None,
               max_doublings: int = 80) -> int:
    """Smallest n >= lo with pred(n) true, for a predicate monotone in n.

    Exponential bracketing from ``max(lo, 1)`` then bisection.  If ``hi`` is
    given and pred(hi) is false, raises ValueError.
    """
    if pred(lo):
        return lo
    if hi is None:
        step = max(lo, 1)
        prev = lo
        cand = lo + step
        for _ in range(max_doublings):
            if pred(cand):
                hi = cand
                break
            prev = cand
            step *= 2
            cand = lo + step
        else:
            raise ResourceError("search did not terminate; predicate never became true")
        lo = prev
    else:
        if not pred(hi):
            raise DomainError("predicate false at upper end of search range")
    # invariant: pred(lo) false, pred(hi) true
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def z_star(k: int, delta: float, lam: float) -> int:
    """Smallest z >= k with B(z, k, 1 - lam) <= delta."""
    if not 0.0 < delta <= 1.0:
        raise DomainError("delta must lie in (0, 1]")
    if not 0.0 <= lam < 1.0:
        if lam == 1.0 and delta < 1.0:
            raise DomainError("no solution: spectral gap is zero")
        raise DomainError("lambda must lie in [0, 1)")
    nu = 1.0 - lam
    return first_true(lambda z: binom_tail(z, k, nu) <= delta, k)


def largest_accepting_M(k: int, p: float, delta: float, lo_hint: int = 0):
    """Largest M >= k with B(M, k, p) >= 1 - delta.

    Returns ``INFINITE`` when p = 0 and None when even M = k fails (which can
    not happen since B(k, k, p) = 1, but is kept for completeness).  The
    comparison is made on the upper tail, 1 - B <= delta, so tiny delta is
    resolved accurately.  ``lo_hint`` is a value known not to fail (for
    example the answer for a smaller k) and only speeds up the search.
    """
    _check_prob("p", p)
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if p == 0.0:
        return INFINITE

    def fails(m: int) -> bool:
        return binom_sf(m, k, p) > delta

    if fails(k):
        return None
    start = max(k, lo_hint)
    if start > k and fails(start):
        start = k
    return first_true(fails, start) - 1
