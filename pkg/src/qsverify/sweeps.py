"""Parameter sweeps that regenerate the data behind the published figures.

A sweep yields a :class:`Table`: named columns, units, and rows of numbers.
Each preset also knows which qualitative ordering its curves should obey;
``check_table`` reports the rows where it does not.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import adversarial as adv
from . import baselines as bl
from . import iid
from .errors import DomainError, ResourceError
from .stats_core import binom_tail, floor_guard

GRID_CAP = 10 ** 6


@dataclass
class Table:
    name: str
    columns: List[str]
    units: List[str]
    rows: List[list] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> List[Dict[str, object]]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _log_grid(lo_exp: float, hi_exp: float, per_decade: int) -> List[float]:
    n = int(round((hi_exp - lo_exp) * per_decade)) + 1
    return [10.0 ** e for e in np.linspace(lo_exp, hi_exp, n)]


# ---------------------------------------------------------------------------
# presets

def fig2(threads: int = 1) -> Table:
    """Total tests versus delta at eps = 0.01, r = 1/2, lambda = 1/2."""
    eps, lam, r = 0.01, 0.5, 0.5
    deltas = [10.0 ** -x for x in np.arange(1.0, 6.01, 0.5)]

    def row(delta):
        plan = adv.plan_min_tests(eps, delta, lam, r)
        costs = {c.name: c for c in bl.compare_protocols(eps, delta, lam, r)}
        return [delta, plan.k_min, plan.N_min, adv.closed_form_N(eps, delta, lam, r),
                costs["HM"].total.log10, costs["ZH"].total.log10, math.log10(plan.N_min)]

    t = Table("fig2", ["delta", "k_min", "N_min", "N_bound", "log10_total_HM",
                       "log10_total_ZH", "log10_N_min"],
              ["probability", "tests", "tests", "tests", "log10 tests", "log10 tests", "log10 tests"])
    t.rows = _pmap(row, deltas, threads)
    return t


def fig3(threads: int = 1) -> Table:
    """Guaranteed infidelity at a fixed error rate s versus N (lambda = 1/2, delta = 0.05)."""
    lam, delta = 0.5, 0.05
    rates = [0.01, 0.02, 0.05, 0.1]
    Ns = [int(round(x)) for x in _log_grid(2, 5, 4)]
    nu = 1 - lam

    def row(item):
        s, N = item
        k = floor_guard(nu * s * N)
        lo, hi = adv.fixed_rate_bounds(s, N, delta, lam)
        return [s, N, k, adv.eps_bar(k, N, delta, lam), lo, hi]

    t = Table("fig3", ["s", "N", "k", "eps_bar", "lower", "upper"],
              ["rate", "tests", "failures", "infidelity", "infidelity", "infidelity"])
    t.rows = _pmap(row, list(product(rates, Ns)), threads)
    return t


def fig4(threads: int = 1) -> Table:
    """i.i.d. acceptance with the closed-form failure budget (lambda = 1/2, eps = 0.1, delta = 0.01)."""
    lam, eps, delta = 0.5, 0.1, 0.01
    nu = 1 - lam
    Ns = [int(round(x)) for x in _log_grid(2, 5, 4)]
    taus = [0.01, 0.02, 0.03, 0.05, 0.07]

    def row(item):
        N, et = item
        l = adv.allowed_failures(N, eps, delta, lam)
        acc = binom_tail(N, l, nu * et) if l >= 0 else 0.0
        return [N, et, l, acc]

    t = Table("fig4", ["N", "eps_tau", "l", "accept"],
              ["tests", "infidelity", "failures", "probability"])
    t.rows = _pmap(row, list(product(Ns, taus)), threads)
    return t


def fig5(threads: int = 1) -> Table:
    """Minimum test number across four parameter panels."""
    inv_eps = [10, 20, 50, 100, 200, 500, 1000]
    points = []
    for lam in (0.3, 0.5, 0.7, 0.9):
        points += [("a", 1 / x, 0.01, lam, 0.5) for x in inv_eps]
    for r in (0.0, 0.25, 0.5, 0.75):
        points += [("b", 1 / x, 0.01, 0.5, r) for x in inv_eps]
    for r in (0.0, 0.25, 0.5, 0.75):
        points += [("c", 0.01, 10.0 ** -x, 0.5, r) for x in range(1, 11)]
    for delta in (1e-2, 1e-4, 1e-6):
        points += [("d", 0.01, delta, lam, 0.5) for lam in np.round(np.arange(0.1, 0.951, 0.05), 2)]

    def row(p):
        panel, e, d, lam, r = p
        plan = adv.plan_min_tests(e, d, float(lam), r)
        return [panel, e, d, float(lam), r, plan.k_min, plan.N_min]

    t = Table("fig5", ["panel", "epsilon", "delta", "lambda", "r", "k_min", "N_min"],
              ["label", "infidelity", "probability", "eigenvalue", "ratio", "failures", "tests"])
    t.rows = _pmap(row, points, threads)
    return t


def fig6(threads: int = 1) -> Table:
    """Fixed-rate guaranteed infidelity: i.i.d. against adversarial (lambda = 1/2, delta = 0.05)."""
    lam, delta = 0.5, 0.05
    nu = 1 - lam
    rates = [0.01, 0.05, 0.1]
    Ns = [int(round(x)) for x in _log_grid(2, 5, 4)]

    def row(item):
        s, N = item
        k = floor_guard(nu * s * N)
        return [s, N, k, iid.eps_bar_iid(k, N, delta, lam), adv.eps_bar(k, N, delta, lam)]

    t = Table("fig6", ["s", "N", "k", "eps_bar_iid", "eps_bar_adv"],
              ["rate", "tests", "failures", "infidelity", "infidelity"])
    t.rows = _pmap(row, list(product(rates, Ns)), threads)
    return t


def fig7(threads: int = 1) -> Table:
    """Adversarial over i.i.d. minimum test number with eps = delta, r = 1/2."""
    lams = [float(x) for x in np.round(np.arange(0.5, 0.951, 0.05), 2)]
    points = list(product([1e-2, 1e-3, 1e-4], lams))

    def row(item):
        e, lam = item
        a = adv.plan_min_tests(e, e, lam, 0.5).N_min
        b = iid.plan_min_tests_iid(e, e, lam, 0.5).N_min
        return [e, lam, a, b, a / b]

    t = Table("fig7", ["epsilon", "lambda", "N_min", "N_min_iid", "ratio"],
              ["infidelity (= delta)", "eigenvalue", "tests", "tests", "ratio"])
    t.rows = _pmap(row, points, threads)
    return t


def figS1(threads: int = 1) -> Table:
    """Acceptance of earlier protocols at eps_tau = eps/2, eps = 0.01, versus delta."""
    eps = 0.01
    deltas = _log_grid(-6, -1, 4)

    def row(delta):
        out = [delta, bl.hm_log10_accept_bound(eps / 2, bl.hm_tests(eps, delta))]
        for lam in (0.2, 0.4, 0.6, 0.8):
            out.append(bl.zh_log10_accept(eps / 2, bl.zh_tests(eps, delta, lam), lam))
        return out

    t = Table("figS1", ["delta", "log10_accept_HM", "log10_accept_ZH_0.2", "log10_accept_ZH_0.4",
                        "log10_accept_ZH_0.6", "log10_accept_ZH_0.8"],
              ["probability"] + ["log10 probability"] * 5)
    t.rows = _pmap(row, deltas, threads)
    return t


def figS2(threads: int = 1) -> Table:
    """Closed-form bound over the exact minimum (lambda = 1/2, delta = eps)."""
    points = list(product([1e-1, 1e-2, 1e-3, 1e-4], [0.0, 0.25, 0.5, 0.75]))

    def row(item):
        e, r = item
        b = adv.closed_form_N(e, e, 0.5, r)
        n = adv.plan_min_tests(e, e, 0.5, r).N_min
        return [e, r, b, n, b / n]

    t = Table("figS2", ["epsilon", "r", "N_bound", "N_min", "ratio"],
              ["infidelity (= delta)", "ratio", "tests", "tests", "ratio"])
    t.rows = _pmap(row, points, threads)
    return t


PRESETS: Dict[str, Callable[..., Table]] = {
    "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6,
    "fig7": fig7, "figS1": figS1, "figS2": figS2,
}


def check_table(t: Table) -> List[str]:
    """Rows violating the preset's expected ordering (empty list when all hold)."""
    bad = []
    for rec in t.records():
        if t.name == "fig2":
            ok = (rec["log10_total_HM"] > rec["log10_total_ZH"] > rec["log10_N_min"]
                  and rec["N_min"] <= rec["N_bound"])
        elif t.name == "fig3":
            ok = rec["lower"] < rec["eps_bar"] <= rec["upper"]
        elif t.name == "fig6":
            ok = rec["eps_bar_iid"] <= rec["eps_bar_adv"]
        elif t.name == "fig7":
            ok = rec["ratio"] < 2.0
        elif t.name == "figS2":
            ok = rec["ratio"] >= 1.0
        else:
            ok = True
        if not ok:
            bad.append(f"{t.name}: {rec}")
    if t.name == "fig3":
        # distance to s shrinks as N grows, and at the largest N it is inside the bound slack
        for s in sorted(set(t.column("s"))):
            rows = sorted((r for r in t.records() if r["s"] == s), key=lambda r: r["N"])
            gaps = [abs(r["eps_bar"] - s) for r in rows]
            last = rows[-1]
            if not gaps[-1] < gaps[0] or not gaps[-1] <= last["upper"] - s:
                bad.append(f"fig3: no convergence to s={s}")
    return bad


# ---------------------------------------------------------------------------
# custom grids

QUANTITIES = ("eps_bar", "eps_bar_iid", "N_min", "N_min_iid", "ratio")


def parse_grid(text: str, integer: bool = False) -> List[float]:
    """Comma list ``a,b,c`` or range ``start:stop:count`` (append ``:log`` for log spacing)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
                raise ValueError(text)
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError(text)
            if n > GRID_CAP:
                raise ResourceError(f"grid of {n} points exceeds the cap {GRID_CAP}")
            if len(parts) == 4:
                if a <= 0 or b <= 0:
                    raise ValueError("log grids need positive ends")
                vals = list(np.geomspace(a, b, n))
            else:
                vals = list(np.linspace(a, b, n))
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise DomainError(f"malformed grid {text!r}") from exc
    if not vals:
        raise DomainError("empty grid")
    if integer:
        return [int(round(v)) for v in vals]
    return [float(v) for v in vals]


def custom_sweep(quantity: str, grids: Dict[str, list], threads: int = 1) -> Table:
    """Evaluate one quantity over the Cartesian product of the given axes."""
    if quantity not in QUANTITIES:
        raise DomainError(f"unknown quantity {quantity!r}")
    needs = {"eps_bar": ("k", "N", "delta", "lambda"),
             "eps_bar_iid": ("k", "N", "delta", "lambda"),
             "N_min": ("epsilon", "delta", "lambda", "r"),
             "N_min_iid": ("epsilon", "delta", "lambda", "r"),
             "ratio": ("epsilon", "delta", "lambda", "r")}[quantity]
    missing = [a for a in needs if a not in grids]
    if missing:
        raise DomainError(f"missing axes for {quantity}: {', '.join(missing)}")
    size = 1
    for a in needs:
        size *= len(grids[a])
    if size > GRID_CAP:
        raise ResourceError(f"grid of {size} points exceeds the cap {GRID_CAP}")
    points = list(product(*(grids[a] for a in needs)))

    def value(p):
        kw = dict(zip(needs, p))
        if quantity == "eps_bar":
            return adv.eps_bar(int(kw["k"]), int(kw["N"]), kw["delta"], kw["lambda"])
        if quantity == "eps_bar_iid":
            return iid.eps_bar_iid(int(kw["k"]), int(kw["N"]), kw["delta"], kw["lambda"])
        a = b = None
        if quantity in ("N_min", "ratio"):
            a = adv.plan_min_tests(kw["epsilon"], kw["delta"], kw["lambda"], kw["r"]).N_min
        if quantity in ("N_min_iid", "ratio"):
            b = iid.plan_min_tests_iid(kw["epsilon"], kw["delta"], kw["lambda"], kw["r"]).N_min
        return {"N_min": a, "N_min_iid": b}.get(quantity, None) if quantity != "ratio" else a / b

    units = {"k": "failures", "N": "tests", "delta": "probability", "lambda": "eigenvalue",
             "epsilon": "infidelity", "r": "ratio"}
    qunit = {"eps_bar": "infidelity", "eps_bar_iid": "infidelity", "N_min": "tests",
             "N_min_iid": "tests", "ratio": "ratio"}[quantity]
    t = Table("custom", list(needs) + [quantity], [units[a] for a in needs] + [qunit])
    vals = _pmap(value, points, threads)
    t.rows = [list(p) + [v] for p, v in zip(points, vals)]
    return t
