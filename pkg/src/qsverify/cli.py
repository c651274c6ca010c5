"""Command-line front end: planning, sweeps, simulation and protocol comparison.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible input or
resource limit.  JSON is the default output; sweeps also emit CSV.  Reals
are printed with 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import shlex
import sys
from typing import List, Optional, Sequence

from . import adversarial as adv
from . import baselines as bl
from . import iid
from . import qudit_sim as qs
from . import sweeps
from .errors import DomainError, ResourceError
from .stats_core import binom_tail

SIG_DIGITS = 12
THREADS_ENV = "QSVERIFY_THREADS"

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or unreadable input files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# formatting

def fmt_real(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def _plain(obj):
    """Round reals to 12 significant digits and convert to JSON-ready values."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, bl.BigCount):
        return _plain(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(fmt_real(obj))
        return fmt_real(obj)
    return str(obj)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, bl.BigCount):
        return str(v.exact) if v.exact is not None else "10^" + fmt_real(v.log10)
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return fmt_real(v)
    return str(v)


def render_json(payload) -> str:
    return json.dumps(_plain(payload), indent=2) + "\n"


def render_csv(command: str, columns: Sequence[str], units: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# command: {command}\n")
    buf.write("# units: " + ",".join(units) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _table_json(command: str, t: sweeps.Table, violations: List[str]) -> dict:
    return {"command": command, "table": t.name, "columns": t.columns, "units": t.units,
            "rows": t.rows, "check_violations": violations}


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# commands

def cmd_plan(a) -> dict:
    st = adv.Strategy(a.lam)
    p = adv.plan_min_tests(a.epsilon, a.delta, st, a.r)
    L = math.log(1.0 / a.delta)
    cert = {
        "sound": adv.is_sound(p.k_min, p.N_min, a.epsilon, a.delta, st),
        "robust": adv.is_robust(p.k_min, p.N_min, a.epsilon, a.delta, st, a.r),
        "minimal_N_at_k_min": p.N_min == p.k_min + 1
        or not adv.is_sound(p.k_min, p.N_min - 1, a.epsilon, a.delta, st),
    }
    if a.delta <= 0.5:
        cert["closed_form_N"] = adv.closed_form_N(a.epsilon, a.delta, st, a.r)
    return {"scenario": "adversarial",
            "inputs": {"epsilon": a.epsilon, "delta": a.delta, "lambda": a.lam, "r": a.r},
            "k_min": p.k_min, "N_min": p.N_min,
            "eps_bar_at_plan": p.eps_bar_at_plan, "accept_prob_at_r_eps": p.accept_prob_at_r,
            "N_min_times_eps_over_ln_inv_delta": p.N_min * a.epsilon / L,
            "certificates": cert}


def cmd_plan_iid(a) -> dict:
    st = adv.Strategy(a.lam)
    p = iid.plan_min_tests_iid(a.epsilon, a.delta, st, a.r)
    L = math.log(1.0 / a.delta)
    cert = {
        "sound": iid.tail_sound(p.k_min, p.N_min, a.epsilon, a.delta, st),
        "robust": iid.tail_robust(p.k_min, p.N_min, a.epsilon, a.delta, st, a.r),
    }
    return {"scenario": "iid",
            "inputs": {"epsilon": a.epsilon, "delta": a.delta, "lambda": a.lam, "r": a.r},
            "k_min": p.k_min, "N_min": p.N_min,
            "tail_at_eps": p.tail_at_eps, "tail_at_r_eps": p.tail_at_r_eps,
            "N_min_times_eps_over_ln_inv_delta": p.N_min * a.epsilon / L,
            "certificates": cert}


def cmd_epsbar(a) -> dict:
    if a.scenario == "adversarial":
        value = adv.eps_bar(a.k, a.N, a.delta, adv.Strategy(a.lam))
    else:
        value = iid.eps_bar_iid(a.k, a.N, a.delta, adv.Strategy(a.lam))
    return {"scenario": a.scenario,
            "inputs": {"k": a.k, "N": a.N, "delta": a.delta, "lambda": a.lam},
            "eps_bar": value}


_SWEEP_AXES = (("k", True), ("N", True), ("epsilon", False), ("delta", False),
               ("lambda", False), ("r", False))


def cmd_sweep(a, command: str) -> str:
    threads = a.threads or default_threads()
    if a.preset:
        t = sweeps.PRESETS[a.preset](threads=threads)
        violations = sweeps.check_table(t)
    else:
        grids = {}
        for name, integer in _SWEEP_AXES:
            text = getattr(a, "axis_" + name)
            if text is not None:
                grids[name] = sweeps.parse_grid(text, integer=integer)
        t = sweeps.custom_sweep(a.quantity, grids, threads=threads)
        violations = []
    if a.format == "csv":
        return render_csv(command, t.columns, t.units, t.rows)
    return render_json(_table_json(command, t, violations))


def cmd_simulate(a) -> dict:
    try:
        spec = qs.GraphSpec.load(a.graph)
    except OSError as exc:
        raise UsageError(f"cannot read graph file: {exc}")
    except DomainError as exc:
        raise UsageError(str(exc))
    st = adv.Strategy(a.lam)
    tau = qs.calibrate_noise(spec, a.eps_tau, model=a.noise)
    eps_actual = qs.infidelity(tau, spec)
    threads = a.threads or default_threads()
    run = qs.run_protocol_iid(spec, st, tau, a.N, a.k, a.trials, seed=a.seed, threads=threads)
    analytic = binom_tail(a.N, a.k, st.nu * eps_actual)
    se = run.std_error
    sigma = math.sqrt(analytic * (1.0 - analytic) / a.trials)
    failures = [r.failures for r in run.records]
    return {"graph": {"d": spec.d, "n": spec.n, "edges": [list(e) for e in spec.edges]},
            "inputs": {"lambda": a.lam, "eps_tau": a.eps_tau, "noise": a.noise,
                       "N": a.N, "k": a.k, "trials": a.trials, "seed": a.seed},
            "eps_tau_realized": eps_actual,
            "accepted": run.accepted,
            "empirical_acceptance": run.frequency,
            "std_error": se,
            "analytic_acceptance": analytic,
            "deviation_in_sigma": 0.0 if sigma == 0.0 else (run.frequency - analytic) / sigma,
            "mean_failures": sum(failures) / len(failures),
            "max_failures": max(failures)}


_COMPARE_COLUMNS = ["protocol", "tests", "log10_accept", "repetitions", "total", "note"]
_COMPARE_UNITS = ["name", "tests", "log10 probability", "runs", "tests", "text"]


def cmd_compare(a, command: str) -> str:
    rows = bl.compare_protocols(a.epsilon, a.delta, adv.Strategy(a.lam), a.r,
                                eps_tau=a.eps_tau, qudits=a.qudits)
    table = [[c.name, c.tests, c.accept_log10, c.repetitions, c.total, c.note] for c in rows]
    if a.format == "csv":
        return render_csv(command, _COMPARE_COLUMNS, _COMPARE_UNITS, table)
    return render_json({
        "command": command,
        "inputs": {"epsilon": a.epsilon, "delta": a.delta, "lambda": a.lam, "r": a.r,
                   "eps_tau": a.epsilon / 2 if a.eps_tau is None else a.eps_tau,
                   "qudits": a.qudits},
        "rows": [dict(zip(_COMPARE_COLUMNS, r)) for r in table]})


# ---------------------------------------------------------------------------
# parser

def _prob(name):
    def conv(text):
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a real number, got {text!r}")
    return conv


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def _pos_int(text):
    v = _nonneg_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _target_flags(p, need_r=True):
    p.add_argument("--epsilon", type=_prob("epsilon"), required=True, help="target infidelity")
    p.add_argument("--delta", type=_prob("delta"), required=True, help="significance level")
    p.add_argument("--lambda", dest="lam", type=_prob("lambda"), required=True,
                   help="second eigenvalue of the strategy")
    if need_r:
        p.add_argument("--r", type=_prob("r"), required=True, help="robustness ratio")


def _output_flags(p, formats=("json",)):
    p.add_argument("--output", "-o", help="write to this path instead of stdout")
    p.add_argument("--format", choices=formats, default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qsverify",
                     description="Test-count planning and simulation for stabilizer-state verification.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="minimum tests in the adversarial scenario")
    _target_flags(p)
    _output_flags(p)

    p = sub.add_parser("plan-iid", help="minimum tests for i.i.d. preparations")
    _target_flags(p)
    _output_flags(p)

    p = sub.add_parser("epsbar", help="guaranteed infidelity at a single point")
    p.add_argument("--k", type=_nonneg_int, required=True, help="allowed failures")
    p.add_argument("--N", type=_pos_int, required=True, help="number of tests")
    p.add_argument("--delta", type=_prob("delta"), required=True)
    p.add_argument("--lambda", dest="lam", type=_prob("lambda"), required=True)
    p.add_argument("--scenario", choices=("adversarial", "iid"), default="adversarial")
    _output_flags(p)

    p = sub.add_parser("sweep", help="figure presets or custom grids")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=sorted(sweeps.PRESETS))
    g.add_argument("--quantity", choices=sweeps.QUANTITIES)
    for name, _ in _SWEEP_AXES:
        p.add_argument(f"--{name}", dest="axis_" + name, metavar="GRID",
                       help="comma list or start:stop:count[:log]")
    p.add_argument("--threads", type=_pos_int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    _output_flags(p, formats=("csv", "json"))

    p = sub.add_parser("simulate", help="Monte Carlo run of the protocol on a graph state")
    p.add_argument("graph", help="graph file: 'd n' header then 'i j m' edge lines, or JSON")
    p.add_argument("--lambda", dest="lam", type=_prob("lambda"), required=True)
    p.add_argument("--eps-tau", type=_prob("eps-tau"), default=0.0,
                   help="infidelity of each prepared copy")
    p.add_argument("--noise", choices=("depolarizing", "dephasing", "rotation"),
                   default="depolarizing")
    p.add_argument("--N", type=_pos_int, required=True)
    p.add_argument("--k", type=_nonneg_int, required=True)
    p.add_argument("--trials", type=_pos_int, default=10000)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--threads", type=_pos_int, default=None)
    _output_flags(p)

    p = sub.add_parser("compare", help="cost of each protocol at a common target")
    _target_flags(p)
    p.add_argument("--eps-tau", type=_prob("eps-tau"), default=None,
                   help="preparation infidelity for acceptance (default epsilon/2)")
    p.add_argument("--qudits", type=_pos_int, default=1,
                   help="system size used by the qubit-count-dependent protocol")
    _output_flags(p, formats=("json", "csv"))
    return parser


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    a = parser.parse_args(argv)
    command = "qsverify " + shlex.join(argv)
    try:
        if a.command == "plan":
            text = render_json(cmd_plan(a))
        elif a.command == "plan-iid":
            text = render_json(cmd_plan_iid(a))
        elif a.command == "epsbar":
            text = render_json(cmd_epsbar(a))
        elif a.command == "sweep":
            if a.quantity is None and any(getattr(a, "axis_" + n) for n, _ in _SWEEP_AXES):
                parser.error("axis grids apply only with --quantity")
            text = cmd_sweep(a, command)
        elif a.command == "simulate":
            text = render_json(cmd_simulate(a))
        else:
            text = cmd_compare(a, command)
        _emit(text, a.output)
    except UsageError as exc:
        print(f"qsverify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ResourceError) as exc:
        print(f"qsverify: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
