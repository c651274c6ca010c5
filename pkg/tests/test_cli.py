import json
import subprocess
import sys

import pytest

from qsverify import adversarial as adv
from qsverify import iid
from qsverify.cli import main
from qsverify.stats_core import binom_tail

import oracles


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0, err
    return json.loads(out)


# ---------------------------------------------------------------------------
# planning and single values

def test_plan_example(capsys):
    r = run_json(["plan", "--epsilon", "0.01", "--delta", "0.01", "--lambda", "0.5", "--r", "0.5"],
                 capsys)
    assert (r["k_min"], r["N_min"]) == (65, 19373)
    assert r["N_min_times_eps_over_ln_inv_delta"] <= 67
    assert r["certificates"]["sound"] and r["certificates"]["robust"]
    assert r["certificates"]["minimal_N_at_k_min"]
    assert r["certificates"]["closed_form_N"] >= r["N_min"]
    assert r["eps_bar_at_plan"] <= 0.01


def test_plan_without_robustness(capsys):
    r = run_json(["plan", "--epsilon", "0.01", "--delta", "0.01", "--lambda", "0.5", "--r", "0"],
                 capsys)
    assert (r["k_min"], r["N_min"]) == (0, 1307)


def test_plan_iid_matches_exhaustive_scan(capsys):
    r = run_json(["plan-iid", "--epsilon", "0.2", "--delta", "0.1", "--lambda", "0.5", "--r", "0.5"],
                 capsys)
    ref = oracles.exhaustive_plan(
        2000, lambda k, n: iid.tail_sound(k, n, 0.2, 0.1, 0.5),
        lambda k, n: iid.tail_robust(k, n, 0.2, 0.1, 0.5, 0.5))
    assert (r["k_min"], r["N_min"]) == ref == (13, 187)
    assert r["certificates"] == {"sound": True, "robust": True}


def test_epsbar(capsys):
    r = run_json(["epsbar", "--k", "3", "--N", "100", "--delta", "0.05", "--lambda", "0.5"], capsys)
    assert r["eps_bar"] == pytest.approx(adv.eps_bar(3, 100, 0.05, 0.5), rel=1e-11)
    r = run_json(["epsbar", "--k", "5", "--N", "10", "--delta", repr(binom_tail(10, 5, 0.5)),
                  "--lambda", "0.5"], capsys)
    assert r["eps_bar"] == 1.0
    r = run_json(["epsbar", "--k", "3", "--N", "100", "--delta", "0.05", "--lambda", "0.5",
                  "--scenario", "iid"], capsys)
    assert r["eps_bar"] == pytest.approx(iid.eps_bar_iid(3, 100, 0.05, 0.5), rel=1e-11)


# ---------------------------------------------------------------------------
# exit codes

@pytest.mark.parametrize("argv", [
    ["plan", "--epsilon", "0.01", "--delta", "0.01", "--lambda", "0.5"],
    ["plan", "--epsilon", "x", "--delta", "0.01", "--lambda", "0.5", "--r", "0.5"],
    ["epsbar", "--k", "-1", "--N", "5", "--delta", "0.1", "--lambda", "0.5"],
    ["frobnicate"],
    [],
    ["sweep", "--preset", "fig2", "--k", "1,2"],
    ["simulate", "/nonexistent/graph.txt", "--lambda", "0.5", "--N", "10", "--k", "1"],
])
def test_usage_errors_exit_1(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1 and out == "" and err


@pytest.mark.parametrize("argv", [
    ["plan", "--epsilon", "1.5", "--delta", "0.01", "--lambda", "0.5", "--r", "0.5"],
    ["plan", "--epsilon", "0.01", "--delta", "0.01", "--lambda", "1.0", "--r", "0.5"],
    ["epsbar", "--k", "5", "--N", "5", "--delta", "0.1", "--lambda", "0.5"],
    ["sweep", "--quantity", "eps_bar", "--k", "0:5:1001", "--N", "100:200:1001",
     "--delta", "0.1", "--lambda", "0.5"],
])
def test_infeasible_inputs_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2 and out == "" and err.startswith("qsverify:")


def test_bad_graph_file_exit_1(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("2 2\n0 0\n")
    code, _, _ = run(["simulate", str(g), "--lambda", "0.5", "--N", "10", "--k", "1"], capsys)
    assert code == 1


def test_oversized_graph_exit_2(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("2 20\n")
    code, _, _ = run(["simulate", str(g), "--lambda", "0.5", "--N", "10", "--k", "1"], capsys)
    assert code == 2


def test_invalid_thread_env(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("QSVERIFY_THREADS", "zero")
    code, _, err = run(["sweep", "--quantity", "eps_bar", "--k", "1", "--N", "10",
                        "--delta", "0.1", "--lambda", "0.5"], capsys)
    assert code == 1 and "QSVERIFY_THREADS" in err


# ---------------------------------------------------------------------------
# sweeps and tables

SWEEP = ["sweep", "--quantity", "eps_bar", "--k", "0,2", "--N", "20:40:3", "--delta", "0.05",
         "--lambda", "0.5", "--format", "csv"]


def test_sweep_csv_layout(capsys):
    code, out, _ = run(SWEEP, capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# command: qsverify sweep --quantity eps_bar")
    assert lines[1].startswith("# units: ")
    assert lines[2] == "k,N,delta,lambda,eps_bar"
    assert len(lines) == 3 + 6
    k, N, delta, lam, value = lines[3].split(",")
    assert float(value) == pytest.approx(adv.eps_bar(int(k), int(N), float(delta), float(lam)),
                                         rel=1e-11)


def test_repeated_runs_are_byte_identical(tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(SWEEP + ["-o", str(a)], capsys)[0] == 0
    monkeypatch.setenv("QSVERIFY_THREADS", "3")
    assert run(SWEEP + ["-o", str(b)], capsys)[0] == 0
    assert a.read_bytes().split(b"\n")[1:] == b.read_bytes().split(b"\n")[1:]
    assert run(SWEEP + ["-o", str(b)], capsys)[0] == 0
    assert a.read_bytes().replace(str(a).encode(), b"") == b.read_bytes().replace(str(b).encode(), b"")


def test_sweep_preset_json(capsys):
    r = run_json(["sweep", "--preset", "fig3"], capsys)
    assert r["table"] == "fig3" and r["check_violations"] == []
    assert r["columns"][:3] == ["s", "N", "k"] and len(r["units"]) == len(r["columns"])


# ---------------------------------------------------------------------------
# comparison and simulation

def test_compare(capsys):
    base = ["compare", "--epsilon", "0.01", "--delta", "0.01", "--lambda", "0.5", "--r", "0.5"]
    r = run_json(base, capsys)
    rows = {row["protocol"]: row for row in r["rows"]}
    assert rows["HM"]["tests"] == 9999
    assert rows["ZH"]["tests"] == 1307 and rows["ZH"]["total"] == 156840
    assert rows["THIS"]["tests"] == 19373
    code, out, _ = run(base + ["--format", "csv"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[2] == "protocol,tests,log10_accept,repetitions,total,note"
    assert lines[3].startswith("HM,9999,")


def _graph(tmp_path):
    g = tmp_path / "c4.txt"
    g.write_text("# four-qubit chain\n2 4\n0 1\n1 2\n2 3\n")
    return str(g)


def test_simulate_ideal(tmp_path, capsys):
    r = run_json(["simulate", _graph(tmp_path), "--lambda", "0.5", "--N", "50", "--k", "0",
                  "--trials", "500"], capsys)
    assert r["empirical_acceptance"] == 1.0 and r["analytic_acceptance"] == 1.0
    assert r["max_failures"] == 0 and r["accepted"] == 500


def test_simulate_noisy_within_four_sigma(tmp_path, capsys):
    r = run_json(["simulate", _graph(tmp_path), "--lambda", "0.5", "--eps-tau", "0.05",
                  "--N", "100", "--k", "5", "--trials", "4000", "--seed", "7"], capsys)
    assert r["eps_tau_realized"] == pytest.approx(0.05, abs=1e-12)
    assert r["analytic_acceptance"] == pytest.approx(binom_tail(100, 5, 0.025), rel=1e-12)
    assert abs(r["deviation_in_sigma"]) <= 4


def test_simulate_is_reproducible(tmp_path, capsys):
    argv = ["simulate", _graph(tmp_path), "--lambda", "0.5", "--eps-tau", "0.1", "--noise",
            "dephasing", "--N", "30", "--k", "2", "--trials", "300", "--seed", "3"]
    first = run(argv, capsys)[1]
    assert run(argv + ["--threads", "2"], capsys)[1] == first


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qsverify", "epsbar", "--k", "0", "--N", "10",
                           "--delta", "0.5", "--lambda", "0.5"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["eps_bar"] == pytest.approx(adv.eps_bar(0, 10, 0.5, 0.5), rel=1e-11)
