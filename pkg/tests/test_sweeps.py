import math

import pytest

from qsverify import adversarial as adv
from qsverify import iid
from qsverify import sweeps as sw
from qsverify.errors import DomainError, ResourceError


def test_parse_grid_forms():
    assert sw.parse_grid("1,2,5") == [1.0, 2.0, 5.0]
    assert sw.parse_grid("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert sw.parse_grid("1e-3:1e-1:3:log") == pytest.approx([1e-3, 1e-2, 1e-1], rel=1e-12)
    assert sw.parse_grid("10:20:3", integer=True) == [10, 15, 20]


@pytest.mark.parametrize("text", ["", "a,b", "1:2", "1:2:0", "1:2:3:lin", "0:1:3:log"])
def test_parse_grid_rejects(text):
    with pytest.raises(DomainError):
        sw.parse_grid(text)


def test_grid_cap():
    with pytest.raises(ResourceError):
        sw.parse_grid("0:1:2000000")
    grids = {"k": list(range(100)), "N": list(range(200, 300)), "delta": [0.1] * 101, "lambda": [0.5]}
    with pytest.raises(ResourceError):
        sw.custom_sweep("eps_bar", grids)


def test_custom_sweep_values():
    t = sw.custom_sweep("eps_bar", {"k": [0, 2], "N": [50], "delta": [0.05], "lambda": [0.5]})
    assert t.columns == ["k", "N", "delta", "lambda", "eps_bar"]
    assert t.column("eps_bar") == [adv.eps_bar(0, 50, 0.05, 0.5), adv.eps_bar(2, 50, 0.05, 0.5)]
    t = sw.custom_sweep("ratio", {"epsilon": [0.1], "delta": [0.1], "lambda": [0.5], "r": [0.5]},
                        threads=2)
    a = adv.plan_min_tests(0.1, 0.1, 0.5, 0.5).N_min
    b = iid.plan_min_tests_iid(0.1, 0.1, 0.5, 0.5).N_min
    assert t.rows[0][-1] == a / b


def test_custom_sweep_errors():
    with pytest.raises(DomainError):
        sw.custom_sweep("fidelity", {})
    with pytest.raises(DomainError):
        sw.custom_sweep("eps_bar", {"k": [1], "N": [5]})


def test_threads_do_not_change_results():
    grids = {"k": [0, 1, 3], "N": [20, 40], "delta": [0.05, 0.3], "lambda": [0.5]}
    assert sw.custom_sweep("eps_bar", grids, 1).rows == sw.custom_sweep("eps_bar", grids, 3).rows


@pytest.mark.parametrize("name", ["fig3", "fig4", "fig6", "figS1", "figS2"])
def test_fast_presets_hold_their_orderings(name):
    t = sw.PRESETS[name]()
    assert t.rows and len(t.units) == len(t.columns)
    assert all(len(r) == len(t.columns) for r in t.rows)
    assert sw.check_table(t) == []


def test_fig4_curves_are_tails():
    t = sw.fig4()
    for rec in t.records():
        assert 0.0 <= rec["accept"] <= 1.0
        assert rec["l"] == math.floor(rec["l"])


def test_fig5_planned_counts_are_consistent():
    t = sw.fig5()
    assert sw.check_table(t) == []
    for rec in t.records()[::15]:
        assert rec["k_min"] < rec["N_min"]
        assert adv.verify_plan(rec["k_min"], rec["N_min"], rec["epsilon"], rec["delta"],
                               rec["lambda"], rec["r"])


def test_check_table_flags_violations():
    t = sw.Table("fig7", ["epsilon", "lambda", "N_min", "N_min_iid", "ratio"], [""] * 5,
                 [[0.1, 0.5, 30, 10, 3.0]])
    assert len(sw.check_table(t)) == 1
