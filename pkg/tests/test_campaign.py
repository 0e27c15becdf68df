import math

import pytest

from fdmimo.config import load_config
from fdmimo.sim.campaign import AGG_FIELDS, RESULT_HEADER, aggregate, run_campaign, ue_rows

TINY = load_config({"sim": {"n_sites": 7, "wraparound": False, "ues_per_cell": 1, "n_subframes": 12}})
TINY_B = load_config({"sim": {"n_sites": 7, "wraparound": False, "ues_per_cell": 1, "n_subframes": 12},
                      "feedback": {"feedback_class": "B", "N_B": 4}})


def test_rows_per_seed_plus_aggregate():
    res = run_campaign([TINY], [1, 2, 3])
    rows = res.rows()
    assert [r["kind"] for r in rows] == ["drop"] * 3 + ["aggregate"]
    agg = rows[-1]
    assert agg["status"] == "3/3 ok"
    drops = [res.metrics[(0, s)] for s in (1, 2, 3)]
    assert agg["cell_avg_se"] == pytest.approx(sum(m.cell_avg_se for m in drops) / 3)
    assert agg["cell_avg_se_ci95"] > 0
    assert set(agg) <= set(RESULT_HEADER)


def test_parallel_identical():
    a = run_campaign([TINY, TINY_B], [4, 5], parallelism=1)
    b = run_campaign([TINY, TINY_B], [4, 5], parallelism=8)
    assert a.rows() == b.rows()
    assert list(ue_rows(a)) == list(ue_rows(b))


def test_failure_is_per_cell():
    res = run_campaign([TINY], [1, -1])
    rows = res.rows()
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("error: ValueError")
    assert rows[2]["status"] == "1/2 ok"
    assert math.isnan(rows[2]["cell_avg_se_ci95"])


def test_aggregate_empty():
    agg = aggregate([])
    assert all(math.isnan(agg["mean"][f]) for f in AGG_FIELDS)


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_campaign([], [1])
    with pytest.raises(ValueError):
        run_campaign([TINY], [1], parallelism=0)
