import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlosloc.evaluate import (ErrorReport, aggregate, comparison_table, ecdf, ecdf_at, ecdf_points,
                              heading_error, percentile, position_error, stratify_los)


def test_position_error():
    assert position_error([1.0, 2.0], [1.0, 2.0]) == 0
    assert position_error([3.0, 4.0], [0.0, 0.0]) == 5
    assert aggregate([1.0, 2.0, 9.0])["median"] == 2


def test_heading_error_cases():
    assert heading_error([1.0, 0.0], [1.0, 0.0]) == (0.0, False)
    assert heading_error([-1.0, 0.0], [1.0, 0.0])[0] == pytest.approx(180.0)
    assert heading_error([1.0, 0.0], [0.0, 1.0])[0] == pytest.approx(90.0)
    assert heading_error([0.0, 0.0], [0.0, 1.0]) == (180.0, True)


def test_ecdf_cases():
    v, f = ecdf([1, 2, 3, 4])
    assert f[list(v).index(2)] == 0.5
    assert ecdf_at([5, 5, 5], 5) == 1.0 and ecdf_at([5, 5, 5], 4.999) == 0.0
    assert percentile(np.arange(1, 101), 95) == pytest.approx(95.05)
    with pytest.raises(ValueError):
        ecdf([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=200))
def test_ecdf_properties(vals):
    v, f = ecdf(vals)
    assert np.all(np.diff(v) >= 0) and np.all(np.diff(f) > 0) and f[-1] == 1.0
    a = aggregate(vals)
    qs = [a[f"p{q}"] for q in (5, 25, 50, 75, 80, 95)]
    assert all(x <= y + 1e-9 for x, y in zip(qs, qs[1:]))


def test_stratify():
    li, ni = stratify_los([True, True])
    assert len(ni) == 0
    flags = np.array([True, False, True, False, False])
    li, ni = stratify_los(flags)
    assert len(li) + len(ni) == 5 and not set(li) & set(ni)


def test_report_self_consistent():
    rng = np.random.default_rng(0)
    r = ErrorReport("m", rng.uniform(0, 20, 50), rng.uniform(size=50) > 0.3,
                    rng.uniform(0, 2, 50), rng.uniform(0, 30, 50), rng.uniform(size=50) > 0.2)
    d = json.loads(r.to_json())
    again = ErrorReport.from_dict(d)
    assert again.aggregates() == d["aggregates"]
    agg = d["aggregates"]
    assert agg["los"]["position"]["n"] + agg["nlos"]["position"]["n"] == agg["all"]["position"]["n"]
    assert "m\tall\t50" in comparison_table([r])
    assert ecdf_points([2.0, 1.0]) == [[1.0, 0.5], [2.0, 1.0]]
