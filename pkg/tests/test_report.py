import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtomo.errors import EmptyTableError, InvalidArgument
from qtomo.phantom import load_pgm
from qtomo.pipeline import RefinementRecord
from qtomo.report import (
    LEDGER_COLUMNS,
    ReconReport,
    build_report,
    dose_reduction,
    pixel_accuracy,
    render_gap_table,
    rmse,
    save_difference_pgm,
)


def records():
    return [
        RefinementRecord(1, "S1", -10.0, -9.5, 0.25, "a"),
        RefinementRecord(2, "S1", -7.0, -7.0, 0.5, "a"),
    ]


def test_accuracy_examples(rng):
    ref = rng.integers(0, 2, (10, 10)).astype(float)
    assert pixel_accuracy(ref, ref, (0, 1)) == 1.0
    assert pixel_accuracy(1 - ref, ref, (0, 1)) == 0.0
    one = ref.copy()
    one[3, 4] = 1 - one[3, 4]
    assert pixel_accuracy(one, ref, (0, 1)) == pytest.approx(0.99)


def test_accuracy_quantizes_first():
    # 0.5 ties go to the lower level
    assert pixel_accuracy([[0.4, 0.5, 0.51]], [[0, 0, 1]], (0, 1)) == 1.0


def test_accuracy_shape_mismatch():
    with pytest.raises(InvalidArgument):
        pixel_accuracy(np.zeros((2, 2)), np.zeros((2, 3)), (0, 1))


def test_rmse():
    assert rmse([[0, 0]], [[3, 4]]) == pytest.approx(np.sqrt(12.5))


@pytest.mark.parametrize("n,N,want", [(50, 500, 90.0), (7, 7, 0.0), (50, 100, 50.0)])
def test_dose_examples(n, N, want):
    assert dose_reduction(n, N) == want


@pytest.mark.parametrize("n,N", [(6, 5), (0, 5), (-1, 5)])
def test_dose_invalid(n, N):
    with pytest.raises(InvalidArgument):
        dose_reduction(n, N)


@given(N=st.integers(2, 1000), data=st.data())
def test_dose_monotone(N, data):
    a = data.draw(st.integers(1, N - 1))
    assert dose_reduction(a, N) > dose_reduction(a + 1, N)


def test_gap_table_rows_and_recomputed_gap():
    text = render_gap_table(records())
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == LEDGER_COLUMNS
    assert len(rows) == 3
    for r in rows[1:]:
        assert float(r[6]) == abs(float(r[4]) - float(r[5]))
    assert rows[1][:4] == ["a", "1", "S1", "0.25"]


def test_gap_table_is_pure():
    assert render_gap_table(records()) == render_gap_table(records())
    assert render_gap_table(records(), include_runtime=False).splitlines()[1] == "a,1,S1,,-10.0,-9.5,0.5"


def test_gap_table_empty():
    with pytest.raises(EmptyTableError):
        render_gap_table([])


def test_report_invariants():
    with pytest.raises(InvalidArgument):
        ReconReport(1.5, 0.0, 10.0)
    with pytest.raises(InvalidArgument):
        ReconReport(0.5, 0.0, 100.0)


def test_build_report_and_summary():
    ref = np.eye(4)
    rep = build_report(ref, ref, (0, 1), records(), 2, 4, wall_time_s=1.0)
    assert rep.pixel_accuracy == 1.0 and rep.dose_reduction_pct == 50.0
    assert "wall_time_s" not in rep.to_dict(include_timing=False)
    assert "pixel accuracy" in rep.summary()
    blind = build_report(ref, None, (0, 1), records(), 2, 4)
    assert blind.pixel_accuracy is None and "pixel accuracy" not in blind.summary()


def test_difference_image(tmp_path):
    a = np.zeros((3, 3))
    b = a.copy()
    b[1, 1] = 2
    save_difference_pgm(a, b, tmp_path / "d.pgm")
    d = load_pgm(tmp_path / "d.pgm")
    assert d[1, 1] == 255 and d.sum() == 255
