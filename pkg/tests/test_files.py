from __future__ import annotations

import json

import pytest
from openpyxl import load_workbook

from online_sampler.models.schemas import DiscrepancyReport
from online_sampler.services.point_set import PointSetError
from online_sampler.utils.files import (
    HEADER_FILL,
    TRACE_COLUMNS,
    FileFormatError,
    parse_points,
    read_distribution_spec,
    read_point_set,
    render_points,
    render_table,
    report_rows,
    trace_rows,
    write_points,
    write_table,
)


def test_parse_points_with_comments_and_rationals():
    text = "# seed\n0.33333333333333331 1/3\n\n0.5, 1/2\n0.25\n"
    values, rationals = parse_points(text)
    assert values == [1 / 3, 0.5, 0.25]
    assert rationals == [(1, 3), (1, 2), None]


def test_parse_points_reports_line_numbers():
    with pytest.raises(FileFormatError, match="seed.txt:2"):
        parse_points("0.1\nabc\n", "seed.txt")
    with pytest.raises(FileFormatError):
        parse_points("0.5 1-2\n")


def test_read_point_set_sorts_and_validates(tmp_path):
    path = tmp_path / "pts.txt"
    path.write_text("0.75\n0.25 1/4\n", encoding="utf-8")
    ps = read_point_set(path)
    assert ps.values.tolist() == [0.25, 0.75]
    assert ps.rationals == ((1, 4), None)
    path.write_text("1.25\n", encoding="utf-8")
    with pytest.raises(PointSetError):
        read_point_set(path)


def test_read_missing_file_names_the_path(tmp_path):
    with pytest.raises(OSError, match="missing.txt"):
        read_point_set(tmp_path / "missing.txt")


def test_rendered_points_parse_back_exactly():
    values = [1 / 3, 0.1 + 0.2]
    text = render_points(values, [(1, 3), None])
    assert parse_points(text) == (values, [(1, 3), None])
    assert json.loads(render_points(values, fmt="json")) == {"points": values}
    with pytest.raises(FileFormatError):
        render_points(values, fmt="xlsx")


def test_trace_table_csv_and_json():
    rows = trace_rows([3, 4], [1 / 3, 0.75], [0.5, 0.25])
    csv_text = render_table(TRACE_COLUMNS, rows)
    assert csv_text.splitlines()[0] == "n,chosen,energy"
    assert csv_text.splitlines()[1] == "3,0.33333333333333331,0.5"
    assert json.loads(render_table(TRACE_COLUMNS, rows, "json"))[1] == {"n": 4, "chosen": 0.75, "energy": 0.25}
    with pytest.raises(FileFormatError):
        render_table(TRACE_COLUMNS, rows, "parquet")


def test_report_rows_leave_missing_metrics_blank():
    rows = report_rows([DiscrepancyReport(n=1, star=0.5)])
    assert rows == [(1, 0.5, None, None, None, None, None)]
    assert render_table(("n", "star", "extreme"), [rows[0][:3]]).splitlines()[1] == "1,0.5,"


def test_xlsx_table_has_styled_header(tmp_path):
    path = write_table(TRACE_COLUMNS, [(3, 0.5, 0.25)], tmp_path / "nested" / "trace.xlsx", "xlsx", title="trace")
    ws = load_workbook(path).active
    assert ws.title == "trace"
    assert [c.value for c in ws[1]] == list(TRACE_COLUMNS)
    assert ws["A1"].font.bold
    assert ws["A1"].fill.fgColor.rgb.endswith(HEADER_FILL.fgColor.rgb[-6:])
    assert ws.freeze_panes == "A2"
    assert ws["B2"].value == 0.5


def test_write_points_xlsx_and_text(tmp_path):
    xlsx = write_points([0.5, 0.25], tmp_path / "pts.xlsx", [(1, 2), None], "xlsx")
    ws = load_workbook(xlsx).active
    assert ws["B2"].value == "1/2"
    assert ws["B3"].value is None
    text = write_points([0.5], tmp_path / "pts.txt")
    assert text.read_text(encoding="utf-8") == "0.5\n"


def test_read_distribution_spec(tmp_path):
    path = tmp_path / "dist.json"
    path.write_text('{"type": "gaussian", "mean": 0, "std": 1}', encoding="utf-8")
    assert read_distribution_spec(path)["type"] == "gaussian"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(FileFormatError):
        read_distribution_spec(path)
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(FileFormatError, match="invalid JSON"):
        read_distribution_spec(path)
