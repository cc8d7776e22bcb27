from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from openpyxl import Workbook
from openpyxl.styles import Font, PatternFill

from online_sampler.models.schemas import DiscrepancyReport
from online_sampler.services.point_set import Rational, SortedPointSet

PathLike = Union[str, Path]

FORMATS = ("csv", "json", "xlsx")
TRACE_COLUMNS = ("n", "chosen", "energy")
REPORT_COLUMNS = ("n", "star", "extreme", "l1_star", "periodic_l2", "scaled_star", "scaled_extreme")
HEADER_FILL = PatternFill(fill_type="solid", fgColor="FFFF00")


class FileFormatError(ValueError):
    pass


def ensure_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise FileFormatError(f"Unsupported format '{fmt}'. Allowed: {', '.join(FORMATS)}")


def render_table(header: Sequence[str], rows: Iterable[Sequence[Any]], fmt: str = "csv") -> str:
    _check_format(fmt)
    if fmt == "xlsx":
        raise FileFormatError("xlsx output needs a file path (--out).")
    if fmt == "json":
        records = [dict(zip(header, row)) for row in rows]
        return json.dumps(records, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _write_xlsx(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], title: str) -> None:
    wb = Workbook()
    ws = wb.active
    ws.title = title[:31]
    ws.append(list(header))
    for cell in ws[1]:
        cell.fill = HEADER_FILL
        cell.font = Font(bold=True)
    for row in rows:
        ws.append(list(row))
    ws.freeze_panes = "A2"
    wb.save(path)


def write_table(
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    path: PathLike,
    fmt: str = "csv",
    *,
    title: str = "data",
) -> Path:
    _check_format(fmt)
    dest = Path(path)
    try:
        ensure_dir(dest.parent)
        if fmt == "xlsx":
            _write_xlsx(dest, header, rows, title)
        else:
            dest.write_text(render_table(header, rows, fmt), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Failed to write {dest}: {exc}") from exc
    return dest


# --- point sets ---------------------------------------------------------------


def parse_points(text: str, source: str = "<input>") -> Tuple[List[float], List[Optional[Rational]]]:
    """One value per line, optionally followed by ``num/den``; '#' starts a comment line."""
    values: List[float] = []
    rationals: List[Optional[Rational]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        try:
            values.append(float(parts[0]))
            if len(parts) > 1:
                num, den = parts[1].split("/")
                rationals.append((int(num), int(den)))
            else:
                rationals.append(None)
        except ValueError as exc:
            raise FileFormatError(f"{source}:{lineno}: cannot parse point line {raw!r}") from exc
    return values, rationals


def read_points(path: PathLike) -> Tuple[List[float], List[Optional[Rational]]]:
    src = Path(path)
    try:
        text = src.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Failed to read {src}: {exc}") from exc
    return parse_points(text, str(src))


def read_point_set(path: PathLike) -> SortedPointSet:
    values, rationals = read_points(path)
    return SortedPointSet.from_values(values, rationals)


def render_points(
    values: Sequence[float],
    rationals: Optional[Sequence[Optional[Rational]]] = None,
    fmt: str = "csv",
) -> str:
    _check_format(fmt)
    rats = list(rationals) if rationals is not None else [None] * len(values)
    if fmt == "json":
        return json.dumps({"points": [float(v) for v in values]}, indent=2) + "\n"
    if fmt == "xlsx":
        raise FileFormatError("xlsx output needs a file path (--out).")
    lines = []
    for v, r in zip(values, rats):
        lines.append(f"{float(v):.17g}" if r is None else f"{float(v):.17g} {r[0]}/{r[1]}")
    return "\n".join(lines) + "\n"


def write_points(
    values: Sequence[float],
    path: PathLike,
    rationals: Optional[Sequence[Optional[Rational]]] = None,
    fmt: str = "csv",
) -> Path:
    if fmt == "xlsx":
        rats = list(rationals) if rationals is not None else [None] * len(values)
        rows = [(float(v), f"{r[0]}/{r[1]}" if r else None) for v, r in zip(values, rats)]
        return write_table(("value", "rational"), rows, path, fmt, title="points")
    dest = Path(path)
    try:
        ensure_dir(dest.parent)
        dest.write_text(render_points(values, rationals, fmt), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Failed to write {dest}: {exc}") from exc
    return dest


# --- traces and reports ---------------------------------------------------------


def trace_rows(n: Sequence[int], chosen: Sequence[float], energy: Sequence[float]) -> List[Tuple[int, float, float]]:
    return [(int(a), float(b), float(c)) for a, b, c in zip(n, chosen, energy)]


def report_rows(reports: Iterable[DiscrepancyReport]) -> List[Tuple[Any, ...]]:
    rows = []
    for report in reports:
        data = report.model_dump()
        rows.append(tuple(data[c] for c in REPORT_COLUMNS))
    return rows


def write_reports(reports: Sequence[DiscrepancyReport], path: PathLike, fmt: str = "csv") -> Path:
    return write_table(REPORT_COLUMNS, report_rows(reports), path, fmt, title="discrepancy")


# --- distribution specs ---------------------------------------------------------


def read_distribution_spec(path: PathLike) -> Dict[str, Any]:
    src = Path(path)
    try:
        data = json.loads(src.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"Failed to read {src}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{src}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or "type" not in data:
        raise FileFormatError(f"{src}: distribution spec must be a JSON object with a 'type' key.")
    return data
