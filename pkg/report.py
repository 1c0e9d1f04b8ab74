"""
CSV, JSON and SVG artifacts for experiment records and aggregate grids.

SVG output is written by hand with fixed element order and fixed number
formatting, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import html
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from economy_store import read_json, write_json
from experiments import CSV_HEADER, AggregateGrid, ExperimentRecord, GridKind
from paths import (
    CAPTURE_LINES_FILENAME,
    INEFFICIENCY_FILENAME,
    RELATIVE_GDP_FILENAME,
)


HEATMAP = "heatmap"
LINES = "lines"

CELL_WIDTH = 44
CELL_HEIGHT = 26
MARGIN_LEFT = 80
MARGIN_TOP = 56
MARGIN_RIGHT = 120
MARGIN_BOTTOM = 56
PLOT_WIDTH = 640
PLOT_HEIGHT = 360

FULL_CAPTURE_STROKE = "#000000"
PARTIAL_CAPTURE_STROKE = "#9a9a9a"

GRID_CSV_HEADER = (
    "row_axis", "row", "size", "percent", "mean", "std",
    "count", "count_undefined", "count_failed", "count_infeasible",
)


class ReportFormatError(ValueError):
    """Raised when a records CSV or grids file does not have the expected layout."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    title: str
    x_label: str
    y_label: str
    path: Path
    low_color: str = "#f7fbff"
    high_color: str = "#08306b"
    number_format: str = "{:.2f}"

    def __post_init__(self):
        if self.kind not in (HEATMAP, LINES):
            raise ValueError(f"Unknown figure kind: {self.kind}")


@dataclass(frozen=True)
class WrittenFile:
    path: Path
    items: int
    sha256: str


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_text(path: Path, text: str) -> WrittenFile:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        tmp_path.replace(path)
    except OSError as exc:
        raise OSError(f"Could not write {path}: {exc}") from exc
    return WrittenFile(path, 0, _digest(path))


def _records_frame(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([r.to_row() for r in records], columns=list(CSV_HEADER))
    frame["depth_achieved"] = frame["depth_achieved"].astype("Int64")
    frame["economy_seed"] = frame["economy_seed"].map(str)
    return frame


def _grid_frame(grid: AggregateGrid) -> pd.DataFrame:
    rows = []
    for i, row in enumerate(grid.rows):
        for j, size in enumerate(grid.sizes):
            rows.append(
                {
                    "row_axis": grid.row_axis,
                    "row": row,
                    "size": size,
                    "percent": grid.percent[j],
                    "mean": grid.mean[i, j],
                    "std": grid.std[i, j],
                    "count": int(grid.count[i, j]),
                    "count_undefined": int(grid.count_undefined[i, j]),
                    "count_failed": int(grid.count_failed[i, j]),
                    "count_infeasible": int(grid.count_infeasible[i, j]),
                }
            )
    return pd.DataFrame(rows, columns=list(GRID_CSV_HEADER))


def emit_csv(data: Union[Sequence[ExperimentRecord], AggregateGrid], path: Path) -> WrittenFile:
    """
    Write records (one row each, fixed header) or a grid (one row per cell).

    Returns:
        WrittenFile with the number of data rows and the file's SHA-256.
    """
    if isinstance(data, AggregateGrid):
        frame = _grid_frame(data)
        if frame.empty:
            raise ValueError("Cannot write an empty grid")
    else:
        data = list(data)
        if not data:
            raise ValueError("Cannot write an empty record stream")
        frame = _records_frame(data)
    written = _write_text(path, frame.to_csv(index=False, lineterminator="\n"))
    return WrittenFile(written.path, len(frame), written.sha256)


def _optional_float(value) -> Optional[float]:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return float(value)


def read_records_csv(path: Path) -> list[ExperimentRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    frame = pd.read_csv(path, dtype={"economy_seed": str, "status": str}, float_precision="round_trip")
    if tuple(frame.columns) != CSV_HEADER:
        raise ReportFormatError(f"{path}: unexpected header {list(frame.columns)}")
    records = []
    for row in frame.to_dict(orient="records"):
        depth_achieved = _optional_float(row["depth_achieved"])
        feasible = row["feasible"]
        if isinstance(feasible, str):
            feasible = feasible == "True"
        records.append(
            ExperimentRecord(
                replication=int(row["replication"]),
                economy_seed=int(row["economy_seed"]),
                depth_requested=int(row["depth_requested"]),
                depth_achieved=None if depth_achieved is None else int(depth_achieved),
                size=int(row["size"]),
                gamma=float(row["gamma"]),
                feasible=bool(feasible),
                psi_star=_optional_float(row["psi_star"]),
                oligarch_baseline=_optional_float(row["oligarch_baseline"]),
                oligarch_optimal=_optional_float(row["oligarch_optimal"]),
                final_gdp=_optional_float(row["final_gdp"]),
                relative_gdp=_optional_float(row["relative_gdp"]),
                profit_gain=_optional_float(row["profit_gain"]),
                gdp_loss=_optional_float(row["gdp_loss"]),
                inefficiency_ratio=_optional_float(row["inefficiency_ratio"]),
                status=str(row["status"]),
            )
        )
    return records


def save_grids(grids: dict[str, AggregateGrid], path: Path) -> None:
    write_json(path, {name: grid.to_dict() for name, grid in grids.items()})


def load_grids(path: Path) -> dict[str, AggregateGrid]:
    data = read_json(path)
    if not isinstance(data, dict):
        raise ReportFormatError(f"{path}: expected an object of named grids")
    try:
        return {name: AggregateGrid.from_dict(entry) for name, entry in data.items()}
    except (KeyError, ValueError, TypeError) as exc:
        raise ReportFormatError(f"{path}: not a grids file ({exc})") from exc


def _hex_to_rgb(color: str) -> tuple[int, int, int]:
    color = color.lstrip("#")
    return int(color[0:2], 16), int(color[2:4], 16), int(color[4:6], 16)


def interpolate_color(low: str, high: str, t: float) -> str:
    t = min(1.0, max(0.0, t))
    a, b = _hex_to_rgb(low), _hex_to_rgb(high)
    return "#" + "".join(f"{round(x + (y - x) * t):02x}" for x, y in zip(a, b))


def _text(x: float, y: float, content: str, *, anchor: str = "middle", size: int = 11,
          css: Optional[str] = None, fill: str = "#222222", rotate: bool = False) -> str:
    attrs = f'x="{x:.2f}" y="{y:.2f}" font-size="{size}" text-anchor="{anchor}" fill="{fill}"'
    if css:
        attrs += f' class="{css}"'
    if rotate:
        attrs += f' transform="rotate(-90 {x:.2f} {y:.2f})"'
    return f"<text {attrs}>{html.escape(content)}</text>"


def _document(width: float, height: float, body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">'
    )
    lines = [head, f"<title>{html.escape(title)}</title>", *body, "</svg>"]
    return "\n".join(lines) + "\n"


def _value_range(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    return float(finite.min()), float(finite.max())


def render_heatmap_svg(grid: AggregateGrid, spec: FigureSpec) -> str:
    """Rows of the grid top to bottom, sizes left to right, as a labelled colour grid."""
    n_rows, n_cols = grid.shape
    width = MARGIN_LEFT + n_cols * CELL_WIDTH + MARGIN_RIGHT
    height = MARGIN_TOP + n_rows * CELL_HEIGHT + MARGIN_BOTTOM
    low, high = _value_range(grid.mean)
    span = high - low

    body = [
        "<defs>",
        '<pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">',
        '<line x1="0" y1="0" x2="0" y2="6" stroke="#b0b0b0" stroke-width="2"/>',
        "</pattern>",
        '<linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">',
        f'<stop offset="0" stop-color="{spec.low_color}"/>',
        f'<stop offset="1" stop-color="{spec.high_color}"/>',
        "</linearGradient>",
        "</defs>",
        _text(width / 2, 24, spec.title, size=14),
    ]
    for i, row in enumerate(grid.rows):
        y = MARGIN_TOP + i * CELL_HEIGHT
        body.append(_text(MARGIN_LEFT - 8, y + CELL_HEIGHT / 2 + 4, f"{row:g}", anchor="end"))
        for j in range(n_cols):
            x = MARGIN_LEFT + j * CELL_WIDTH
            geometry = f'x="{x:.2f}" y="{y:.2f}" width="{CELL_WIDTH}" height="{CELL_HEIGHT}"'
            if grid.count[i, j] == 0:
                body.append(f'<rect class="empty" {geometry} fill="url(#hatch)" stroke="#ffffff"/>')
                continue
            value = float(grid.mean[i, j])
            t = 0.5 if span <= 1e-12 else (value - low) / span
            fill = interpolate_color(spec.low_color, spec.high_color, t)
            body.append(
                f'<rect class="cell" {geometry} fill="{fill}" stroke="#ffffff" '
                f'data-count="{int(grid.count[i, j])}"/>'
            )
            ink = "#ffffff" if t > 0.6 else "#111111"
            body.append(
                _text(x + CELL_WIDTH / 2, y + CELL_HEIGHT / 2 + 4, spec.number_format.format(value),
                      size=10, css="label", fill=ink)
            )

    axis_y = MARGIN_TOP + n_rows * CELL_HEIGHT
    for j, percent in enumerate(grid.percent):
        x = MARGIN_LEFT + j * CELL_WIDTH + CELL_WIDTH / 2
        body.append(_text(x, axis_y + 16, f"{percent * 100:.0f}%", size=10))
    body.append(_text(MARGIN_LEFT + n_cols * CELL_WIDTH / 2, axis_y + 40, spec.x_label))
    body.append(_text(20, MARGIN_TOP + n_rows * CELL_HEIGHT / 2, spec.y_label, rotate=True))

    legend_x = MARGIN_LEFT + n_cols * CELL_WIDTH + 30
    legend_h = max(n_rows * CELL_HEIGHT, 60)
    body.append(
        f'<rect class="legend" x="{legend_x:.2f}" y="{MARGIN_TOP:.2f}" width="16" '
        f'height="{legend_h:.2f}" fill="url(#scale)"/>'
    )
    body.append(_text(legend_x + 22, MARGIN_TOP + 10, spec.number_format.format(high), anchor="start", css="legend-max"))
    body.append(
        _text(legend_x + 22, MARGIN_TOP + legend_h, spec.number_format.format(low), anchor="start", css="legend-min")
    )
    return _document(width, max(height, MARGIN_TOP + legend_h + MARGIN_BOTTOM), body, spec.title)


def emit_heatmap_svg(grid: AggregateGrid, spec: FigureSpec) -> WrittenFile:
    written = _write_text(spec.path, render_heatmap_svg(grid, spec))
    return WrittenFile(written.path, grid.populated(), written.sha256)


def _segments(grid: AggregateGrid, i: int) -> list[list[tuple[float, float]]]:
    """Runs of consecutive populated cells in row i as (percent, mean) points."""
    segments, current = [], []
    for j, percent in enumerate(grid.percent):
        if grid.count[i, j] > 0:
            current.append((percent, float(grid.mean[i, j])))
        elif current:
            segments.append(current)
            current = []
    if current:
        segments.append(current)
    return segments


def render_lines_svg(grids: Sequence[AggregateGrid], spec: FigureSpec) -> tuple[str, int]:
    """
    One polyline per run of populated cells for every (depth, γ) series.
    Full capture (γ = 1) is drawn black and thicker, lower γ in gray.
    """
    for grid in grids:
        if grid.kind is not GridKind.RELATIVE_GDP_BY_SIZE_GAMMA:
            raise ValueError(f"line charts need size-by-gamma grids, got {grid.kind.value}")

    all_percent = sorted({p for grid in grids for p in grid.percent})
    x_max = max(all_percent) if all_percent else 1.0
    values = np.concatenate([g.mean[g.count > 0] for g in grids]) if grids else np.array([])
    low, high = _value_range(values)
    y_min = math.floor(min(low, 1.0) * 10) / 10
    y_max = max(high, 1.0)
    if y_max - y_min < 1e-12:
        y_min -= 0.1

    def px(percent: float) -> float:
        return MARGIN_LEFT + (percent / x_max if x_max else 0.0) * PLOT_WIDTH

    def py(value: float) -> float:
        return MARGIN_TOP + (y_max - value) / (y_max - y_min) * PLOT_HEIGHT

    width = MARGIN_LEFT + PLOT_WIDTH + MARGIN_RIGHT
    height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM
    body = [_text(width / 2, 24, spec.title, size=14)]
    body.append(
        f'<rect class="frame" x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{PLOT_WIDTH}" '
        f'height="{PLOT_HEIGHT}" fill="none" stroke="#444444"/>'
    )
    for tick in np.linspace(y_min, y_max, 5):
        body.append(_text(MARGIN_LEFT - 8, py(tick) + 4, spec.number_format.format(tick), anchor="end", size=10))
    for tick in np.linspace(0.0, x_max, 5):
        body.append(_text(px(tick), MARGIN_TOP + PLOT_HEIGHT + 16, f"{tick * 100:.0f}%", size=10))
    body.append(_text(MARGIN_LEFT + PLOT_WIDTH / 2, height - 12, spec.x_label))
    body.append(_text(20, MARGIN_TOP + PLOT_HEIGHT / 2, spec.y_label, rotate=True))

    polylines = 0
    for grid in grids:
        depth = grid.fixed.get("depth", "")
        for i, gamma in enumerate(grid.rows):
            full = math.isclose(float(gamma), 1.0)
            stroke = FULL_CAPTURE_STROKE if full else PARTIAL_CAPTURE_STROKE
            stroke_width = 2.5 if full else 1.2
            css = "series full-capture" if full else "series"
            for segment in _segments(grid, i):
                points = " ".join(f"{px(p):.2f},{py(v):.2f}" for p, v in segment)
                body.append(
                    f'<polyline class="{css}" data-depth="{depth}" data-gamma="{float(gamma):g}" '
                    f'points="{points}" fill="none" stroke="{stroke}" stroke-width="{stroke_width}"/>'
                )
                polylines += 1
    return _document(width, height, body, spec.title), polylines


def emit_lines_svg(grids: Sequence[AggregateGrid], spec: FigureSpec) -> WrittenFile:
    text, polylines = render_lines_svg(list(grids), spec)
    written = _write_text(spec.path, text)
    return WrittenFile(written.path, polylines, written.sha256)


def write_report(
    grids: dict[str, AggregateGrid], output_dir: Path, *, log: Optional[Callable[[str], None]] = None
) -> list[WrittenFile]:
    """Draw the standard figures and one CSV per grid into output_dir."""
    output_dir = Path(output_dir)
    written = []
    by_depth = grids.get(GridKind.RELATIVE_GDP_BY_DEPTH_SIZE.value)
    if by_depth is not None and by_depth.shape[0] and by_depth.shape[1]:
        written.append(
            emit_heatmap_svg(
                by_depth,
                FigureSpec(HEATMAP, "Relative GDP by oligarch depth and size", "Oligarchization |O|/|M|",
                           "Oligarch depth", output_dir / RELATIVE_GDP_FILENAME),
            )
        )
    inefficiency = grids.get(GridKind.INEFFICIENCY_BY_DEPTH_SIZE.value)
    if inefficiency is not None and inefficiency.shape[0] and inefficiency.shape[1]:
        written.append(
            emit_heatmap_svg(
                inefficiency,
                FigureSpec(HEATMAP, "GDP lost per unit of oligarch gain", "Oligarchization |O|/|M|",
                           "Oligarch depth", output_dir / INEFFICIENCY_FILENAME,
                           low_color="#fff5eb", high_color="#7f2704"),
            )
        )
    families = [g for g in grids.values() if g.kind is GridKind.RELATIVE_GDP_BY_SIZE_GAMMA]
    if families:
        written.append(
            emit_lines_svg(
                families,
                FigureSpec(LINES, "Relative GDP by capture power", "Oligarchization |O|/|M|",
                           "Relative GDP", output_dir / CAPTURE_LINES_FILENAME),
            )
        )
    for name, grid in grids.items():
        if grid.shape[0] and grid.shape[1]:
            written.append(emit_csv(grid, output_dir / f"{name}.csv"))
    if log:
        for item in written:
            log(f"Wrote {item.path} ({item.items} items)")
    return written
