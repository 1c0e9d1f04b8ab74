import re

import numpy as np
import pytest

from experiments import ExperimentRecord, GridKind, aggregate
from report import (
    HEATMAP,
    LINES,
    FigureSpec,
    ReportFormatError,
    emit_csv,
    emit_heatmap_svg,
    emit_lines_svg,
    interpolate_color,
    load_grids,
    read_records_csv,
    render_heatmap_svg,
    render_lines_svg,
    save_grids,
    write_report,
)


def _solved(depth, size, gamma, relative_gdp, replication=0, ratio=2.5):
    return ExperimentRecord(
        replication=replication,
        economy_seed=18446744073709551557,
        depth_requested=depth,
        depth_achieved=depth,
        size=size,
        gamma=gamma,
        feasible=True,
        psi_star=100.0,
        oligarch_baseline=40.0,
        oligarch_optimal=41.0,
        final_gdp=100.0 * relative_gdp,
        relative_gdp=relative_gdp,
        profit_gain=1.0,
        gdp_loss=100.0 * (1 - relative_gdp),
        inefficiency_ratio=ratio,
    )


def _missing(depth, size, gamma, replication=0):
    return ExperimentRecord(replication, 42, depth, None, size, gamma, False, status="no_oligarch")


def _sixteen_records():
    records = []
    for replication in range(2):
        for depth in (1, 2):
            for size in (1, 2):
                for gamma in (0.0, 1.0):
                    if depth == 2 and size == 2:
                        records.append(_missing(depth, size, gamma, replication))
                    else:
                        records.append(_solved(depth, size, gamma, 0.9 + 0.01 * size, replication, ratio=None if gamma == 0 else 3.0))
    return records


def _spec(tmp_path, kind=HEATMAP, name="figure.svg"):
    return FigureSpec(kind, "Figure", "Oligarchization", "Depth", tmp_path / name)


def _gamma_grid(values_by_gamma, depth=1):
    records = [
        _solved(depth, size, gamma, value)
        for gamma, values in values_by_gamma.items()
        for size, value in enumerate(values, start=1)
        if value is not None
    ]
    # Keep the size axis complete even where a series has no value.
    sizes = {r.size for r in records}
    longest = max(len(v) for v in values_by_gamma.values())
    first_gamma = next(iter(values_by_gamma))
    records += [_missing(depth, size, first_gamma) for size in range(1, longest + 1) if size not in sizes]
    return aggregate(records, GridKind.RELATIVE_GDP_BY_SIZE_GAMMA, depth=depth)


def test_records_csv_has_header_and_one_line_per_record(tmp_path):
    records = _sixteen_records()
    written = emit_csv(records, tmp_path / "records.csv")
    lines = (tmp_path / "records.csv").read_text().splitlines()
    assert len(lines) == 17
    assert lines[0].startswith("replication,economy_seed,depth_requested")
    assert written.items == 16
    assert len(written.sha256) == 64


def test_records_csv_round_trip(tmp_path):
    records = _sixteen_records()
    emit_csv(records, tmp_path / "records.csv")
    assert read_records_csv(tmp_path / "records.csv") == records


def test_empty_stream_is_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "records.csv")


def test_wrong_header_is_rejected(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ReportFormatError):
        read_records_csv(path)


def test_grid_csv_has_one_row_per_cell(tmp_path):
    grid = aggregate(_sixteen_records(), GridKind.RELATIVE_GDP_BY_DEPTH_SIZE)
    written = emit_csv(grid, tmp_path / "grid.csv")
    assert written.items == 4
    assert (tmp_path / "grid.csv").read_text().splitlines()[0].startswith("row_axis,row,size,percent,mean")


def test_grids_file_round_trip(tmp_path):
    grid = aggregate(_sixteen_records(), GridKind.RELATIVE_GDP_BY_DEPTH_SIZE)
    save_grids({"g": grid}, tmp_path / "grids.json")
    loaded = load_grids(tmp_path / "grids.json")
    np.testing.assert_array_equal(loaded["g"].mean, grid.mean)
    (tmp_path / "bad.json").write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ReportFormatError):
        load_grids(tmp_path / "bad.json")


def test_interpolate_color():
    assert interpolate_color("#000000", "#ffffff", 0.0) == "#000000"
    assert interpolate_color("#000000", "#ffffff", 1.0) == "#ffffff"
    assert interpolate_color("#000000", "#ffffff", 2.0) == "#ffffff"
    assert interpolate_color("#000000", "#204060", 0.5) == "#102030"


def test_heatmap_has_one_rect_per_populated_cell(tmp_path):
    rng = np.random.default_rng(1)
    records = [
        _solved(depth, size, 1.0, float(rng.uniform(0.6, 1.0)))
        for depth in range(1, 6)
        for size in range(1, 26)
        if (depth + size) % 7
    ]
    grid = aggregate(records, GridKind.RELATIVE_GDP_BY_DEPTH_SIZE)
    written = emit_heatmap_svg(grid, _spec(tmp_path))
    text = (tmp_path / "figure.svg").read_text()
    cells = text.count('class="cell"')
    assert cells <= 125
    assert cells == grid.populated() == written.items
    assert text.count('class="label"') == cells


def test_constant_grid_has_uniform_fill(tmp_path):
    records = [_solved(depth, size, 1.0, 1.0) for depth in (1, 2) for size in (1, 2, 3)]
    text = render_heatmap_svg(aggregate(records, GridKind.RELATIVE_GDP_BY_DEPTH_SIZE), _spec(tmp_path))
    fills = set(re.findall(r'class="cell"[^>]*fill="(#[0-9a-f]{6})"', text))
    assert len(fills) == 1


def test_single_cell_label(tmp_path):
    grid = aggregate([_solved(1, 3, 1.0, 683.83 / 704.65)], GridKind.RELATIVE_GDP_BY_DEPTH_SIZE, n_companies=6)
    text = render_heatmap_svg(grid, _spec(tmp_path))
    assert text.count('class="cell"') == 1
    assert ">0.97</text>" in text


def test_empty_cells_are_hatched(tmp_path):
    records = [_solved(1, 1, 1.0, 0.9), _solved(2, 2, 1.0, 0.8)]
    text = render_heatmap_svg(aggregate(records, GridKind.RELATIVE_GDP_BY_DEPTH_SIZE), _spec(tmp_path))
    assert text.count('class="empty"') == 2
    assert 'fill="url(#hatch)"' in text
    assert 'class="legend-max"' in text and ">0.90</text>" in text


def test_one_polyline_per_gamma(tmp_path):
    grid = _gamma_grid({g: [1.0, 0.95, 0.9] for g in (0.0, 0.25, 0.5, 0.75, 1.0)})
    written = emit_lines_svg([grid], _spec(tmp_path, LINES))
    text = (tmp_path / "figure.svg").read_text()
    assert written.items == 5
    assert text.count("<polyline") == 5
    assert text.count('class="series full-capture"') == 1
    full = re.search(r'<polyline class="series full-capture"[^>]*>', text).group(0)
    assert 'stroke="#000000"' in full
    assert 'data-gamma="1"' in full


def test_missing_cell_splits_the_line(tmp_path):
    grid = _gamma_grid({1.0: [1.0, None, 0.9, 0.85]})
    text, polylines = render_lines_svg([grid], _spec(tmp_path, LINES))
    assert polylines == 2


def test_full_ownership_endpoint_is_at_one(tmp_path):
    grid = _gamma_grid({0.0: [0.99, 1.0], 1.0: [0.8, 1.0]})
    text, _ = render_lines_svg([grid], _spec(tmp_path, LINES))
    endpoints = {points.split()[-1] for points in re.findall(r'points="([^"]+)"', text)}
    assert len(endpoints) == 1


def test_lines_need_gamma_grids(tmp_path):
    grid = aggregate([_solved(1, 1, 1.0, 0.9)], GridKind.RELATIVE_GDP_BY_DEPTH_SIZE)
    with pytest.raises(ValueError):
        render_lines_svg([grid], _spec(tmp_path, LINES))


def test_figures_are_deterministic(tmp_path):
    grid = aggregate(_sixteen_records(), GridKind.RELATIVE_GDP_BY_DEPTH_SIZE)
    first = emit_heatmap_svg(grid, _spec(tmp_path, name="a.svg"))
    second = emit_heatmap_svg(grid, _spec(tmp_path, name="b.svg"))
    assert first.sha256 == second.sha256


def test_write_report(tmp_path):
    records = _sixteen_records()
    grids = {
        "relative_gdp_by_depth_size": aggregate(records, GridKind.RELATIVE_GDP_BY_DEPTH_SIZE),
        "inefficiency_by_depth_size": aggregate(records, GridKind.INEFFICIENCY_BY_DEPTH_SIZE),
        "relative_gdp_by_size_gamma_depth1": aggregate(records, GridKind.RELATIVE_GDP_BY_SIZE_GAMMA, depth=1),
    }
    lines = []
    written = write_report(grids, tmp_path / "out", log=lines.append)
    names = sorted(item.path.name for item in written)
    assert names == sorted(
        [
            "relative_gdp.svg",
            "inefficiency.svg",
            "capture_lines.svg",
            "relative_gdp_by_depth_size.csv",
            "inefficiency_by_depth_size.csv",
            "relative_gdp_by_size_gamma_depth1.csv",
        ]
    )
    assert len(lines) == 6


def test_figure_kind_is_checked(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec("pie", "t", "x", "y", tmp_path / "p.svg")
