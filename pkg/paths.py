from __future__ import annotations
from pathlib import Path

def get_output_dir(base: Path | str | None = None) -> Path:
    """
    Return the directory experiment artifacts are written to.
    Defaults to ./results next to the current working directory.
    """
    out = Path(base) if base is not None else Path.cwd() / "results"
    out.mkdir(parents=True, exist_ok=True)
    return out

PACKAGE_DIR = Path(__file__).resolve().parent
DATA_DIR = PACKAGE_DIR / "data"
E8_PATH = DATA_DIR / "e8.json"
RECORDS_FILENAME = "records.csv"
GRIDS_FILENAME = "grids.json"
RELATIVE_GDP_FILENAME = "relative_gdp.svg"
INEFFICIENCY_FILENAME = "inefficiency.svg"
CAPTURE_LINES_FILENAME = "capture_lines.svg"
