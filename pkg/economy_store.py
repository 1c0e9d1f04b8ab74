"""
JSON persistence for economies, oligarchs, plans and solver outputs.

β and flow matrices are written as [row, col, value] triplets with 1-based
indices and only nonzero entries. Floats go through json's repr, which is
round-trip exact. Writes land in a .tmp file first and are then moved into
place so an interrupted run never leaves a half-written file behind.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

import numpy as np

from economy import Economy, OligarchSpec, ProductionPlan


class EconomyFormatError(ValueError):
    """Raised when a JSON document does not match the expected format."""


def _write_json(path: Path, payload: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    with open(tmp_path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    tmp_path.replace(path)


def read_json(path: Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise EconomyFormatError(f"{path}: not valid JSON ({exc})") from exc


def write_json(path: Path, payload: Any) -> None:
    _write_json(path, payload)


def matrix_to_triplets(matrix: np.ndarray) -> list[list]:
    rows, cols = np.nonzero(matrix)
    return [[int(r) + 1, int(c) + 1, float(matrix[r, c])] for r, c in zip(rows, cols)]


def triplets_to_matrix(triplets, size: int, *, source: str = "document") -> np.ndarray:
    matrix = np.zeros((size, size))
    for entry in triplets:
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise EconomyFormatError(f"{source}: matrix entries must be [row, col, value] triplets")
        row, col, value = entry
        if not (1 <= int(row) <= size and 1 <= int(col) <= size):
            raise EconomyFormatError(f"{source}: index ({row}, {col}) outside 1..{size}")
        matrix[int(row) - 1, int(col) - 1] = float(value)
    return matrix


def economy_to_dict(economy: Economy) -> dict:
    return {
        "n_raw": economy.n_raw,
        "n_goods": economy.n_goods,
        "alpha": [float(a) for a in economy.alpha],
        "prices": [float(v) for v in economy.prices],
        "beta": matrix_to_triplets(economy.beta),
    }


def economy_from_dict(data: dict, *, source: str = "economy") -> Economy:
    missing = [key for key in ("n_raw", "n_goods", "alpha", "prices", "beta") if key not in data]
    if missing:
        raise EconomyFormatError(f"{source}: missing fields {missing}")
    n_goods = int(data["n_goods"])
    if len(data["alpha"]) != n_goods or len(data["prices"]) != n_goods:
        raise EconomyFormatError(f"{source}: alpha and prices must have n_goods={n_goods} entries")
    beta = triplets_to_matrix(data["beta"], n_goods, source=source)
    return Economy.from_arrays(int(data["n_raw"]), beta, data["alpha"], data["prices"])


def load_economy(path: Path) -> Economy:
    return economy_from_dict(read_json(path), source=str(path))


def save_economy(economy: Economy, path: Path) -> None:
    _write_json(path, economy_to_dict(economy))


def oligarch_to_dict(oligarch: OligarchSpec) -> dict:
    return {"members": sorted(oligarch.members), "depth": oligarch.depth}


def load_oligarch_members(path: Path) -> list[int]:
    data = read_json(path)
    if not isinstance(data, dict) or not isinstance(data.get("members"), list):
        raise EconomyFormatError(f"{path}: expected an object with a 'members' list")
    return [int(m) for m in data["members"]]


def save_oligarch(oligarch: OligarchSpec, path: Path) -> None:
    _write_json(path, oligarch_to_dict(oligarch))


def plan_to_dict(plan: ProductionPlan) -> dict:
    return {
        "n_goods": int(plan.outputs.shape[0]),
        "flows": matrix_to_triplets(plan.flows),
        "outputs": [float(y) for y in plan.outputs],
    }


def plan_from_dict(data: dict, *, source: str = "plan") -> ProductionPlan:
    if "flows" not in data or "outputs" not in data:
        raise EconomyFormatError(f"{source}: a plan needs 'flows' and 'outputs'")
    size = len(data["outputs"])
    flows = triplets_to_matrix(data["flows"], size, source=source)
    outputs = np.array(data["outputs"], dtype=float)
    flows.setflags(write=False)
    outputs.setflags(write=False)
    return ProductionPlan(flows, outputs)


def solution_to_dict(solution) -> dict:
    payload = plan_to_dict(solution.plan)
    payload.update(
        {
            "objective": float(solution.objective),
            "kkt_residual": float(solution.kkt_residual),
            "status": solution.status.value,
            "iterations": int(solution.iterations),
        }
    )
    return payload


def load_solution(path: Path):
    from solver import PlanSolution, SolveStatus

    data = read_json(path)
    try:
        status = SolveStatus(data["status"])
        return PlanSolution(
            plan=plan_from_dict(data, source=str(path)),
            objective=float(data["objective"]),
            kkt_residual=float(data["kkt_residual"]),
            iterations=int(data["iterations"]),
            status=status,
        )
    except (KeyError, ValueError) as exc:
        raise EconomyFormatError(f"{path}: not a plan solution ({exc})") from exc


def save_solution(solution, path: Path) -> None:
    _write_json(path, solution_to_dict(solution))


def save_scenario_result(result, path: Path, *, extra: Optional[dict] = None) -> None:
    payload = result.to_dict()
    if extra:
        payload.update(extra)
    _write_json(path, payload)
