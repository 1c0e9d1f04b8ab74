"""
Monte Carlo sweeps over synthetic economies and their aggregation.

One economy is drawn per replication and reused for every (depth, size, γ)
cell. Its no-oligarch optimum is solved once; each (depth, size) pair gets
one oligarch, shared by all γ values. Per-cell failures are recorded with a
status tag and never abort the run.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from economy import Economy
from generator import GeneratorConfig, NoFeasibleOligarch, RejectionExhausted, generate_economy, generate_oligarch
from scenario import DEFAULT_GAIN_FLOOR, GLOBAL_STAGE, StageFailure, run_scenario
from solver import PlanSolution, SolverSettings, solve_global_optimum


CSV_HEADER = (
    "replication",
    "economy_seed",
    "depth_requested",
    "depth_achieved",
    "size",
    "gamma",
    "feasible",
    "psi_star",
    "oligarch_baseline",
    "oligarch_optimal",
    "final_gdp",
    "relative_gdp",
    "profit_gain",
    "gdp_loss",
    "inefficiency_ratio",
    "status",
)

STATUS_OPTIMAL = "optimal"
STATUS_NO_OLIGARCH = "no_oligarch"
STATUS_ECONOMY_REJECTED = "economy_rejected"

DEFAULT_DEPTHS = (1, 2, 3, 4, 5)
DEFAULT_GAMMAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    replications: int = 1000
    depths: tuple[int, ...] = DEFAULT_DEPTHS
    sizes: Optional[tuple[int, ...]] = None
    gammas: tuple[float, ...] = DEFAULT_GAMMAS
    master_seed: int = 0
    solver: SolverSettings = field(default_factory=SolverSettings)
    workers: int = 1
    gain_floor: float = DEFAULT_GAIN_FLOOR
    oligarch_attempts: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if self.sizes is not None:
            object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.depths or any(d < 1 for d in self.depths):
            raise ValueError("depths must be a non-empty list of positive integers")
        if not self.gammas or any(not 0 <= g <= 1 for g in self.gammas):
            raise ValueError("gammas must be a non-empty subset of [0, 1]")
        if self.sizes is not None and (not self.sizes or any(s < 1 for s in self.sizes)):
            raise ValueError("sizes must be a non-empty list of positive integers")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def sizes_for(self, depth: int) -> tuple[int, ...]:
        """Requested sizes, or 1..|M| − depth when none were given."""
        if self.sizes is not None:
            return self.sizes
        return tuple(range(1, self.generator.n_companies - depth + 1))


@dataclass(frozen=True)
class ExperimentRecord:
    replication: int
    economy_seed: int
    depth_requested: int
    depth_achieved: Optional[int]
    size: int
    gamma: float
    feasible: bool
    psi_star: Optional[float] = None
    oligarch_baseline: Optional[float] = None
    oligarch_optimal: Optional[float] = None
    final_gdp: Optional[float] = None
    relative_gdp: Optional[float] = None
    profit_gain: Optional[float] = None
    gdp_loss: Optional[float] = None
    inefficiency_ratio: Optional[float] = None
    status: str = STATUS_OPTIMAL

    @property
    def sort_key(self) -> tuple:
        return (self.replication, self.depth_requested, self.size, self.gamma)

    @property
    def solved(self) -> bool:
        return self.feasible and self.status == STATUS_OPTIMAL

    def to_row(self) -> dict:
        return asdict(self)


def derive_seed(*entropy: int) -> int:
    """A 64-bit seed determined by the given integers."""
    return int(np.random.SeedSequence([int(e) for e in entropy]).generate_state(1, np.uint64)[0])


def economy_seed(master_seed: int, replication: int) -> int:
    return derive_seed(master_seed, replication)


def oligarch_seed(seed: int, depth: int, size: int) -> int:
    return derive_seed(seed, depth, size)


def _cells(config: ExperimentConfig):
    for depth in sorted(config.depths):
        for size in sorted(config.sizes_for(depth)):
            yield depth, size


def _unsolved(replication, seed, depth, size, gammas, status, *, feasible, achieved=None):
    return [
        ExperimentRecord(replication, seed, depth, achieved, size, gamma, feasible, status=status)
        for gamma in gammas
    ]


def run_replication(config: ExperimentConfig, replication: int) -> list[ExperimentRecord]:
    """All records of one replication, in (depth, size, γ) order."""
    seed = economy_seed(config.master_seed, replication)
    gammas = sorted(config.gammas)
    records: list[ExperimentRecord] = []
    try:
        economy = generate_economy(config.generator, seed)
    except RejectionExhausted:
        for depth, size in _cells(config):
            records += _unsolved(replication, seed, depth, size, gammas, STATUS_ECONOMY_REJECTED, feasible=False)
        return records

    baseline = solve_global_optimum(economy, config.solver)
    for depth, size in _cells(config):
        records += _run_cell(config, economy, baseline, replication, seed, depth, size, gammas)
    return records


def _run_cell(
    config: ExperimentConfig,
    economy: Economy,
    baseline: PlanSolution,
    replication: int,
    seed: int,
    depth: int,
    size: int,
    gammas: list[float],
) -> list[ExperimentRecord]:
    if size > economy.n_companies:
        return _unsolved(replication, seed, depth, size, gammas, STATUS_NO_OLIGARCH, feasible=False)
    try:
        oligarch = generate_oligarch(
            economy, size, depth, oligarch_seed(seed, depth, size), max_attempts=config.oligarch_attempts
        )
    except NoFeasibleOligarch:
        return _unsolved(replication, seed, depth, size, gammas, STATUS_NO_OLIGARCH, feasible=False)

    if not baseline.optimal:
        status = f"{GLOBAL_STAGE}:{baseline.status.value}"
        return _unsolved(replication, seed, depth, size, gammas, status, feasible=True, achieved=oligarch.depth)

    records = []
    for gamma in gammas:
        try:
            result = run_scenario(
                economy, oligarch, gamma, config.solver, baseline=baseline, gain_floor=config.gain_floor
            )
        except StageFailure as exc:
            status = f"{exc.stage}:{exc.solution.status.value}"
            records.append(ExperimentRecord(replication, seed, depth, oligarch.depth, size, gamma, True, status=status))
            continue
        records.append(
            ExperimentRecord(
                replication=replication,
                economy_seed=seed,
                depth_requested=depth,
                depth_achieved=oligarch.depth,
                size=size,
                gamma=gamma,
                feasible=True,
                psi_star=result.psi_star,
                oligarch_baseline=result.oligarch_baseline_profit,
                oligarch_optimal=result.oligarch_optimal_profit,
                final_gdp=result.final_gdp,
                relative_gdp=result.relative_gdp,
                profit_gain=result.profit_gain,
                gdp_loss=result.gdp_loss,
                inefficiency_ratio=result.inefficiency_ratio,
            )
        )
    return records


def run_monte_carlo(
    config: ExperimentConfig, *, log: Optional[Callable[[str], None]] = None
) -> list[ExperimentRecord]:
    """
    Run every replication of `config` and return the records sorted by
    (replication, depth, size, γ). The worker count never changes the result.
    """
    replications = range(config.replications)
    records: list[ExperimentRecord] = []

    def collect(index: int, batch: list[ExperimentRecord]) -> None:
        records.extend(batch)
        if log:
            solved = sum(1 for r in batch if r.solved)
            log(f"Replication {index + 1}/{config.replications}: {solved}/{len(batch)} cells solved")

    if config.workers == 1:
        for replication in replications:
            collect(replication, run_replication(config, replication))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            batches = executor.map(run_replication, [config] * config.replications, replications)
            for replication, batch in zip(replications, batches):
                collect(replication, batch)

    records.sort(key=lambda r: r.sort_key)
    return records


class GridKind(Enum):
    RELATIVE_GDP_BY_DEPTH_SIZE = "relative_gdp_by_depth_size"
    RELATIVE_GDP_BY_SIZE_GAMMA = "relative_gdp_by_size_gamma"
    INEFFICIENCY_BY_DEPTH_SIZE = "inefficiency_by_depth_size"

    @property
    def metric(self) -> str:
        if self is GridKind.INEFFICIENCY_BY_DEPTH_SIZE:
            return "inefficiency_ratio"
        return "relative_gdp"


@dataclass(frozen=True, eq=False)
class AggregateGrid:
    """
    Per-cell statistics of one metric. Rows follow `row_axis` (depth or γ),
    columns are oligarch sizes; `percent` gives each size as a share of |M|.
    Cells without values have mean and std NaN and count 0.
    """

    kind: GridKind
    row_axis: str
    rows: list[float]
    sizes: list[int]
    percent: list[float]
    mean: np.ndarray
    std: np.ndarray
    count: np.ndarray
    count_undefined: np.ndarray
    count_failed: np.ndarray
    count_infeasible: np.ndarray
    fixed: dict = field(default_factory=dict)

    @property
    def metric(self) -> str:
        return self.kind.metric

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.sizes))

    def populated(self) -> int:
        return int(np.count_nonzero(self.count))

    def to_dict(self) -> dict:
        def cells(array, cast):
            return [[None if isinstance(v, float) and math.isnan(v) else cast(v) for v in row] for row in array.tolist()]

        return {
            "kind": self.kind.value,
            "metric": self.metric,
            "row_axis": self.row_axis,
            "rows": list(self.rows),
            "sizes": list(self.sizes),
            "percent": list(self.percent),
            "fixed": dict(self.fixed),
            "mean": cells(self.mean, float),
            "std": cells(self.std, float),
            "count": cells(self.count, int),
            "count_undefined": cells(self.count_undefined, int),
            "count_failed": cells(self.count_failed, int),
            "count_infeasible": cells(self.count_infeasible, int),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AggregateGrid":
        def floats(key):
            return np.array([[np.nan if v is None else float(v) for v in row] for row in data[key]], dtype=float).reshape(
                len(data["rows"]), len(data["sizes"])
            )

        def ints(key):
            return np.array(data[key], dtype=int).reshape(len(data["rows"]), len(data["sizes"]))

        return cls(
            kind=GridKind(data["kind"]),
            row_axis=data["row_axis"],
            rows=list(data["rows"]),
            sizes=[int(s) for s in data["sizes"]],
            percent=[float(p) for p in data["percent"]],
            mean=floats("mean"),
            std=floats("std"),
            count=ints("count"),
            count_undefined=ints("count_undefined"),
            count_failed=ints("count_failed"),
            count_infeasible=ints("count_infeasible"),
            fixed=dict(data.get("fixed", {})),
        )


def aggregate(
    records: Iterable[ExperimentRecord],
    kind: GridKind,
    *,
    gamma: float = 1.0,
    depth: Optional[int] = None,
    n_companies: Optional[int] = None,
) -> AggregateGrid:
    """
    Average one metric per cell over the solved records.

    Depth×size kinds keep the records at capture power `gamma`; the size×γ
    kind keeps the records at oligarch depth `depth`. Infeasible cells, failed
    solves and undefined inefficiency ratios are counted but never averaged.
    """
    n_companies = n_companies or GeneratorConfig().n_companies
    records = list(records)
    if kind is GridKind.RELATIVE_GDP_BY_SIZE_GAMMA:
        if depth is None:
            raise ValueError("a size-by-gamma grid needs a fixed depth")
        selected = [r for r in records if r.depth_requested == depth]
        row_axis, fixed = "gamma", {"depth": depth}

        def row_of(r):
            return r.gamma
    else:
        selected = [r for r in records if math.isclose(r.gamma, gamma, abs_tol=1e-12)]
        row_axis, fixed = "depth", {"gamma": gamma}

        def row_of(r):
            return r.depth_requested

    rows = sorted({row_of(r) for r in selected})
    sizes = sorted({r.size for r in selected})
    row_index = {v: i for i, v in enumerate(rows)}
    size_index = {s: j for j, s in enumerate(sizes)}
    shape = (len(rows), len(sizes))
    values: dict[tuple[int, int], list[float]] = {}
    count_undefined = np.zeros(shape, dtype=int)
    count_failed = np.zeros(shape, dtype=int)
    count_infeasible = np.zeros(shape, dtype=int)

    for r in selected:
        cell = (row_index[row_of(r)], size_index[r.size])
        if not r.feasible:
            count_infeasible[cell] += 1
        elif r.status != STATUS_OPTIMAL:
            count_failed[cell] += 1
        else:
            value = getattr(r, kind.metric)
            if value is None or (isinstance(value, float) and math.isnan(value)):
                count_undefined[cell] += 1
            else:
                values.setdefault(cell, []).append(float(value))

    mean = np.full(shape, np.nan)
    std = np.full(shape, np.nan)
    count = np.zeros(shape, dtype=int)
    for cell, cell_values in values.items():
        data = np.array(cell_values)
        mean[cell] = float(np.mean(data))
        std[cell] = float(np.std(data))
        count[cell] = len(cell_values)

    return AggregateGrid(
        kind=kind,
        row_axis=row_axis,
        rows=rows,
        sizes=sizes,
        percent=[s / n_companies for s in sizes],
        mean=mean,
        std=std,
        count=count,
        count_undefined=count_undefined,
        count_failed=count_failed,
        count_infeasible=count_infeasible,
        fixed=fixed,
    )


def standard_grids(
    records: Iterable[ExperimentRecord], config: ExperimentConfig
) -> dict[str, AggregateGrid]:
    """Every grid the report draws: two depth×size grids at γ = 1 and one size×γ grid per depth."""
    records = list(records)
    n_companies = config.generator.n_companies
    gamma = 1.0 if 1.0 in config.gammas else max(config.gammas)
    grids = {
        GridKind.RELATIVE_GDP_BY_DEPTH_SIZE.value: aggregate(
            records, GridKind.RELATIVE_GDP_BY_DEPTH_SIZE, gamma=gamma, n_companies=n_companies
        ),
        GridKind.INEFFICIENCY_BY_DEPTH_SIZE.value: aggregate(
            records, GridKind.INEFFICIENCY_BY_DEPTH_SIZE, gamma=gamma, n_companies=n_companies
        ),
    }
    for depth in sorted(config.depths):
        grids[f"{GridKind.RELATIVE_GDP_BY_SIZE_GAMMA.value}_depth{depth}"] = aggregate(
            records, GridKind.RELATIVE_GDP_BY_SIZE_GAMMA, depth=depth, n_companies=n_companies
        )
    return grids
