"""
Seeded generation of synthetic economies and oligarchs.

Goods are laid out in topological order: a company only buys from goods
with a lower index, which keeps β upper triangular and the graph acyclic by
construction. Global conditions (graph depth, room for a large deep
oligarch) are met by rejecting whole draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from economy import Economy, OligarchSpec, validate_economy
from production_graph import (
    consistency_graph,
    graph_depth,
    make_oligarch,
    oligarch_feasible,
    raw_distances,
)


GRID_TOLERANCE = 1e-9
MAX_BETA_DRAWS = 10000


class RejectionExhausted(RuntimeError):
    def __init__(self, attempts: int, reason: str):
        super().__init__(f"No admissible economy after {attempts} attempts (last rejection: {reason})")
        self.attempts = attempts
        self.reason = reason


class NoFeasibleOligarch(RuntimeError):
    def __init__(self, size: int, depth: int, attempts: int):
        super().__init__(f"Cannot place an oligarch of size {size} at depth {depth} (after {attempts} attempts)")
        self.size = size
        self.depth = depth
        self.attempts = attempts


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(count + 1), 10)


def _check_range(name: str, bounds, step: Optional[float] = None) -> None:
    lo, hi = bounds
    if lo > hi:
        raise ValueError(f"{name} is empty: [{lo}, {hi}]")
    if step is not None:
        if step <= 0:
            raise ValueError(f"{name} step must be positive")
        ratio = (hi - lo) / step
        if abs(ratio - round(ratio)) > 1e-6:
            raise ValueError(f"{name} step {step} does not divide [{lo}, {hi}]")


@dataclass(frozen=True)
class GeneratorConfig:
    n_raw: int = 2
    n_companies: int = 25
    beta_range: tuple[float, float] = (0.25, 0.6)
    beta_step: float = 0.05
    indegree: int = 2
    scale_range: tuple[float, float] = (0.5, 0.85)
    min_graph_depth: int = 5
    oligarch_feasibility: bool = True
    feasibility_size: int = 12
    feasibility_depth: int = 3
    alpha_range: tuple[float, float] = (1.1, 1.6)
    alpha_step: float = 0.1
    price_base: float = 1.1
    max_attempts: int = 10000

    def __post_init__(self):
        # JSON hands ranges over as lists
        for name in ("beta_range", "scale_range", "alpha_range"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.n_raw < 1 or self.n_companies < 1:
            raise ValueError("an economy needs at least one raw good and one company")
        if self.indegree < 1:
            raise ValueError("indegree must be at least 1")
        _check_range("beta_range", self.beta_range, self.beta_step)
        _check_range("scale_range", self.scale_range)
        _check_range("alpha_range", self.alpha_range, self.alpha_step)
        if self.beta_range[0] <= 0 or self.beta_range[1] >= 1:
            raise ValueError("beta_range must lie inside (0, 1)")
        if self.alpha_range[0] <= 0:
            raise ValueError("alpha_range must be positive")
        if self.price_base <= 0:
            raise ValueError("price_base must be positive")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")

    @property
    def n_goods(self) -> int:
        return self.n_raw + self.n_companies

    def beta_grid(self) -> np.ndarray:
        return _grid(*self.beta_range, self.beta_step)

    def alpha_grid(self) -> np.ndarray:
        return _grid(*self.alpha_range, self.alpha_step)


def price_schedule(base: float, k: int) -> float:
    """Price of good k: base ** k."""
    if base <= 0:
        raise ValueError("price base must be positive")
    return float(base) ** k


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def _draw_betas(config: GeneratorConfig, grid: np.ndarray, rng: np.random.Generator) -> Optional[np.ndarray]:
    lo, hi = config.scale_range
    for _ in range(MAX_BETA_DRAWS):
        values = grid[rng.integers(0, len(grid), size=config.indegree)]
        total = float(values.sum())
        if lo - GRID_TOLERANCE <= total <= hi + GRID_TOLERANCE:
            return values
    return None


def _draw_economy(config: GeneratorConfig, rng: np.random.Generator) -> tuple[Optional[Economy], str]:
    n = config.n_goods
    beta = np.zeros((n, n))
    beta_grid = config.beta_grid()
    for m in range(config.n_raw + 1, n + 1):
        if m - 1 < config.indegree:
            return None, f"company {m} has fewer than {config.indegree} possible suppliers"
        suppliers = np.sort(rng.choice(m - 1, size=config.indegree, replace=False))
        values = _draw_betas(config, beta_grid, rng)
        if values is None:
            return None, f"no beta combination of company {m} fits scale_range"
        beta[suppliers, m - 1] = values

    alpha_grid = config.alpha_grid()
    alpha = np.ones(n)
    alpha[config.n_raw :] = alpha_grid[rng.integers(0, len(alpha_grid), size=config.n_companies)]
    prices = np.array([price_schedule(config.price_base, k) for k in range(1, n + 1)])
    economy = Economy.from_arrays(config.n_raw, beta, alpha, prices)

    report = validate_economy(economy)
    if not report.ok:
        return None, "; ".join(report.violations)
    depth = graph_depth(economy)
    if depth < config.min_graph_depth:
        return None, f"graph depth {depth} below {config.min_graph_depth}"
    if config.oligarch_feasibility and not oligarch_feasible(
        economy, config.feasibility_size, config.feasibility_depth, exact=False
    ):
        return None, (
            f"no oligarch of size {config.feasibility_size} at depth ≥ {config.feasibility_depth}"
        )
    return economy, ""


def generate_economy(config: GeneratorConfig, seed: int) -> Economy:
    """
    Draw an economy that satisfies every condition of `config`.

    Each company picks `indegree` distinct suppliers among the lower-indexed
    goods and draws their β from the grid until the sum lands in
    scale_range. Technology levels are drawn from the α grid and prices
    follow price_base ** k. Raises RejectionExhausted after
    config.max_attempts rejected draws.
    """
    rng = _rng(seed)
    reason = ""
    for _ in range(config.max_attempts):
        economy, reason = _draw_economy(config, rng)
        if economy is not None:
            return economy
    raise RejectionExhausted(config.max_attempts, reason)


def grow_oligarch(economy: Economy, depth: int, rng: np.random.Generator) -> list[int]:
    """
    One growth sequence: a random company at raw-distance `depth`, then random
    consistency-graph neighbours at raw-distance ≥ depth until none are left.
    Every prefix of the sequence is an admissible oligarch of depth `depth`.
    """
    distances = raw_distances(economy)
    candidates = [m for m in economy.companies if distances.get(m, -1) >= depth]
    seeds = [m for m in candidates if distances[m] == depth]
    if not seeds:
        return []
    graph = consistency_graph(economy, candidates)
    start = seeds[int(rng.integers(len(seeds)))]
    order = [start]
    chosen = {start}
    frontier = sorted(graph.neighbors(start))
    while frontier:
        picked = frontier[int(rng.integers(len(frontier)))]
        order.append(picked)
        chosen.add(picked)
        frontier = sorted((set(frontier) | set(graph.neighbors(picked))) - chosen)
    return order


def generate_oligarch(
    economy: Economy, size: int, depth: int, seed: int, *, max_attempts: int = 1000
) -> OligarchSpec:
    if size < 1 or size > economy.n_companies:
        raise ValueError(f"oligarch size must be in 1..{economy.n_companies}, got {size}")
    if depth < 1:
        raise ValueError(f"oligarch depth must be at least 1, got {depth}")
    if not oligarch_feasible(economy, size, depth):
        raise NoFeasibleOligarch(size, depth, 0)
    rng = _rng(seed)
    for _ in range(max_attempts):
        grown = grow_oligarch(economy, depth, rng)
        if len(grown) >= size:
            return make_oligarch(economy, grown[:size])
    raise NoFeasibleOligarch(size, depth, max_attempts)
