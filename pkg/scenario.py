from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from economy import Economy, OligarchSpec, total_value_added
from solver import (
    CaptureContext,
    PlanSolution,
    SolverSettings,
    solve_adaptation_stage,
    solve_global_optimum,
    solve_oligarch_stage,
)


DEFAULT_GAIN_FLOOR = 1e-4

GLOBAL_STAGE = "global"
OLIGARCH_STAGE = "oligarch"
ADAPTATION_STAGE = "adaptation"


class StageFailure(RuntimeError):
    def __init__(self, stage: str, solution: PlanSolution):
        super().__init__(
            f"{stage} stage ended with status {solution.status.value} "
            f"after {solution.iterations} Newton steps (KKT residual {solution.kkt_residual:.2e})"
        )
        self.stage = stage
        self.solution = solution


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    psi_star: float
    oligarch_baseline_profit: float
    oligarch_optimal_profit: float
    final_gdp: float
    relative_gdp: float
    profit_gain: float
    gdp_loss: float
    inefficiency_ratio: Optional[float]
    gamma: float
    oligarch: OligarchSpec
    stages: dict[str, PlanSolution] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "members": sorted(self.oligarch.members),
            "depth": self.oligarch.depth,
            "gamma": self.gamma,
            "psi_star": self.psi_star,
            "oligarch_baseline_profit": self.oligarch_baseline_profit,
            "oligarch_optimal_profit": self.oligarch_optimal_profit,
            "final_gdp": self.final_gdp,
            "relative_gdp": self.relative_gdp,
            "profit_gain": self.profit_gain,
            "gdp_loss": self.gdp_loss,
            "inefficiency_ratio": self.inefficiency_ratio,
        }


def inefficiency_ratio(gdp_loss: float, profit_gain: float, gain_floor: float = DEFAULT_GAIN_FLOOR) -> Optional[float]:
    """GDP given up per unit of oligarch gain; None when the gain is below gain_floor."""
    if gain_floor <= 0:
        raise ValueError("gain_floor must be positive")
    if profit_gain < gain_floor:
        return None
    return gdp_loss / profit_gain


def _require_optimal(stage: str, solution: PlanSolution) -> PlanSolution:
    if not solution.optimal or not math.isfinite(solution.objective):
        raise StageFailure(stage, solution)
    return solution


def run_scenario(
    economy: Economy,
    oligarch: OligarchSpec,
    gamma: float,
    settings: Optional[SolverSettings] = None,
    *,
    baseline: Optional[PlanSolution] = None,
    gain_floor: float = DEFAULT_GAIN_FLOOR,
    log: Optional[Callable[[str], None]] = None,
) -> ScenarioResult:
    """
    Run the three stages for one (economy, oligarch, γ).

    The no-oligarch optimum is solved first unless `baseline` is passed in
    (experiments share it across every oligarch of an economy). The oligarch
    then maximizes its own value added under the capture caps, and finally
    the rest of the economy adapts around the oligarch's profit.

    Raises:
        StageFailure: A stage did not report an optimal plan.
    """
    settings = settings or SolverSettings()
    if baseline is None:
        baseline = solve_global_optimum(economy, settings)
    _require_optimal(GLOBAL_STAGE, baseline)
    psi_star = baseline.objective
    baseline_profit = total_value_added(economy, baseline.plan, oligarch).oligarch_total

    if log:
        log(f"Oligarch {sorted(oligarch.members)} (depth {oligarch.depth}), gamma {gamma:g}: psi* = {psi_star:.4f}")
    context = CaptureContext(baseline, gamma, oligarch)
    captured = _require_optimal(OLIGARCH_STAGE, solve_oligarch_stage(economy, context, settings))
    adapted = _require_optimal(
        ADAPTATION_STAGE,
        solve_adaptation_stage(
            economy, oligarch, captured.objective, settings,
            baseline=baseline, gamma=gamma, stage_plan=captured.plan,
        ),
    )

    final_gdp = adapted.objective
    profit_gain = captured.objective - baseline_profit
    gdp_loss = psi_star - final_gdp
    result = ScenarioResult(
        psi_star=psi_star,
        oligarch_baseline_profit=baseline_profit,
        oligarch_optimal_profit=captured.objective,
        final_gdp=final_gdp,
        relative_gdp=final_gdp / psi_star,
        profit_gain=profit_gain,
        gdp_loss=gdp_loss,
        inefficiency_ratio=inefficiency_ratio(gdp_loss, profit_gain, gain_floor),
        gamma=gamma,
        oligarch=oligarch,
        stages={GLOBAL_STAGE: baseline, OLIGARCH_STAGE: captured, ADAPTATION_STAGE: adapted},
    )
    if log:
        log(
            f"  oligarch profit {baseline_profit:.4f} -> {captured.objective:.4f}, "
            f"GDP {psi_star:.4f} -> {final_gdp:.4f} (relative {result.relative_gdp:.4f})"
        )
    return result
