"""
The flow problems of the production chain and their stage solvers.

Every objective and constraint in these problems has the same shape

    constant + Σ_m w_m y_m(x) − Σ_e c_e x_e

with y_m the Cobb-Douglas output of good m, so a FlowProblem stores them as
rows of (weights, costs, constant) and evaluates them together. Variables
are the flows x_km on links with β_km > 0 that the stage lets move; all other
flows are held at a fixed base matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from barrier import (
    BarrierMethod,
    BarrierProblem,
    ConstraintEvaluation,
    Evaluation,
    Multipliers,
    SolveStatus,
    kkt_residual as barrier_kkt_residual,
)
from economy import Economy, OligarchSpec, ProductionPlan, production_output, require_valid, total_value_added

# Share of the outside value added in the feasibility-phase objective.
PHASE_OUTSIDE_WEIGHT = 1e-3


class ProblemKind(Enum):
    GLOBAL = "global"
    OLIGARCH = "oligarch"
    ADAPTATION = "adaptation"
    FEASIBILITY = "feasibility"


@dataclass(frozen=True)
class SolverSettings:
    epsilon: float = 1e-6
    kkt_tolerance: float = 1e-6
    max_iterations: int = 500
    barrier_decrease: float = 0.2
    cap_in_adaptation: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.barrier_decrease < 1:
            raise ValueError("barrier_decrease must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class PlanSolution:
    plan: ProductionPlan
    objective: float
    kkt_residual: float
    iterations: int
    status: SolveStatus
    multipliers: Optional[Multipliers] = None

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass(frozen=True, eq=False)
class CaptureContext:
    """The no-oligarch optimum, the capture power γ and the oligarch."""

    baseline: PlanSolution
    gamma: float
    oligarch: OligarchSpec

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not self.baseline.optimal:
            raise ValueError(f"baseline plan is not optimal ({self.baseline.status.value})")


@dataclass
class _Row:
    label: str
    owner: Optional[int]
    weights: np.ndarray
    costs: np.ndarray
    constant: float


class FlowProblem(BarrierProblem):
    """A concave flow problem in the barrier method's terms."""

    def __init__(
        self,
        economy: Economy,
        kind: ProblemKind,
        variables: list[tuple[int, int]],
        base_flows: np.ndarray,
        objective_row: _Row,
        rows: list[_Row],
        epsilon: float,
    ):
        self.economy = economy
        self.kind = kind
        self.variables = variables
        self.epsilon = epsilon
        self._base = np.array(base_flows, dtype=float)
        self._rows_idx = np.array([k - 1 for k, _ in variables], dtype=int)
        self._cols_idx = np.array([m - 1 for _, m in variables], dtype=int)
        self._base[self._rows_idx, self._cols_idx] = 0.0
        self._beta = economy.beta[self._rows_idx, self._cols_idx]
        self._same_consumer = self._cols_idx[:, None] == self._cols_idx[None, :]
        self._links = economy.beta > 0
        self._objective = objective_row
        self.rows = rows
        n_goods, n_vars = economy.n_goods, len(variables)
        if rows:
            self._weights = np.vstack([r.weights for r in rows])
            self._costs = np.vstack([r.costs for r in rows])
        else:
            self._weights = np.zeros((0, n_goods))
            self._costs = np.zeros((0, n_vars))
        self._constants = np.array([r.constant for r in rows], dtype=float)

    @property
    def size(self) -> int:
        return len(self.variables)

    @property
    def lower_bound(self) -> float:
        return self.epsilon

    @property
    def num_constraints(self) -> int:
        return len(self.rows)

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.rows]

    def flows(self, x: np.ndarray) -> np.ndarray:
        flows = self._base.copy()
        flows[self._rows_idx, self._cols_idx] = x
        return flows

    def variables_of(self, flows: np.ndarray) -> np.ndarray:
        return np.asarray(flows, dtype=float)[self._rows_idx, self._cols_idx].copy()

    def plan(self, x: np.ndarray) -> ProductionPlan:
        return ProductionPlan.from_flows(self.economy, self.flows(x))

    def _outputs(self, x: np.ndarray) -> np.ndarray:
        factors = np.power(self.flows(x), self.economy.beta, out=np.ones(self._base.shape), where=self._links)
        return self.economy.alpha * np.prod(factors, axis=0)

    def objective(self, x: np.ndarray, derivatives: bool = True) -> Evaluation:
        row = self._objective
        y = self._outputs(x)
        value = row.constant + float(row.weights @ y) - float(row.costs @ x)
        if not derivatives:
            return Evaluation(value)
        scaled = row.weights[self._cols_idx] * y[self._cols_idx]
        ratio = self._beta / x
        gradient = scaled * ratio - row.costs
        return Evaluation(value, gradient, self._form_hessian(scaled, ratio, x))

    def constraints(self, x: np.ndarray, derivatives: bool = True) -> ConstraintEvaluation:
        y = self._outputs(x)
        values = self._constants + self._weights @ y - self._costs @ x
        if not derivatives:
            return ConstraintEvaluation(values)
        ratio = self._beta / x
        scaled = self._weights[:, self._cols_idx] * y[self._cols_idx]
        jacobian = scaled * ratio - self._costs
        zero = np.zeros((self.size, self.size))
        hessians = [
            self._form_hessian(scaled[i], ratio, x) if np.any(scaled[i]) else zero
            for i in range(self.num_constraints)
        ]
        return ConstraintEvaluation(values, jacobian, hessians)

    def _form_hessian(self, scaled: np.ndarray, ratio: np.ndarray, x: np.ndarray) -> np.ndarray:
        hessian = self._same_consumer * np.outer(scaled * ratio, ratio)
        hessian[np.diag_indices_from(hessian)] -= scaled * self._beta / x**2
        return hessian

    def interior_start(self) -> Optional[np.ndarray]:
        """
        A strictly feasible point, built supplier by supplier in index order.

        Unconstrained suppliers ship max(1, 2ε) on every link. A supplier that owns constraints
        (its availability or its capture cap) splits what the tightest of them
        leaves so that each consumer gets more than ε and some slack remains.
        Returns None when a supplier has no room for ε per consumer.
        """
        x = np.zeros(self.size)
        eps = self.epsilon
        suppliers = sorted(set(int(k) + 1 for k in self._rows_idx) | {r.owner for r in self.rows if r.owner})
        for k in suppliers:
            outgoing = np.flatnonzero(self._rows_idx == k - 1)
            owned = [i for i, r in enumerate(self.rows) if r.owner == k]
            if owned:
                values = self.constraints(x, derivatives=False).values
                limit = float(np.min(values[owned]))
                n = len(outgoing)
                if limit <= n * eps:
                    return None
                share = eps + (limit - n * eps) / (n + 1)
            else:
                share = max(1.0, 2 * eps)
            x[outgoing] = share
        return x


def _zeros_row(economy: Economy, n_vars: int, label: str, owner: Optional[int] = None) -> _Row:
    return _Row(label, owner, np.zeros(economy.n_goods), np.zeros(n_vars), 0.0)


def _value_added_row(economy: Economy, variables, members, label: str, constant: float = 0.0) -> _Row:
    """Σ_{m ∈ members} ρ_m over the variable inputs, plus a constant."""
    row = _zeros_row(economy, len(variables), label)
    for m in members:
        row.weights[m - 1] = economy.prices[m - 1]
    for e, (k, m) in enumerate(variables):
        if m in members:
            row.costs[e] = economy.prices[k - 1]
    row.constant = constant
    return row


def _balance_rows(economy, variables, companies, *, reserve=None) -> list[_Row]:
    """y_k − Σ variable out-flows of k − reserve(k) ≥ 0 for each company that ships anything."""
    rows = []
    for k in companies:
        out_vars = [e for e, (j, _) in enumerate(variables) if j == k]
        held_back = reserve(k) if reserve else 0.0
        if not out_vars and held_back == 0:
            continue
        row = _zeros_row(economy, len(variables), f"balance[{k}]", owner=k)
        row.weights[k - 1] = 1.0
        row.costs[out_vars] = 1.0
        row.constant = -held_back
        rows.append(row)
    return rows


def capture_limits(economy: Economy, context: CaptureContext, epsilon: float) -> dict[int, float]:
    """
    Upper bound on what the oligarch may buy from each outside supplier:
    γ y*_k + (1 − γ) Σ_{m ∈ O} x*_km, never more than y*_k less ε for every
    outside consumer of k.
    """
    oligarch = context.oligarch
    baseline = context.baseline.plan
    gamma = context.gamma
    limits = {}
    for k in oligarch.complement(economy):
        to_oligarch = [m for m in economy.consumers(k) if m in oligarch]
        if not to_oligarch:
            continue
        outside = len(economy.consumers(k)) - len(to_oligarch)
        captured = sum(baseline.flow(k, m) for m in to_oligarch)
        cap = gamma * baseline.output(k) + (1 - gamma) * captured
        limits[k] = min(cap, baseline.output(k) - epsilon * outside)
    return limits


def _cap_rows(economy, variables, limits: dict[int, float], oligarch: OligarchSpec, slack: float) -> list[_Row]:
    rows = []
    for k, limit in sorted(limits.items()):
        row = _zeros_row(economy, len(variables), f"cap[{k}]", owner=k)
        for e, (j, m) in enumerate(variables):
            if j == k and m in oligarch:
                row.costs[e] = 1.0
        row.constant = limit + slack
        rows.append(row)
    return rows


def build_problem(
    economy: Economy,
    kind: ProblemKind,
    settings: SolverSettings,
    *,
    oligarch: Optional[OligarchSpec] = None,
    context: Optional[CaptureContext] = None,
    oligarch_profit: Optional[float] = None,
) -> FlowProblem:
    """
    Assemble one of the flow problems.

    GLOBAL needs nothing extra; OLIGARCH needs `context`; ADAPTATION needs
    `oligarch` and `oligarch_profit` (plus `context` when caps bind in
    adaptation); FEASIBILITY maximizes the oligarch's value added, plus a
    PHASE_OUTSIDE_WEIGHT share of the outside value added, under the
    adaptation constraints without the profit floor.
    """
    eps = settings.epsilon
    companies = list(economy.companies)
    n = economy.n_goods

    if kind is ProblemKind.GLOBAL:
        variables = economy.edges()
        objective = _value_added_row(economy, variables, set(companies), "psi")
        rows = _balance_rows(economy, variables, companies)
        return FlowProblem(economy, kind, variables, np.zeros((n, n)), objective, rows, eps)

    if kind is ProblemKind.OLIGARCH:
        if context is None:
            raise ValueError("oligarch stage needs a capture context")
        members = context.oligarch.members
        base = np.array(context.baseline.plan.flows, dtype=float)
        variables = [(k, m) for k, m in economy.edges() if m in members]

        def reserve(k):
            return eps * sum(1 for m in economy.consumers(k) if m not in members)

        objective = _value_added_row(economy, variables, members, "psi_oligarch")
        rows = _balance_rows(economy, variables, sorted(members), reserve=reserve)
        rows += _cap_rows(economy, variables, capture_limits(economy, context, eps), context.oligarch, 0.0)
        rows.sort(key=lambda r: (r.owner, r.label))
        return FlowProblem(economy, kind, variables, base, objective, rows, eps)

    if kind in (ProblemKind.ADAPTATION, ProblemKind.FEASIBILITY):
        if oligarch is None:
            raise ValueError(f"{kind.value} problem needs an oligarch")
        members = oligarch.members
        outsiders = set(oligarch.complement(economy))
        variables = economy.edges()
        rows = _balance_rows(economy, variables, companies)
        if settings.cap_in_adaptation:
            if context is None:
                raise ValueError("capture caps in adaptation need a capture context")
            rows += _cap_rows(economy, variables, capture_limits(economy, context, eps), oligarch, eps)
            rows.sort(key=lambda r: (r.owner, r.label))
        if kind is ProblemKind.FEASIBILITY:
            objective = _value_added_row(economy, variables, members, "psi_oligarch")
            outside = _value_added_row(economy, variables, outsiders, "psi_outside")
            objective.weights += PHASE_OUTSIDE_WEIGHT * outside.weights
            objective.costs += PHASE_OUTSIDE_WEIGHT * outside.costs
        else:
            if oligarch_profit is None:
                raise ValueError("adaptation problem needs the oligarch profit")
            objective = _value_added_row(economy, variables, outsiders, "psi_outside", float(oligarch_profit))
            floor = _value_added_row(economy, variables, members, "profit_floor", -(float(oligarch_profit) - eps))
            rows.append(floor)
        return FlowProblem(economy, kind, variables, np.zeros((n, n)), objective, rows, eps)

    raise ValueError(f"Unknown problem kind: {kind}")


def kkt_residual(
    economy: Economy,
    kind: ProblemKind,
    plan: ProductionPlan,
    multipliers: Multipliers,
    settings: Optional[SolverSettings] = None,
    **problem_args,
) -> float:
    """Max-norm KKT residual of `plan` for the named problem (see build_problem for problem_args)."""
    settings = settings or SolverSettings()
    problem = build_problem(economy, kind, settings, **problem_args)
    return barrier_kkt_residual(problem, problem.variables_of(plan.flows), multipliers)


def _method(settings: SolverSettings, log) -> BarrierMethod:
    return BarrierMethod(
        kkt_tolerance=settings.kkt_tolerance,
        max_iterations=settings.max_iterations,
        barrier_decrease=settings.barrier_decrease,
        log=log,
    )


def _infeasible(problem: FlowProblem, iterations: int = 0) -> PlanSolution:
    plan = problem.plan(np.full(problem.size, 2 * problem.epsilon))
    return PlanSolution(plan, float("nan"), float("inf"), iterations, SolveStatus.INFEASIBLE)


def _solution(problem, result, objective: Callable[[ProductionPlan], float], iterations: int) -> PlanSolution:
    plan = problem.plan(result.x)
    return PlanSolution(
        plan=plan,
        objective=objective(plan),
        kkt_residual=result.kkt_residual,
        iterations=iterations,
        status=result.status,
        multipliers=result.multipliers,
    )


def _report(log, name: str, solution: PlanSolution) -> None:
    if log:
        log(
            f"{name}: {solution.status.value} after {solution.iterations} Newton steps, "
            f"objective {solution.objective:.4f}, KKT residual {solution.kkt_residual:.2e}"
        )


def solve_global_optimum(
    economy: Economy,
    settings: Optional[SolverSettings] = None,
    *,
    log: Optional[Callable[[str], None]] = None,
) -> PlanSolution:
    """Maximize total value added ψ under the availability constraints."""
    settings = settings or SolverSettings()
    require_valid(economy)
    problem = build_problem(economy, ProblemKind.GLOBAL, settings)
    start = problem.interior_start()
    if start is None:
        return _infeasible(problem)
    result = _method(settings, log).maximize(problem, start)
    if result.status is SolveStatus.INFEASIBLE:
        return _infeasible(problem)
    solution = _solution(problem, result, lambda plan: total_value_added(economy, plan).total, result.iterations)
    _report(log, "global optimum", solution)
    return solution


def solve_oligarch_stage(
    economy: Economy,
    context: CaptureContext,
    settings: Optional[SolverSettings] = None,
    *,
    log: Optional[Callable[[str], None]] = None,
) -> PlanSolution:
    """
    Maximize the oligarch's value added ψ_O over the flows into its companies.

    Flows into outside companies stay at the baseline. Purchases from an
    outside supplier are capped by the capture power γ; the oligarch's own
    goods must cover its internal use and leave ε for every outside buyer.
    """
    settings = settings or SolverSettings()
    problem = build_problem(economy, ProblemKind.OLIGARCH, settings, context=context)
    start = problem.interior_start()
    if start is None:
        return _infeasible(problem)
    result = _method(settings, log).maximize(problem, start)
    if result.status is SolveStatus.INFEASIBLE:
        return _infeasible(problem)
    oligarch = context.oligarch
    solution = _solution(
        problem,
        result,
        lambda plan: total_value_added(economy, plan, oligarch).oligarch_total,
        result.iterations,
    )
    _report(log, "oligarch stage", solution)
    return solution


def adapted_start(problem: FlowProblem, oligarch: OligarchSpec, plan: ProductionPlan) -> Optional[np.ndarray]:
    """
    The oligarch-stage plan made consistent for the whole economy.

    Flows into the oligarch are kept, so ψ_O is unchanged. Going down the
    chain in index order, a company whose output no longer covers its sales
    has its outside sales reset to an even split of what the oligarch
    leaves, each above ε. Returns None when that is impossible or the
    result is not strictly feasible for `problem`.
    """
    economy = problem.economy
    eps = problem.epsilon
    flows = np.array(plan.flows, dtype=float)
    for k in economy.companies:
        consumers = economy.consumers(k)
        outside = [m - 1 for m in consumers if m not in oligarch]
        if not outside:
            continue
        committed = sum(flows[k - 1, m - 1] for m in consumers if m in oligarch)
        room = production_output(economy, flows, k) - committed
        if room <= eps * len(outside):
            return None
        if flows[k - 1, outside].sum() < room:
            continue
        flows[k - 1, outside] = eps + (room - eps * len(outside)) / (len(outside) + 1)
    x = problem.variables_of(flows)
    return x if problem.strictly_feasible(x) else None


def solve_adaptation_stage(
    economy: Economy,
    oligarch: Optional[OligarchSpec],
    oligarch_profit: float,
    settings: Optional[SolverSettings] = None,
    *,
    baseline: Optional[PlanSolution] = None,
    gamma: Optional[float] = None,
    stage_plan: Optional[ProductionPlan] = None,
    log: Optional[Callable[[str], None]] = None,
) -> PlanSolution:
    """
    Let the rest of the economy adapt once the oligarch has secured its profit.

    Maximizes the outside companies' value added over all flows, keeping
    ψ_O ≥ oligarch_profit − ε and every company's availability constraint.
    Without an oligarch this is the global problem.

    The start is the oligarch-stage plan with outside sales trimmed to fit
    (see adapted_start) when that is strictly feasible, else the baseline.
    When the start does not meet the profit floor, a feasibility phase
    raises ψ_O first; if even that cannot reach the floor the status is
    INFEASIBLE.

    Args:
        baseline: The no-oligarch optimum; also needed, together with gamma,
                  when settings.cap_in_adaptation keeps the capture caps in force.
        stage_plan: The plan the oligarch stage ended at.
    """
    settings = settings or SolverSettings()
    if oligarch is None or oligarch.size == 0:
        return solve_global_optimum(economy, settings, log=log)

    context = None
    if settings.cap_in_adaptation:
        if baseline is None or gamma is None:
            raise ValueError("cap_in_adaptation needs the baseline plan and gamma")
        context = CaptureContext(baseline, gamma, oligarch)

    problem = build_problem(
        economy, ProblemKind.ADAPTATION, settings,
        oligarch=oligarch, context=context, oligarch_profit=oligarch_profit,
    )
    method = _method(settings, log)
    start = adapted_start(problem, oligarch, stage_plan) if stage_plan is not None else None
    if start is None and baseline is not None:
        start = problem.variables_of(baseline.plan.flows)
    iterations = 0

    if start is None or not problem.strictly_feasible(start):
        phase = build_problem(economy, ProblemKind.FEASIBILITY, settings, oligarch=oligarch, context=context)
        if start is None or not phase.strictly_feasible(start):
            start = phase.interior_start()
            if start is None:
                return _infeasible(problem)
        floor_index = problem.num_constraints - 1

        def floor_met(x: np.ndarray) -> bool:
            return bool(problem.constraints(x, derivatives=False).values[floor_index] > 0)

        if not floor_met(start):
            found = method.maximize(phase, start, stop=floor_met)
            iterations += found.iterations
            if not found.stopped:
                if found.status is SolveStatus.ITERATION_LIMIT:
                    return PlanSolution(phase.plan(found.x), float("nan"), found.kkt_residual,
                                        iterations, SolveStatus.ITERATION_LIMIT)
                if log:
                    peak = total_value_added(economy, phase.plan(found.x), oligarch).oligarch_total
                    log(f"adaptation stage: oligarch value added peaks at {peak:.4f}, "
                        f"below the floor {oligarch_profit - settings.epsilon:.4f}")
                return _infeasible(problem, iterations)
            start = found.x
        if not problem.strictly_feasible(start):
            return _infeasible(problem, iterations)

    result = method.maximize(problem, start)
    if result.status is SolveStatus.INFEASIBLE:
        return _infeasible(problem, iterations)
    solution = _solution(
        problem,
        result,
        lambda plan: total_value_added(economy, plan).total,
        iterations + result.iterations,
    )
    _report(log, "adaptation stage", solution)
    return solution
