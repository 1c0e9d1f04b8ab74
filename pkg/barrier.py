"""
Primal log-barrier interior-point method for smooth concave maximization.

A problem maximizes a concave f(x) subject to concave constraints g_i(x) ≥ 0
and the simple bounds x ≥ lower_bound. For a barrier weight t the method
minimizes

    φ_t(x) = −t f(x) − Σ log g_i(x) − Σ log(x_j − lower_bound)

with damped Newton steps and a backtracking line search, then raises t by
1 / barrier_decrease. The minimizer of φ_t gives dual estimates
λ_i = 1 / (t g_i) and μ_j = 1 / (t (x_j − lower_bound)). Near an active
constraint g_i is tiny and 1 / (t g_i) loses digits, so the estimates are
also refitted by least squares against stationarity; whichever set has the
smaller KKT residual is kept and drives the stopping test.

The complementarity terms λ_i g_i are part of the residual, so a residual
below tolerance already bounds the duality gap. Once raising t stops
improving the residual the best centered point is returned.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.linalg


INITIAL_BARRIER_WEIGHT = 1.0
MAX_BARRIER_WEIGHT = 1e14
NEWTON_TOLERANCE = 1e-8
ARMIJO_SLOPE = 0.01
STEP_SHRINK = 0.5
MAX_LINE_SEARCH_STEPS = 60
ROUNDOFF = 1e-13
MAX_RISING_ROUNDS = 3


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    ITERATION_LIMIT = "iteration_limit"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Objective value with optional gradient and Hessian."""
    value: float
    gradient: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ConstraintEvaluation:
    """Values g(x), Jacobian (rows per constraint) and per-constraint Hessians."""
    values: np.ndarray
    jacobian: Optional[np.ndarray] = None
    hessians: Optional[list[np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class Multipliers:
    constraints: np.ndarray
    bounds: np.ndarray


@dataclass(frozen=True, eq=False)
class BarrierResult:
    x: np.ndarray
    objective: float
    status: SolveStatus
    iterations: int
    multipliers: Multipliers
    kkt_residual: float
    stopped: bool = False


class BarrierProblem(ABC):
    """
    Contract for problems the barrier method can solve.

    Implementations must provide:
    - the number of variables and their common lower bound
    - the concave objective with first and second derivatives
    - the concave inequality constraints g_i(x) ≥ 0 with derivatives
    """

    @property
    @abstractmethod
    def size(self) -> int:
        pass

    @property
    @abstractmethod
    def lower_bound(self) -> float:
        pass

    @property
    @abstractmethod
    def num_constraints(self) -> int:
        pass

    @abstractmethod
    def objective(self, x: np.ndarray, derivatives: bool = True) -> Evaluation:
        pass

    @abstractmethod
    def constraints(self, x: np.ndarray, derivatives: bool = True) -> ConstraintEvaluation:
        pass

    def strictly_feasible(self, x: np.ndarray) -> bool:
        if x.shape != (self.size,) or not np.all(np.isfinite(x)):
            return False
        if np.any(x <= self.lower_bound):
            return False
        return bool(np.all(self.constraints(x, derivatives=False).values > 0))


def kkt_residual(problem: BarrierProblem, x: np.ndarray, multipliers: Multipliers) -> float:
    """
    Max-norm of the KKT residuals for maximizing f subject to g ≥ 0, x ≥ lb:
    stationarity ∇f + Jᵀλ + μ = 0, primal and dual feasibility, and
    complementary slackness λ_i g_i = 0, μ_j (x_j − lb) = 0.
    """
    x = np.asarray(x, dtype=float)
    obj = problem.objective(x)
    cons = problem.constraints(x)
    lam = np.asarray(multipliers.constraints, dtype=float)
    mu = np.asarray(multipliers.bounds, dtype=float)
    slack = x - problem.lower_bound

    stationarity = obj.gradient + cons.jacobian.T @ lam + mu
    parts = [np.max(np.abs(stationarity), initial=0.0)]
    parts.append(np.max(-cons.values, initial=0.0))
    parts.append(np.max(-slack, initial=0.0))
    parts.append(np.max(-lam, initial=0.0))
    parts.append(np.max(-mu, initial=0.0))
    parts.append(np.max(np.abs(lam * cons.values), initial=0.0))
    parts.append(np.max(np.abs(mu * slack), initial=0.0))
    return float(max(parts))


class BarrierMethod:
    def __init__(
        self,
        *,
        kkt_tolerance: float = 1e-6,
        max_iterations: int = 500,
        barrier_decrease: float = 0.2,
        log: Optional[Callable[[str], None]] = None,
    ):
        if not 0 < barrier_decrease < 1:
            raise ValueError("barrier_decrease must be in (0, 1)")
        self.kkt_tolerance = kkt_tolerance
        self.max_iterations = max_iterations
        self.barrier_decrease = barrier_decrease
        self.log = log

    def maximize(
        self,
        problem: BarrierProblem,
        x0: np.ndarray,
        *,
        stop: Optional[Callable[[np.ndarray], bool]] = None,
    ) -> BarrierResult:
        """
        Run the barrier method from a strictly feasible x0.

        Args:
            problem: The problem to maximize.
            x0: Starting point with x0 > lower_bound and g(x0) > 0.
            stop: Optional predicate checked after every Newton step; when it
                  returns True the current point is returned immediately.

        Returns:
            BarrierResult with status INFEASIBLE if x0 is not strictly feasible.
        """
        x = np.array(x0, dtype=float)
        weight = INITIAL_BARRIER_WEIGHT
        if not problem.strictly_feasible(x):
            return self._result(problem, x, weight, SolveStatus.INFEASIBLE, 0)
        if problem.size == 0:
            return self._result(problem, x, MAX_BARRIER_WEIGHT, SolveStatus.OPTIMAL, 0)

        iterations = 0
        best: Optional[tuple[np.ndarray, float, float]] = None
        rising = 0
        while True:
            x, iterations, outcome = self._center(problem, x, weight, iterations, stop)
            if outcome == "stopped":
                return self._result(problem, x, weight, SolveStatus.OPTIMAL, iterations, stopped=True)
            if outcome == "limit":
                return self._result(problem, x, weight, SolveStatus.ITERATION_LIMIT, iterations)

            residual = kkt_residual(problem, x, self._multipliers(problem, x, weight))
            if self.log:
                self.log(f"barrier weight {weight:.3g}: {iterations} Newton steps, KKT residual {residual:.3e}")
            if residual <= self.kkt_tolerance:
                return self._result(problem, x, weight, SolveStatus.OPTIMAL, iterations)
            if best is None or residual < best[2]:
                best, rising = (x, weight, residual), 0
            else:
                rising += 1
            if rising >= MAX_RISING_ROUNDS or weight >= MAX_BARRIER_WEIGHT:
                best_x, best_weight, _ = best
                return self._result(problem, best_x, best_weight, SolveStatus.ITERATION_LIMIT, iterations)
            weight /= self.barrier_decrease

    def _center(self, problem, x, weight, iterations, stop):
        while True:
            if iterations >= self.max_iterations:
                return x, iterations, "limit"
            gradient, hessian = self._barrier_derivatives(problem, x, weight)
            step = _newton_step(hessian, gradient)
            decrement_sq = -float(gradient @ step)
            if not np.isfinite(decrement_sq) or decrement_sq < 0:
                return x, iterations, "stalled"
            if decrement_sq / 2 <= NEWTON_TOLERANCE:
                return x, iterations, "centered"
            candidate = self._line_search(problem, x, weight, step, -decrement_sq)
            if candidate is None:
                return x, iterations, "stalled"
            x = candidate
            iterations += 1
            if stop is not None and stop(x):
                return x, iterations, "stopped"

    def _barrier_value(self, problem: BarrierProblem, x: np.ndarray, weight: float) -> float:
        slack = x - problem.lower_bound
        if np.any(slack <= 0) or not np.all(np.isfinite(x)):
            return np.inf
        cons = problem.constraints(x, derivatives=False)
        if np.any(cons.values <= 0):
            return np.inf
        obj = problem.objective(x, derivatives=False)
        return -weight * obj.value - float(np.sum(np.log(cons.values))) - float(np.sum(np.log(slack)))

    def _barrier_derivatives(self, problem: BarrierProblem, x: np.ndarray, weight: float):
        obj = problem.objective(x)
        cons = problem.constraints(x)
        slack = x - problem.lower_bound
        inv_g = 1.0 / cons.values
        gradient = -weight * obj.gradient - cons.jacobian.T @ inv_g - 1.0 / slack
        hessian = -weight * obj.hessian + (cons.jacobian.T * inv_g**2) @ cons.jacobian
        hessian[np.diag_indices_from(hessian)] += 1.0 / slack**2
        for g_i, h_i in zip(cons.values, cons.hessians):
            hessian -= h_i / g_i
        return gradient, hessian

    def _line_search(self, problem, x, weight, step, slope):
        phi0 = self._barrier_value(problem, x, weight)
        roundoff = ROUNDOFF * max(1.0, abs(phi0))
        length = 1.0
        for _ in range(MAX_LINE_SEARCH_STEPS):
            candidate = x + length * step
            phi = self._barrier_value(problem, candidate, weight)
            if np.isfinite(phi) and phi <= phi0 + ARMIJO_SLOPE * length * slope + roundoff:
                return candidate
            length *= STEP_SHRINK
        return None

    def _multipliers(self, problem: BarrierProblem, x: np.ndarray, weight: float) -> Multipliers:
        cons = problem.constraints(x)
        slack = x - problem.lower_bound
        estimate = Multipliers(constraints=1.0 / (weight * cons.values), bounds=1.0 / (weight * slack))
        refined = _refit_multipliers(problem.objective(x).gradient, cons, slack, weight)
        if refined is None:
            return estimate
        return min((estimate, refined), key=lambda m: kkt_residual(problem, x, m))

    def _result(self, problem, x, weight, status, iterations, *, stopped=False) -> BarrierResult:
        if status is SolveStatus.INFEASIBLE:
            multipliers = Multipliers(np.zeros(problem.num_constraints), np.zeros(problem.size))
            residual = np.inf
        else:
            multipliers = self._multipliers(problem, x, weight)
            residual = kkt_residual(problem, x, multipliers)
        return BarrierResult(
            x=x,
            objective=problem.objective(x, derivatives=False).value,
            status=status,
            iterations=iterations,
            multipliers=multipliers,
            kkt_residual=residual,
            stopped=stopped,
        )


def _refit_multipliers(
    gradient: np.ndarray, cons: ConstraintEvaluation, slack: np.ndarray, weight: float
) -> Optional[Multipliers]:
    """
    Least-squares (λ, μ) for ∇f + Jᵀλ + μ = 0 together with λ_i g_i = 1/t
    and μ_j s_j = 1/t, clipped at zero.

    A constraint with a large g_i is pinned near 1 / (t g_i) by its
    complementarity row; an active one is left to stationarity.
    """
    m, n = len(cons.values), len(slack)
    system = np.zeros((n + m + n, m + n))
    system[:n, :m] = cons.jacobian.T
    system[:n, m:] = np.eye(n)
    system[n:n + m, :m] = np.diag(cons.values)
    system[n + m:, m:] = np.diag(slack)
    rhs = np.concatenate([-gradient, np.full(m + n, 1.0 / weight)])
    try:
        solution = scipy.linalg.lstsq(system, rhs, check_finite=False)[0]
    except (np.linalg.LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(solution)):
        return None
    solution = np.maximum(solution, 0.0)
    return Multipliers(constraints=solution[:m], bounds=solution[m:])


def _newton_step(hessian: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(hessian, check_finite=False)
        return scipy.linalg.cho_solve(factor, -gradient, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        pass
    try:
        return scipy.linalg.solve(hessian, -gradient, assume_a="sym")
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(hessian, -gradient, rcond=None)[0]
