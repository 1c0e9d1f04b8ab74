"""
Core types of a production-chain economy and the pure evaluation functions.

Goods are addressed with 1-based indices: 1..n_raw are raw resources, the
rest are manufactured goods (one company per good). Matrices are stored as
0-based numpy arrays, so good k lives at row/column k - 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np


NOT_UPPER_TRIANGULAR = "not upper triangular"
RETURNS_NOT_DECREASING = "returns to scale not decreasing"
CYCLE_FOUND = "cycle found"
NON_POSITIVE_ALPHA = "non-positive alpha"
NON_POSITIVE_PRICE = "non-positive price"
RAW_COLUMN_NONZERO = "raw column nonzero"
BETA_OUT_OF_RANGE = "beta outside [0, 1)"
SHAPE_MISMATCH = "shape mismatch"


class DomainError(ValueError):
    """Raised when a flow matrix or plan is outside the model's domain."""


class InvalidEconomyError(ValueError):
    """Raised when an economy is used that breaks the structural assumptions."""

    def __init__(self, report: "ValidationReport"):
        super().__init__("Invalid economy: " + "; ".join(report.violations))
        self.report = report


def _frozen(values, *, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Economy:
    """Immutable production chain: β coefficients, technology levels and prices."""

    n_raw: int
    beta: np.ndarray
    alpha: np.ndarray
    prices: np.ndarray

    @classmethod
    def from_arrays(cls, n_raw: int, beta, alpha, prices) -> "Economy":
        return cls(int(n_raw), _frozen(beta), _frozen(alpha), _frozen(prices))

    @property
    def n_goods(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def n_companies(self) -> int:
        return self.n_goods - self.n_raw

    @property
    def raws(self) -> range:
        return range(1, self.n_raw + 1)

    @property
    def companies(self) -> range:
        return range(self.n_raw + 1, self.n_goods + 1)

    def is_raw(self, k: int) -> bool:
        return 1 <= k <= self.n_raw

    def suppliers(self, m: int) -> list[int]:
        """Goods with a positive β into good m, ascending."""
        return [int(k) + 1 for k in np.flatnonzero(self.beta[:, m - 1] > 0)]

    def consumers(self, k: int) -> list[int]:
        """Goods that use good k as an input, ascending."""
        return [int(m) + 1 for m in np.flatnonzero(self.beta[k - 1, :] > 0)]

    def edges(self) -> list[tuple[int, int]]:
        """All production links (k, m) with β_km > 0, row-major, 1-based."""
        rows, cols = np.nonzero(self.beta > 0)
        return [(int(k) + 1, int(m) + 1) for k, m in zip(rows, cols)]

    def same_as(self, other: "Economy") -> bool:
        return (
            self.n_raw == other.n_raw
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.prices, other.prices)
        )


@dataclass(frozen=True)
class OligarchSpec:
    """A set of oligarch-owned companies and its depth d(O)."""

    members: frozenset[int]
    depth: int

    def __contains__(self, m: int) -> bool:
        return m in self.members

    @property
    def size(self) -> int:
        return len(self.members)

    def complement(self, economy: Economy) -> list[int]:
        return [m for m in economy.companies if m not in self.members]


@dataclass(frozen=True, eq=False)
class ProductionPlan:
    """Flow matrix x (units of good k shipped to producer m) and outputs y."""

    flows: np.ndarray
    outputs: np.ndarray

    @classmethod
    def from_flows(cls, economy: Economy, flows) -> "ProductionPlan":
        flows = np.array(flows, dtype=float, copy=True)
        _check_flow_shape(economy, flows)
        outputs = np.zeros(economy.n_goods)
        for m in economy.companies:
            outputs[m - 1] = production_output(economy, flows, m)
        return cls(_frozen(flows), _frozen(outputs))

    def flow(self, k: int, m: int) -> float:
        return float(self.flows[k - 1, m - 1])

    def output(self, m: int) -> float:
        return float(self.outputs[m - 1])


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, violation: str) -> None:
        if violation not in self.violations:
            self.violations.append(violation)


@dataclass(frozen=True, eq=False)
class ValueReport:
    """Per-company value added ρ (raw entries fixed at 0), ψ and optionally ψ_O."""

    per_company_value_added: np.ndarray
    total: float
    oligarch_total: Optional[float] = None


def _check_flow_shape(economy: Economy, flows: np.ndarray) -> None:
    expected = (economy.n_goods, economy.n_goods)
    if flows.shape != expected:
        raise DomainError(f"Flow matrix has shape {flows.shape}, expected {expected}")


def validate_economy(economy: Economy) -> ValidationReport:
    """Check the structural assumptions of the model and list every violation."""
    # Imported here: production_graph depends on this module.
    from production_graph import has_cycle

    report = ValidationReport()
    n = economy.n_goods
    beta = np.asarray(economy.beta)
    if beta.shape != (n, n) or economy.prices.shape != (n,) or not 0 <= economy.n_raw <= n:
        report.add(SHAPE_MISMATCH)
        return report

    if np.any(np.tril(beta) != 0):
        report.add(NOT_UPPER_TRIANGULAR)
    if np.any(beta < 0) or np.any(beta >= 1):
        report.add(BETA_OUT_OF_RANGE)
    if np.any(beta[:, : economy.n_raw] != 0):
        report.add(RAW_COLUMN_NONZERO)
    column_sums = beta[:, economy.n_raw :].sum(axis=0)
    if np.any(column_sums >= 1):
        report.add(RETURNS_NOT_DECREASING)
    if has_cycle(economy):
        report.add(CYCLE_FOUND)
    if np.any(economy.alpha[economy.n_raw :] <= 0):
        report.add(NON_POSITIVE_ALPHA)
    if np.any(economy.prices <= 0):
        report.add(NON_POSITIVE_PRICE)
    return report


def require_valid(economy: Economy) -> None:
    report = validate_economy(economy)
    if not report.ok:
        raise InvalidEconomyError(report)


def production_output(economy: Economy, flows, m: int) -> float:
    """
    Cobb-Douglas output of company m.

    Only links with β > 0 that carry a positive flow enter the product, so
    a company with nothing delivered produces α_m (the empty product).
    """
    if economy.is_raw(m) or not 1 <= m <= economy.n_goods:
        raise DomainError(f"Good {m} is not a company")
    flows = np.asarray(flows, dtype=float)
    column = flows[:, m - 1]
    if np.any(column < 0):
        raise DomainError(f"Negative flow into company {m}")
    betas = economy.beta[:, m - 1]
    mask = (betas > 0) & (column > 0)
    return float(economy.alpha[m - 1] * np.prod(column[mask] ** betas[mask]))


def value_added(economy: Economy, plan: ProductionPlan, m: int) -> float:
    """ρ_m = y_m v_m − Σ_k v_k x_km."""
    _check_flow_shape(economy, plan.flows)
    input_cost = float(economy.prices @ plan.flows[:, m - 1])
    return float(plan.outputs[m - 1] * economy.prices[m - 1]) - input_cost


def total_value_added(
    economy: Economy, plan: ProductionPlan, oligarch: Optional[OligarchSpec] = None
) -> ValueReport:
    per_company = np.zeros(economy.n_goods)
    total = 0.0
    oligarch_total = 0.0 if oligarch is not None else None
    for m in economy.companies:
        rho = value_added(economy, plan, m)
        per_company[m - 1] = rho
        total += rho
        if oligarch is not None and m in oligarch.members:
            oligarch_total += rho
    return ValueReport(_frozen(per_company), total, oligarch_total)


def group_value_added(economy: Economy, plan: ProductionPlan, members: Iterable[int]) -> float:
    total = 0.0
    for m in sorted(members):
        total += value_added(economy, plan, m)
    return total


def raw_purchases(economy: Economy, plan: ProductionPlan) -> np.ndarray:
    """Quantity of each raw good bought across all producers."""
    return plan.flows[: economy.n_raw, :].sum(axis=1)


def balance_slack(economy: Economy, plan: ProductionPlan) -> np.ndarray:
    """y_m − Σ_j x_mj for every company (raw entries are 0)."""
    slack = np.zeros(economy.n_goods)
    for m in economy.companies:
        slack[m - 1] = plan.outputs[m - 1] - plan.flows[m - 1, :].sum()
    return slack


def final_products(economy: Economy) -> list[int]:
    return [m for m in economy.companies if not economy.consumers(m)]


def intermediate_products(economy: Economy) -> list[int]:
    return [m for m in economy.companies if economy.consumers(m)]


def zero_plan(economy: Economy) -> ProductionPlan:
    return ProductionPlan.from_flows(economy, np.zeros((economy.n_goods, economy.n_goods)))


def scale_prices(economy: Economy, factor: float) -> Economy:
    if factor <= 0:
        raise ValueError("Price scale factor must be positive")
    return Economy.from_arrays(economy.n_raw, economy.beta, economy.alpha, economy.prices * factor)
