from __future__ import annotations

import numpy as np
import pytest

from economy import Economy
from economy_store import load_economy
from paths import E8_PATH
from production_graph import make_oligarch
from solver import SolverSettings, solve_global_optimum


# Reference optimal plan of the 8-good example, (supplier, consumer) -> flow.
E8_REFERENCE_FLOWS = {
    (1, 3): 298.4,
    (1, 4): 740.6,
    (2, 3): 328.3,
    (2, 5): 2.8,
    (3, 4): 393.8,
    (3, 6): 2.9,
    (4, 5): 6.4,
    (4, 6): 27.5,
    (4, 7): 3.4,
    (5, 7): 3.1,
    (6, 8): 16.3,
    (7, 8): 11.4,
}

# Stage-two GDP of the fixture with the oligarch {3, 4, 7} at full capture,
# cross-checked against an SLSQP multistart on the same problem.
E8_ADAPTED_GDP = 669.66


@pytest.fixture(scope="session")
def e8() -> Economy:
    return load_economy(E8_PATH)


@pytest.fixture
def settings() -> SolverSettings:
    return SolverSettings()


@pytest.fixture(scope="session")
def e8_baseline(e8):
    return solve_global_optimum(e8, SolverSettings())


@pytest.fixture(scope="session")
def e8_oligarch(e8):
    return make_oligarch(e8, {3, 4, 7})


@pytest.fixture
def reference_flows(e8) -> np.ndarray:
    flows = np.zeros((e8.n_goods, e8.n_goods))
    for (k, m), value in E8_REFERENCE_FLOWS.items():
        flows[k - 1, m - 1] = value
    return flows


@pytest.fixture
def single_company():
    """One raw good priced 1 feeding one company with α = 1, β = 0.5."""

    def build(price: float) -> Economy:
        beta = np.array([[0.0, 0.5], [0.0, 0.0]])
        return Economy.from_arrays(1, beta, [1.0, 1.0], [1.0, price])

    return build


@pytest.fixture
def chain_economy():
    """Raw good 1 feeding a straight chain 2 -> 3 -> ... of `length` edges."""

    def build(length: int) -> Economy:
        n = length + 1
        beta = np.zeros((n, n))
        for k in range(1, n):
            beta[k - 1, k] = 0.5
        return Economy.from_arrays(1, beta, np.ones(n), np.full(n, 1.5))

    return build
