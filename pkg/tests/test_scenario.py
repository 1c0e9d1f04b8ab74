import pytest

from barrier import SolveStatus
from conftest import E8_ADAPTED_GDP
from generator import GeneratorConfig, NoFeasibleOligarch, RejectionExhausted, generate_economy, generate_oligarch
from production_graph import InvalidOligarchError, make_oligarch
from scenario import (
    ADAPTATION_STAGE,
    GLOBAL_STAGE,
    OLIGARCH_STAGE,
    StageFailure,
    inefficiency_ratio,
    run_scenario,
)
from solver import SolverSettings, solve_global_optimum

GAMMAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@pytest.fixture(scope="module")
def e8_result(e8, e8_baseline, e8_oligarch):
    return run_scenario(e8, e8_oligarch, 1.0, baseline=e8_baseline)


def test_worked_example(e8_result):
    assert e8_result.psi_star == pytest.approx(704.65, rel=0.01)
    assert e8_result.oligarch_baseline_profit == pytest.approx(640.83, rel=0.01)
    assert e8_result.oligarch_optimal_profit == pytest.approx(643.61, rel=0.01)
    assert e8_result.final_gdp == pytest.approx(E8_ADAPTED_GDP, rel=2e-3)
    assert e8_result.profit_gain == pytest.approx(2.77, abs=0.15)
    assert e8_result.gdp_loss == pytest.approx(704.65 - E8_ADAPTED_GDP, abs=1.0)
    assert e8_result.inefficiency_ratio == pytest.approx(e8_result.gdp_loss / e8_result.profit_gain)
    assert e8_result.inefficiency_ratio == pytest.approx(12.6, rel=0.06)
    assert e8_result.relative_gdp == pytest.approx(E8_ADAPTED_GDP / 704.65, rel=2e-3)


def test_stages_are_kept(e8_result):
    assert set(e8_result.stages) == {GLOBAL_STAGE, OLIGARCH_STAGE, ADAPTATION_STAGE}
    assert all(stage.optimal for stage in e8_result.stages.values())


def test_to_dict(e8_result):
    payload = e8_result.to_dict()
    assert payload["members"] == [3, 4, 7]
    assert payload["depth"] == 1
    assert payload["gamma"] == 1.0
    assert payload["final_gdp"] == e8_result.final_gdp


def test_baseline_is_solved_when_missing(e8, e8_oligarch, e8_result):
    lines = []
    result = run_scenario(e8, e8_oligarch, 1.0, log=lines.append)
    assert result.final_gdp == pytest.approx(e8_result.final_gdp, rel=1e-9)
    assert len(lines) == 2


def test_full_ownership_keeps_gdp(e8, e8_baseline):
    everyone = make_oligarch(e8, e8.companies)
    result = run_scenario(e8, everyone, 1.0, baseline=e8_baseline)
    assert result.relative_gdp == pytest.approx(1.0, abs=1e-4)
    assert result.inefficiency_ratio is None


def test_gdp_never_exceeds_optimum(e8, e8_baseline, e8_oligarch):
    for gamma in (0.0, 0.5):
        result = run_scenario(e8, e8_oligarch, gamma, baseline=e8_baseline)
        assert result.final_gdp <= result.psi_star * (1 + 1e-6)


@pytest.mark.parametrize(
    "loss, gain, expected",
    [(20.82, 2.77, 20.82 / 2.77), (1.0, 1e-4, 1e4), (5.0, 0.0, None), (5.0, -1.0, None)],
)
def test_inefficiency_ratio(loss, gain, expected):
    result = inefficiency_ratio(loss, gain)
    if expected is None:
        assert result is None
    else:
        assert result == pytest.approx(expected)


def test_inefficiency_ratio_floor_must_be_positive():
    with pytest.raises(ValueError):
        inefficiency_ratio(1.0, 1.0, gain_floor=0.0)


def test_stage_failure_names_the_stage(e8, e8_oligarch):
    with pytest.raises(StageFailure) as info:
        run_scenario(e8, e8_oligarch, 1.0, SolverSettings(max_iterations=1))
    assert info.value.stage == GLOBAL_STAGE
    assert info.value.solution.status is SolveStatus.ITERATION_LIMIT
    assert "global stage" in str(info.value)


@pytest.mark.slow
def test_properties_hold_on_generated_economies():
    config = GeneratorConfig()
    checked = 0
    for seed in range(1, 101):
        try:
            economy = generate_economy(config, seed)
            oligarch = generate_oligarch(economy, 7, 2, seed)
        except (RejectionExhausted, NoFeasibleOligarch):
            continue
        baseline = solve_global_optimum(economy)
        assert baseline.optimal, seed

        profits = []
        for gamma in GAMMAS:
            result = run_scenario(economy, oligarch, gamma, baseline=baseline)
            assert result.final_gdp <= result.psi_star * (1 + 1e-6), (seed, gamma)
            profits.append(result.oligarch_optimal_profit)
        for lower, higher in zip(profits, profits[1:]):
            assert higher >= lower - 1e-6 * max(1.0, abs(lower)), seed

        try:
            everyone = make_oligarch(economy, economy.companies)
        except InvalidOligarchError:
            everyone = None
        if everyone is not None:
            full = run_scenario(economy, everyone, 1.0, baseline=baseline)
            assert full.relative_gdp == pytest.approx(1.0, abs=1e-4), seed
        checked += 1
    assert checked >= 90
