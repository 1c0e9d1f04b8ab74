import json

import pytest

from economy_store import load_solution
from olichain import EXIT_INVALID, EXIT_OK, EXIT_USAGE, build_parser, main
from paths import E8_PATH
from barrier import SolveStatus
from conftest import E8_ADAPTED_GDP


def test_scenario_on_worked_example(tmp_path):
    output = tmp_path / "scenario.json"
    code = main(["scenario", "--economy", str(E8_PATH), "--members", "3,4,7", "--gamma", "1.0", "-o", str(output)])
    assert code == EXIT_OK
    payload = json.loads(output.read_text())
    assert payload["final_gdp"] == pytest.approx(E8_ADAPTED_GDP, rel=2e-3)
    assert payload["members"] == [3, 4, 7]


def test_scenario_accepts_fraction_gamma(tmp_path):
    output = tmp_path / "scenario.json"
    code = main(["scenario", "--economy", str(E8_PATH), "--size", "2", "--depth", "2", "--gamma", "1/2", "-o", str(output)])
    assert code == EXIT_OK
    assert json.loads(output.read_text())["gamma"] == 0.5


def test_scenario_needs_exactly_one_oligarch_source(tmp_path):
    code = main(["scenario", "--economy", str(E8_PATH), "--members", "3", "--size", "1", "--depth", "1"])
    assert code == EXIT_USAGE


def test_solve_e8(tmp_path):
    output = tmp_path / "plan.json"
    assert main(["solve", str(E8_PATH), "-o", str(output)]) == EXIT_OK
    solution = load_solution(output)
    assert solution.status is SolveStatus.OPTIMAL
    assert solution.objective == pytest.approx(704.65, rel=0.01)


def test_solve_missing_file(tmp_path, caplog):
    missing = tmp_path / "missing.json"
    assert main(["solve", str(missing)]) == EXIT_USAGE
    assert str(missing) in caplog.text


def test_gen_then_solve(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"generator": {"oligarch_feasibility": False}}), encoding="utf-8")
    economy = tmp_path / "econ.json"
    plan = tmp_path / "plan.json"
    code = main(["gen", "--seed", "42", "--n-companies", "8", "--min-graph-depth", "3",
                 "--config", str(config), "-o", str(economy)])
    assert code == EXIT_OK
    assert main(["solve", str(economy), "-o", str(plan)]) == EXIT_OK
    assert load_solution(plan).status is SolveStatus.OPTIMAL


def test_invalid_economy_exits_with_validation_code(tmp_path):
    payload = json.loads(E8_PATH.read_text())
    payload["beta"].append([8, 3, 0.1])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(payload), encoding="utf-8")
    assert main(["solve", str(bad), "-o", str(tmp_path / "plan.json")]) == EXIT_INVALID


def test_invalid_oligarch_exits_with_validation_code(tmp_path):
    code = main(["scenario", "--economy", str(E8_PATH), "--members", "3,8", "-o", str(tmp_path / "s.json")])
    assert code == EXIT_INVALID


def test_bad_gamma_list_is_a_usage_error(tmp_path):
    assert main(["mc", "--gammas", "a,b", "-o", str(tmp_path)]) == EXIT_USAGE


def test_gamma_out_of_range_is_a_usage_error():
    assert main(["scenario", "--economy", str(E8_PATH), "--members", "3", "--gamma", "2"]) == EXIT_USAGE


def test_unknown_config_key_is_a_validation_error(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"solver": {"tolerance": 1}}), encoding="utf-8")
    assert main(["solve", str(E8_PATH), "--config", str(config)]) == EXIT_INVALID


def test_unknown_subcommand_exits_with_usage_code():
    with pytest.raises(SystemExit) as info:
        main(["plot"])
    assert info.value.code == EXIT_USAGE


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["gen", "--help"])
    text = capsys.readouterr().out
    assert "(default 0)" in text
    assert "(default 25)" in text
    with pytest.raises(SystemExit):
        build_parser().parse_args(["mc", "--help"])
    text = capsys.readouterr().out
    assert "(default 1000)" in text
    assert "(default 1e-6)" in text


def test_mc_then_report(tmp_path):
    results = tmp_path / "results"
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"generator": {"oligarch_feasibility": False, "min_graph_depth": 3}}), encoding="utf-8")
    code = main(["mc", "--replications", "1", "--depths", "1", "--sizes", "1,2", "--gammas", "0,1",
                 "--n-companies", "8", "--config", str(config), "-o", str(results)])
    assert code == EXIT_OK
    lines = (results / "records.csv").read_text().splitlines()
    assert len(lines) == 5
    assert main(["report", str(results / "grids.json")]) == EXIT_OK
    assert (results / "relative_gdp.svg").exists()
    assert (results / "capture_lines.svg").exists()


@pytest.mark.slow
def test_mc_csv_does_not_depend_on_worker_count(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"generator": {"oligarch_feasibility": False, "min_graph_depth": 3}}), encoding="utf-8")
    outputs = []
    for workers in ("1", "8"):
        results = tmp_path / f"workers{workers}"
        code = main(["mc", "--replications", "6", "--depths", "1,2", "--sizes", "1,2", "--gammas", "0,1",
                     "--n-companies", "8", "--seed", "3", "--workers", workers,
                     "--config", str(config), "-o", str(results)])
        assert code == EXIT_OK
        outputs.append((results / "records.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].count(b"\n") == 1 + 6 * 2 * 2 * 2
