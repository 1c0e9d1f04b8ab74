import json

import pytest

from config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
    with_overrides,
)
from generator import GeneratorConfig
from solver import SolverSettings


def test_defaults_without_a_file():
    config = load_config(None)
    assert config.generator == GeneratorConfig()
    assert config.solver == SolverSettings()
    assert config.experiment == {}


def test_round_trip(tmp_path):
    original = RunConfig(
        generator=GeneratorConfig(n_companies=12, beta_range=(0.3, 0.5)),
        solver=SolverSettings(epsilon=1e-5, cap_in_adaptation=True),
        experiment={"replications": 10, "gammas": [0.0, 1.0]},
    )
    path = tmp_path / "config.json"
    save_config(original, path)
    assert load_config(path) == original
    assert not path.with_suffix(".tmp").exists()


def test_sections_are_optional():
    config = config_from_dict({"solver": {"kkt_tolerance": 1e-8}})
    assert config.solver.kkt_tolerance == 1e-8
    assert config.generator == GeneratorConfig()


@pytest.mark.parametrize(
    "data",
    [
        [],
        {"plots": {}},
        {"generator": {"colour": "red"}},
        {"solver": {"epsilon": 2.0}},
        {"generator": []},
        {"experiment": {"seed": 1}},
    ],
)
def test_bad_configs_are_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_invalid_json_and_missing_file(tmp_path):
    bad = tmp_path / "config.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")


def test_experiment_section_and_overrides():
    config = config_from_dict({"experiment": {"replications": 5, "depths": [1, 2]}})
    experiment = config.experiment_config(replications=None, workers=3)
    assert experiment.replications == 5
    assert experiment.depths == (1, 2)
    assert experiment.workers == 3
    with pytest.raises(ConfigError):
        config.experiment_config(replications=0)


def test_with_overrides_skips_none():
    settings = SolverSettings()
    assert with_overrides(settings, epsilon=None) is settings
    assert with_overrides(settings, epsilon=1e-4).epsilon == 1e-4
    with pytest.raises(ConfigError):
        with_overrides(settings, max_iterations=0)


def test_config_file_is_plain_json(tmp_path):
    path = tmp_path / "config.json"
    save_config(RunConfig(), path)
    payload = json.loads(path.read_text())
    assert payload["generator"]["beta_range"] == [0.25, 0.6]
    assert payload == config_to_dict(RunConfig())
