"""
Loading and saving run configuration files.

A config file is a JSON object with optional "generator", "solver" and
"experiment" sections whose keys are the dataclass field names. Missing
sections and keys keep their defaults; unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from experiments import ExperimentConfig
from generator import GeneratorConfig
from solver import SolverSettings

EXPERIMENT_KEYS = ("replications", "depths", "sizes", "gammas", "master_seed", "workers", "gain_floor", "oligarch_attempts")


class ConfigError(ValueError):
    """Raised for unknown or invalid configuration fields."""


@dataclass(frozen=True)
class RunConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    experiment: dict = field(default_factory=dict)

    def experiment_config(self, **overrides) -> ExperimentConfig:
        """ExperimentConfig from this file's sections; non-None overrides win."""
        values = dict(self.experiment)
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return ExperimentConfig(generator=self.generator, solver=self.solver, **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid experiment settings: {exc}") from exc


def _section(data: dict, name: str, allowed: tuple[str, ...]) -> dict:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"Section '{name}' must be an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"Unknown {name} fields: {unknown}")
    return section


def _build(cls, values: dict, name: str):
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid {name} settings: {exc}") from exc


def generator_from_dict(values: dict) -> GeneratorConfig:
    section = _section({"generator": values}, "generator", tuple(f.name for f in fields(GeneratorConfig)))
    return _build(GeneratorConfig, section, "generator")


def solver_from_dict(values: dict) -> SolverSettings:
    section = _section({"solver": values}, "solver", tuple(f.name for f in fields(SolverSettings)))
    return _build(SolverSettings, section, "solver")


def config_from_dict(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("Config must be a JSON object")
    unknown = sorted(set(data) - {"generator", "solver", "experiment"})
    if unknown:
        raise ConfigError(f"Unknown config sections: {unknown}")
    return RunConfig(
        generator=generator_from_dict(data.get("generator", {})),
        solver=solver_from_dict(data.get("solver", {})),
        experiment=dict(_section(data, "experiment", EXPERIMENT_KEYS)),
    )


def load_config(path: Optional[Path]) -> RunConfig:
    """
    Load a config file.

    Returns:
        RunConfig with defaults when path is None.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)


def config_to_dict(config: RunConfig) -> dict:
    generator = asdict(config.generator)
    for key in ("beta_range", "scale_range", "alpha_range"):
        generator[key] = list(generator[key])
    payload = {"generator": generator, "solver": asdict(config.solver)}
    if config.experiment:
        payload["experiment"] = dict(config.experiment)
    return payload


def save_config(config: RunConfig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(config_to_dict(config), indent=2), encoding="utf-8")
    tmp.replace(path)


def with_overrides(settings, **overrides):
    """Copy of a config dataclass with every non-None override applied."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return settings
    try:
        return replace(settings, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
