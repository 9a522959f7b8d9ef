from __future__ import annotations

import os
from pathlib import Path
from typing import Callable

import pytest
from pydantic import ValidationError

from mongelab.config_loader import ExperimentConfig, load_experiment_config
from mongelab.errors import ConfigError

WriteConfig = Callable[[str, str], Path]

SOLVE = """
experiment = "solve"
seed = 4

[cost]
kind = "squared_distance"

[source]
points = [[0.0, 0.0], [1.0, 0.0]]

[target]
points = [[0.0, 1.0], [1.0, 1.0]]
"""


def test_loads_a_solve_config(write_config: WriteConfig) -> None:
    config = load_experiment_config(write_config("solve.toml", SOLVE))

    assert config.experiment == "solve"
    assert config.seed == 4
    assert config.space.norm == "euclidean"
    assert config.space.dim == 2
    assert config.source is not None and config.source.points == [[0.0, 0.0], [1.0, 0.0]]
    assert config.workers == 1


def test_echo_drops_unset_sections(write_config: WriteConfig) -> None:
    echo = load_experiment_config(write_config("solve.toml", SOLVE)).echo()

    assert echo["experiment"] == "solve"
    assert "triple" not in echo
    assert echo["cost"] == {"kind": "squared_distance"}


def test_unknown_keys_are_rejected(write_config: WriteConfig) -> None:
    path = write_config("extra.toml", SOLVE + "\nbudget = 3\n")

    with pytest.raises(ValidationError, match="budget"):
        load_experiment_config(path)


def test_solve_needs_a_cost(write_config: WriteConfig) -> None:
    body = SOLVE.replace('[cost]\nkind = "squared_distance"\n', "")

    with pytest.raises(ValidationError, match="need a `cost` section"):
        load_experiment_config(write_config("nocost.toml", body))


def test_pmtc_needs_triple_z(write_config: WriteConfig) -> None:
    body = """
experiment = "pmtc"

[cost]
kind = "squared_distance"

[reference]
name = "lebesgue"

[triple]
x = [0.0, 0.0]
y = [1.0, 0.0]

[twist]
epsilon = 0.1
"""
    with pytest.raises(ValidationError, match="triple.z"):
        load_experiment_config(write_config("pmtc.toml", body))


def test_schedules_must_decrease() -> None:
    with pytest.raises(ValidationError, match="strictly decreasing"):
        ExperimentConfig.model_validate(
            {
                "experiment": "doubling",
                "reference": {"name": "uniform"},
                "doubling": {"radii": [0.1, 0.2]},
            }
        )


def test_suite_rejects_unknown_criteria() -> None:
    with pytest.raises(ValidationError, match="unknown suite criteria"):
        ExperimentConfig.model_validate({"experiment": "suite", "suite": {"criteria": [1, 12]}})


def test_suite_criteria_are_sorted_and_deduplicated() -> None:
    config = ExperimentConfig.model_validate(
        {"experiment": "suite", "suite": {"criteria": [3, 1, 3]}}
    )

    assert config.suite.criteria == [1, 3]


def test_seed_precedence(write_config: WriteConfig) -> None:
    path = write_config("solve.toml", SOLVE)

    assert load_experiment_config(path).seed == 4
    os.environ["MONGELAB_SEED"] = "9"
    assert load_experiment_config(path).seed == 9
    assert load_experiment_config(path, seed=2).seed == 2


def test_seed_from_env_file(write_config: WriteConfig, tmp_path: Path) -> None:
    env_file = tmp_path / "run.env"
    env_file.write_text("MONGELAB_SEED=17\n")

    config = load_experiment_config(write_config("solve.toml", SOLVE), env_file=env_file)

    assert config.seed == 17


@pytest.mark.parametrize("value", ["-1", "seven"])
def test_bad_env_seed_is_a_config_error(write_config: WriteConfig, value: str) -> None:
    os.environ["MONGELAB_SEED"] = value

    with pytest.raises(ConfigError, match="MONGELAB_SEED"):
        load_experiment_config(write_config("solve.toml", SOLVE))


def test_negative_cli_seed_is_a_config_error(write_config: WriteConfig) -> None:
    with pytest.raises(ConfigError, match="--seed"):
        load_experiment_config(write_config("solve.toml", SOLVE), seed=-3)


def test_relative_paths_resolve_against_the_config(write_config: WriteConfig) -> None:
    body = """
experiment = "certify"

[cost]
kind = "squared_distance"

[certify]
pairs_csv = "data/pairs.csv"
"""
    path = write_config("certify.toml", body)

    config = load_experiment_config(path)

    assert config.certify is not None
    assert config.certify.pairs_csv == (path.parent / "data" / "pairs.csv").resolve()


def test_missing_file_and_bad_toml(tmp_path: Path, write_config: WriteConfig) -> None:
    with pytest.raises(ConfigError, match="not found"):
        load_experiment_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError, match="not valid TOML"):
        load_experiment_config(write_config("broken.toml", "experiment = \n"))


def test_packaged_configs_validate() -> None:
    config_dir = Path(__file__).resolve().parents[1] / "mongelab" / "config"
    paths = sorted(config_dir.glob("*.toml"))

    kinds = {load_experiment_config(path).experiment for path in paths}

    assert len(paths) == 10
    assert kinds == {
        "solve",
        "certify",
        "uniqueness",
        "pmtc",
        "lmtc",
        "c1",
        "nonbranching",
        "cone",
        "doubling",
        "suite",
    }
