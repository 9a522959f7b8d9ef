from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import pytest

from mongelab import __version__
from mongelab.cli import main

WriteConfig = Callable[[str, str], Path]
CONFIG_DIR = Path(__file__).resolve().parents[1] / "mongelab" / "config"

SOLVE = """
experiment = "solve"

[cost]
kind = "squared_distance"

[source]
points = [[0.0, 0.0], [1.0, 0.0]]

[target]
points = [[0.0, 1.0], [1.0, 1.0]]
"""


def test_run_writes_json_and_markdown_reports(
    write_config: WriteConfig, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    output = tmp_path / "out"

    code = main(["run", str(write_config("solve.toml", SOLVE)), "--output", str(output)])

    assert code == 0
    report = json.loads((output / "report.json").read_text())
    assert report["experiment"] == "solve"
    assert report["results"]["optimal_cost"] == pytest.approx(1.0)
    assert report["run_metadata"]["tool_version"] == __version__
    assert report["run_metadata"]["artifacts"] == [
        "plan.csv",
        "plan.json",
        "report.json",
        "report.md",
    ]
    markdown = (output / "report.md").read_text()
    assert "## Headline values" in markdown
    assert "| optimal_cost | 1 |" in markdown
    assert "Artifacts written:" in capsys.readouterr().out


def test_run_is_reproducible_for_a_fixed_seed(write_config: WriteConfig, tmp_path: Path) -> None:
    body = """
experiment = "pmtc"

[cost]
kind = "squared_distance"

[reference]
name = "lebesgue"

[triple]
x = [0.0, 0.0]
y = [1.0, 0.0]
z = [-1.0, 0.0]

[twist]
epsilon = 0.1
s_schedule = [0.1, 0.05]
outer_budget = 500
"""
    path = write_config("pmtc.toml", body)

    assert main(["run", str(path), "--output", str(tmp_path / "a"), "--seed", "5"]) == 0
    assert main(["run", str(path), "--output", str(tmp_path / "b"), "--seed", "5"]) == 0

    first = json.loads((tmp_path / "a" / "report.json").read_text())
    second = json.loads((tmp_path / "b" / "report.json").read_text())
    assert first["results"] == second["results"]
    assert first["config_hash"] == second["config_hash"]
    assert first["run_metadata"]["seed"] == 5
    ratios = [(tmp_path / run / "ratios.csv").read_text() for run in ("a", "b")]
    assert ratios[0] == ratios[1]


def test_invalid_config_exits_with_code_2(
    write_config: WriteConfig, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    body = SOLVE.replace('[cost]\nkind = "squared_distance"\n', "")

    code = main(["run", str(write_config("bad.toml", body)), "--output", str(tmp_path)])

    assert code == 2
    assert "invalid config" in capsys.readouterr().err


def test_missing_config_exits_with_code_2(tmp_path: Path) -> None:
    assert main(["run", str(tmp_path / "absent.toml")]) == 2


def test_infeasible_problem_exits_with_code_3(
    write_config: WriteConfig, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    body = """
experiment = "solve"

[space]
dim = 1

[cost]
kind = "table"
table = [[inf, inf], [1.0, 1.0]]

[source]
points = [[0.0], [1.0]]

[target]
points = [[0.0], [1.0]]
"""

    code = main(["run", str(write_config("inf.toml", body)), "--output", str(tmp_path)])

    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_packaged_certify_example_finds_the_violation(tmp_path: Path) -> None:
    code = main(["run", str(CONFIG_DIR / "certify.toml"), "--output", str(tmp_path)])

    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["certificate"]["verdict"] == "violated"
    assert report["results"]["pair_source"] == "pairs_csv"


def test_instance_dump(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["instance", "euclid-crossing-2x2", "--dump", str(tmp_path)])

    assert code == 0
    assert sorted(path.name for path in tmp_path.iterdir()) == [
        "instance.json",
        "mu.csv",
        "nu.csv",
    ]
    assert '"name": "euclid-crossing-2x2"' in capsys.readouterr().out


def test_unknown_instance_exits_with_code_2(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["instance", "circle"]) == 2
    assert "Unknown instance" in capsys.readouterr().err


def test_version(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__
