from __future__ import annotations

import math

import pytest

from mongelab.config_loader import ExperimentConfig
from mongelab.suite import (
    CRITERIA,
    densely_scattered,
    derivative_identity,
    lmtc_sanity,
    run_criteria,
    run_suite,
)


def test_criteria_are_numbered_one_to_eight() -> None:
    assert sorted(CRITERIA) == list(range(1, 9))


def test_small_suite_passes() -> None:
    config = ExperimentConfig.model_validate(
        {"experiment": "suite", "workers": 2, "suite": {"scale": 0.02, "criteria": [1, 2, 3, 7]}}
    )

    payload, series = run_suite(config)

    assert payload["passed"], payload["criteria"]
    assert [entry["criterion"] for entry in payload["criteria"]] == [1, 2, 3, 7]
    assert list(series["criteria"]["key"]) == ["1", "2", "3", "7"]
    assert series["criteria"]["value"].all()


def test_worker_count_does_not_change_results() -> None:
    serial = run_criteria([1, 3], seed=7, scale=0.02, workers=1)
    pooled = run_criteria([3, 1], seed=7, scale=0.02, workers=2)

    assert [r.to_dict() for r in serial] == [r.to_dict() for r in pooled]


def test_derivative_identity_details() -> None:
    result = derivative_identity(seed=0, scale=0.05)

    assert result.passed
    assert result.details["triples"] == 5
    assert result.details["max_error"] == pytest.approx(0.0, abs=1e-4)


@pytest.mark.parametrize("number", [4, 5])
def test_scaled_dichotomy_and_closed_form_criteria_pass(number: int) -> None:
    (result,) = run_criteria([number], seed=0, scale=0.05)

    assert result.criterion == number
    assert result.passed, result.details


def test_scaled_cone_criterion_uses_a_scaled_budget() -> None:
    result = densely_scattered(seed=0, scale=0.05)

    assert result.passed, result.details
    assert result.details["budget"] == 500
    assert result.details["tolerance"] == pytest.approx(5.0 * math.sqrt(0.25 / 500))
    assert set(result.details["verdicts"]) == {
        f"{name}_{index}" for name in ("uniform", "gaussian", "piecewise") for index in (0, 1)
    }
    assert set(result.details["verdicts"].values()) == {"positive"}


def test_scaled_lmtc_criterion_checks_one_triple() -> None:
    result = lmtc_sanity(seed=0, scale=0.05)

    assert result.passed, result.details
    assert result.details["triples"] == 1
    assert result.details["overlap_zero"]
