from __future__ import annotations

from typing import Any

import pytest

from mongelab.config_loader import ExperimentConfig
from mongelab.errors import ConfigError
from mongelab.experiments import RUNNERS, run_experiment

PLANE = {"norm": "euclidean", "dim": 2}
SQUARED = {"kind": "squared_distance"}
CROSSING = {
    "source": {"points": [[0.0, 0.0], [1.0, 0.0]]},
    "target": {"points": [[0.0, 1.0], [1.0, 1.0]]},
}
TRIPLE = {"x": [0.0, 0.0], "y": [1.0, 0.0], "z": [-1.0, 0.0]}
SMALL_TWIST = {"s_schedule": [0.1, 0.05], "outer_budget": 500, "inner_budget": 16}


def _config(**raw: Any) -> ExperimentConfig:
    return ExperimentConfig.model_validate(raw)


def test_every_experiment_kind_has_a_runner() -> None:
    assert set(RUNNERS) == {
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


def test_solve_reports_cost_and_support_certificate() -> None:
    outcome = run_experiment(_config(experiment="solve", space=PLANE, cost=SQUARED, **CROSSING))

    assert outcome.results["optimal_cost"] == pytest.approx(1.0)
    assert outcome.results["diagnostics"]["mapness"] == 1.0
    assert outcome.results["support_certificate"]["verdict"] == "monotone"
    assert outcome.plan is not None and outcome.cost is not None


def test_certify_inline_crossed_pairs() -> None:
    outcome = run_experiment(
        _config(
            experiment="certify",
            space={"norm": "euclidean", "dim": 1},
            cost=SQUARED,
            certify={"sources": [[0.0], [1.0]], "targets": [[1.0], [0.0]]},
        )
    )

    assert outcome.results["pair_source"] == "inline"
    assert outcome.results["certificate"] == {
        "verdict": "violated",
        "cycle": [0, 1],
        "defect": -2.0,
    }
    assert outcome.results["recomputed_cycle_weight"] == pytest.approx(-2.0)


def test_certify_falls_back_to_the_optimal_plan() -> None:
    outcome = run_experiment(
        _config(experiment="certify", space=PLANE, cost=SQUARED, **CROSSING)
    )

    assert outcome.results["pair_source"] == "optimal_plan"
    assert outcome.results["certificate"]["verdict"] == "monotone"
    assert "recomputed_cycle_weight" not in outcome.results


def test_uniqueness_on_constant_cost_segments() -> None:
    outcome = run_experiment(
        _config(experiment="uniqueness", instance={"name": "linf-two-segments", "n": 4})
    )

    assert outcome.results["instance"] == "linf-two-segments"
    assert outcome.results["verdict"] == "multiple"
    assert len(outcome.results["witness"]) == 2
    assert outcome.plan is not None


def test_pmtc_ratio_and_epsilon_scan_modes() -> None:
    common = dict(
        experiment="pmtc",
        space=PLANE,
        cost=SQUARED,
        reference={"name": "lebesgue"},
        triple=TRIPLE,
    )

    ratio = run_experiment(_config(**common, twist={**SMALL_TWIST, "epsilon": 0.1}))
    scan = run_experiment(_config(**common, twist={**SMALL_TWIST, "mode": "epsilon_scan"}))

    assert ratio.results["mode"] == "ratio"
    assert ratio.results["verdict"] == "positive"
    assert list(ratio.series["ratios"]["radius"]) == [0.1, 0.05]
    assert scan.results["mode"] == "epsilon_scan"
    assert scan.results["best_epsilon"] == 1.0
    assert len(scan.series["ratios"]) == 16


def test_pmtc_rejects_the_neighbourhood_mode() -> None:
    config = _config(
        experiment="pmtc",
        space=PLANE,
        cost=SQUARED,
        reference={"name": "lebesgue"},
        triple=TRIPLE,
        twist={**SMALL_TWIST, "mode": "neighbourhood"},
    )

    with pytest.raises(ConfigError, match="ratio"):
        run_experiment(config)


def test_lmtc_neighbourhood_series() -> None:
    outcome = run_experiment(
        _config(
            experiment="lmtc",
            space=PLANE,
            cost=SQUARED,
            reference={"name": "lebesgue"},
            triple=TRIPLE,
            twist={**SMALL_TWIST, "mode": "neighbourhood", "points": 2},
        )
    )

    assert outcome.results["mode"] == "neighbourhood"
    assert len(outcome.results["brackets"]) == 2
    assert set(outcome.series["ratios"]["series"]) == {
        "optimistic_0",
        "conservative_0",
        "optimistic_1",
        "conservative_1",
    }


def test_c1_probe_with_twist_gap() -> None:
    outcome = run_experiment(
        _config(
            experiment="c1",
            space=PLANE,
            cost=SQUARED,
            triple={"x": [0.0, 0.0], "y": [1.0, 0.5], "z": [-1.0, 0.2]},
            c1={"budget": 500},
        )
    )

    assert outcome.results["probe"]["verdict"] == "pass"
    assert outcome.results["twist_gradient_gap"]["twisted"] is True
    assert "sampled_variation" not in outcome.results


def test_nonbranching_adds_the_certificate_for_strictly_convex_norms() -> None:
    euclid = run_experiment(
        _config(
            experiment="nonbranching",
            space=PLANE,
            triple={"x": [0.0, 0.0], "y": [1.0, 0.0], "z": [0.0, 1.0]},
            nonbranching={"r": 0.01, "triple_budget": 8},
        )
    )
    linf = run_experiment(
        _config(
            experiment="nonbranching",
            space={"norm": "linf", "dim": 2},
            triple={"x": [0.0, 0.0], "y": [1.0, 0.5], "z": [1.0, -0.5]},
            nonbranching={"r": 0.01, "triple_budget": 8},
        )
    )

    assert euclid.results["scan"]["verdict"] == "positive"
    assert euclid.results["certificate"]["value"] == pytest.approx(0.0)
    assert linf.results["scan"]["verdict"] == "negative"
    assert "certificate" not in linf.results
    assert len(linf.series["nonbranching"]) == 9


def test_single_cone_on_the_uniform_square() -> None:
    outcome = run_experiment(
        _config(
            experiment="cone",
            space=PLANE,
            reference={"name": "uniform", "params": {"low": [0.0, 0.0], "high": [1.0, 1.0]}},
            cone={"x": [0.5, 0.5], "end": [1.0, 0.5], "radii": [0.1, 0.05], "budget": 4000},
        )
    )

    assert outcome.results["mode"] == "single"
    assert outcome.results["k"] == outcome.results["length"] == 0.5
    for value in outcome.results["estimates"]:
        assert value == pytest.approx(0.5, abs=0.05)


def test_cone_needs_a_normed_space() -> None:
    config = _config(
        experiment="cone",
        space={"kind": "finite", "matrix": [[0.0, 1.0], [1.0, 0.0]]},
        reference={"name": "uniform"},
        cone={"x": [0.0, 0.0], "end": [1.0, 0.0]},
    )

    with pytest.raises(ConfigError, match="normed space"):
        run_experiment(config)


def test_doubling_modes() -> None:
    support = run_experiment(
        _config(
            experiment="doubling",
            space=PLANE,
            source={"points": [[0.0, 0.0], [1.0, 0.0]]},
            doubling={"radii": [0.8, 0.4]},
        )
    )
    center = run_experiment(
        _config(
            experiment="doubling",
            space=PLANE,
            reference={"name": "uniform", "params": {"low": [0.0, 0.0], "high": [1.0, 1.0]}},
            doubling={"center": [0.5, 0.5], "radii": [0.1, 0.05], "budget": 2000},
        )
    )

    assert support.results["mode"] == "support"
    assert support.results["max_ratio"] >= 1.0
    assert center.results["mode"] == "center"
    assert len(center.series["doubling"]) == 2


def test_doubling_of_a_density_needs_a_center() -> None:
    config = _config(
        experiment="doubling",
        space=PLANE,
        reference={"name": "uniform", "params": {"low": [0.0, 0.0], "high": [1.0, 1.0]}},
        doubling={"radii": [0.1, 0.05]},
    )

    with pytest.raises(ConfigError, match="center"):
        run_experiment(config)
