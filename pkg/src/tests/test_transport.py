from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

from mongelab.errors import ConfigError, NumericalError, ZeroMassError
from mongelab.instances import Instance, identity, linf_two_segments
from mongelab.measures import DiscreteMeasure
from mongelab.oracle import brute_force_ot
from mongelab.seeding import derive_rng
from mongelab.spaces import MetricSpace, NormSpec
from mongelab.transport import (
    CostFunction,
    TransportPlan,
    check_marginals,
    cost_matrix,
    is_optimal,
    load_plan,
    mapness,
    mix_plans,
    plan_cost,
    product_plan,
    restrict_plan,
    save_plan,
    solve_kantorovich,
    uniqueness_probe,
)


def _line() -> MetricSpace:
    return MetricSpace.normed(NormSpec("euclidean", 1))


def test_cost_function_validation(plane: MetricSpace) -> None:
    with pytest.raises(ConfigError):
        CostFunction.power(plane, 0.5)
    with pytest.raises(ConfigError):
        CostFunction("custom")
    with pytest.raises(ConfigError):
        CostFunction("distance")


def test_cost_function_forms_agree(plane: MetricSpace) -> None:
    cost = CostFunction.power(plane, 3.0)
    xs = np.array([[0.0, 0.0], [1.0, 1.0]])
    ys = np.array([[2.0, 0.0], [1.0, 0.0]])

    table = cost.pairwise(xs, ys)

    assert table[0, 0] == pytest.approx(8.0)
    assert cost(xs[1], ys[1]) == pytest.approx(1.0)
    np.testing.assert_allclose(cost.paired(xs, ys), np.diag(table))
    np.testing.assert_allclose(cost.paired(xs, ys[0]), table[:, 0])


def test_table_and_callable_costs() -> None:
    table = CostFunction.from_table([[0.0, 2.0], [3.0, 0.0]])
    func = CostFunction.from_callable(lambda a, b: float(abs(a - b)))

    assert table(1, 0) == 3.0
    np.testing.assert_allclose(table.paired([0, 1], [1, 1]), [2.0, 0.0])
    assert func(0.5, 2.0) == 1.5
    assert table.scaled(2.0)(0, 1) == 4.0


def test_cost_matrix_marks_nan_as_infinite_and_rejects_negatives() -> None:
    mu = DiscreteMeasure.from_atoms([[0.0], [1.0]])
    nu = DiscreteMeasure.from_atoms([[0.0], [1.0]])

    matrix = cost_matrix(CostFunction.from_table([[0.0, math.nan], [1.0, 0.0]]), mu, nu)

    assert matrix[0, 1] == math.inf
    with pytest.raises(ConfigError, match="nonnegative"):
        cost_matrix(CostFunction.from_table([[0.0, -1.0], [1.0, 0.0]]), mu, nu)
    with pytest.raises(ConfigError, match="shape"):
        cost_matrix(CostFunction.from_table([[0.0]]), mu, nu)


def test_crossing_instance_solves_to_the_non_crossing_map(crossing: Instance) -> None:
    plan = solve_kantorovich(crossing.mu, crossing.nu, crossing.cost)

    assert plan.cost == 1.0
    assert plan.entries == [(0, 0, 0.5), (1, 1, 0.5)]
    diagnostics = mapness(plan)
    assert diagnostics.mapness == 1.0
    assert diagnostics.extracted_map == (0, 1)
    assert diagnostics.row_entropy == (0.0, 0.0)
    assert plan.metadata["iterations"] == 0


def test_solver_agrees_with_permutation_enumeration(squared_cost: CostFunction) -> None:
    for index in range(30):
        rng = derive_rng(8, index)
        n = int(rng.integers(1, 7))
        xs = rng.uniform(0.0, 1.0, size=(n, 2))
        ys = rng.uniform(0.0, 1.0, size=(n, 2))

        plan = solve_kantorovich(
            DiscreteMeasure.from_atoms(xs), DiscreteMeasure.from_atoms(ys), squared_cost
        )

        assert plan.cost == pytest.approx(brute_force_ot(xs, ys).value, abs=1e-9)
        assert plan_cost(plan, squared_cost) == pytest.approx(plan.cost, abs=1e-10)


def test_solver_agrees_with_linear_programming_on_unequal_weights(
    squared_cost: CostFunction,
) -> None:
    rng = derive_rng(9, 0)
    mu = DiscreteMeasure.from_atoms(
        rng.uniform(0.0, 1.0, size=(5, 2)), rng.uniform(0.1, 1.0, size=5), normalize=True
    )
    nu = DiscreteMeasure.from_atoms(
        rng.uniform(0.0, 1.0, size=(3, 2)), rng.uniform(0.1, 1.0, size=3), normalize=True
    )
    matrix = cost_matrix(squared_cost, mu, nu)
    rows = np.zeros((8, 15))
    for i in range(5):
        rows[i, i * 3 : (i + 1) * 3] = 1.0
    for j in range(3):
        rows[5 + j, j::3] = 1.0
    reference = linprog(
        matrix.reshape(-1),
        A_eq=rows,
        b_eq=np.concatenate([mu.weights, nu.weights]),
        bounds=(0, None),
        method="highs",
    )

    plan = solve_kantorovich(mu, nu, squared_cost)

    assert plan.cost == pytest.approx(reference.fun, abs=1e-9)
    check_marginals(plan)


def test_finite_space_with_labelled_atoms() -> None:
    space = MetricSpace.finite(
        ["a", "b", "c"], [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]
    )
    mu = DiscreteMeasure.from_atoms(["a", "b"], [0.5, 0.5])
    nu = DiscreteMeasure.from_atoms(["b", "c"], [0.5, 0.5])

    plan = solve_kantorovich(mu, nu, CostFunction.squared_distance(space))

    assert plan.cost == 1.0
    assert mapness(plan).extracted_map == (0, 1)


def test_check_marginals_detects_drift(crossing: Instance) -> None:
    plan = TransportPlan.from_dense(crossing.mu, crossing.nu, [[0.5, 0.0], [0.0, 0.4]])

    with pytest.raises(NumericalError):
        check_marginals(plan)


def test_product_plan_diagnostics(crossing: Instance) -> None:
    diagnostics = mapness(product_plan(crossing.mu, crossing.nu))

    assert diagnostics.mapness == 0.0
    assert diagnostics.extracted_map is None
    np.testing.assert_allclose(diagnostics.row_entropy, [math.log(2.0)] * 2)
    assert diagnostics.diagonal_mass == pytest.approx(0.5)
    assert diagnostics.to_dict()["extracted_map"] is None


def test_mix_plans_is_a_convex_combination(crossing: Instance) -> None:
    plan = solve_kantorovich(crossing.mu, crossing.nu, crossing.cost)
    other = product_plan(crossing.mu, crossing.nu)

    mixed = mix_plans(plan, other, 0.5)

    np.testing.assert_allclose(mixed.dense(), [[0.375, 0.125], [0.125, 0.375]])
    with pytest.raises(ConfigError):
        mix_plans(plan, other, 1.5)


def test_mixing_distinct_map_plans_is_not_a_map() -> None:
    rng = derive_rng(31, 0)
    mu = DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(5, 2)))
    nu = DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(5, 2)))
    first = TransportPlan.from_dense(mu, nu, np.eye(5) / 5.0)
    second = TransportPlan.from_dense(mu, nu, np.roll(np.eye(5), 1, axis=1) / 5.0)
    partial = TransportPlan.from_dense(mu, nu, np.eye(5)[[1, 0, 2, 3, 4]] / 5.0)

    assert mapness(first).mapness == 1.0
    assert mapness(second).mapness == 1.0
    for weight in (0.1, 0.5, 0.9):
        assert mapness(mix_plans(first, second, weight)).mapness < 1.0
    mixed = mapness(mix_plans(first, partial, 0.5))
    assert mixed.mapness == pytest.approx(0.6)
    assert mixed.extracted_map is None


def test_restrict_plan_to_a_ball_pair(crossing: Instance) -> None:
    plan = solve_kantorovich(crossing.mu, crossing.nu, crossing.cost)

    restricted = restrict_plan(
        plan, crossing.space, ([0.0, 0.0], 0.1), ([0.0, 1.0], 0.1)
    )

    assert restricted.metadata["captured_mass"] == 0.5
    np.testing.assert_allclose(restricted.masses, [1.0])
    np.testing.assert_allclose(restricted.source.points, [[0.0, 0.0]])
    with pytest.raises(ZeroMassError):
        restrict_plan(plan, crossing.space, ([0.0, 0.0], 0.1), ([1.0, 1.0], 0.1))


def test_is_optimal_flags_the_product_plan(crossing: Instance) -> None:
    plan = solve_kantorovich(crossing.mu, crossing.nu, crossing.cost)

    assert is_optimal(plan, crossing.cost) == (True, 0.0)
    optimal, gap = is_optimal(product_plan(crossing.mu, crossing.nu), crossing.cost)
    assert not optimal
    assert gap == pytest.approx(0.5)


def test_uniqueness_probe_on_the_crossing_instance(crossing: Instance) -> None:
    report = uniqueness_probe(crossing.mu, crossing.nu, crossing.cost)

    assert report.verdict == "unique"
    assert report.witness is None
    assert report.to_dict()["optimal_cost"] == 1.0


def test_uniqueness_probe_finds_two_plans_on_linf_segments() -> None:
    instance = linf_two_segments(4)

    report = uniqueness_probe(instance.mu, instance.nu, instance.cost)

    assert report.verdict == "multiple"
    assert report.witness is not None
    first, second = report.witness
    assert first.cost == pytest.approx(1.0)
    assert second.cost == pytest.approx(1.0)
    assert sorted(mapness(plan).mapness for plan in report.witness) == [0.0, 1.0]
    assert report.metadata["method"] == "product_plan"
    assert report.metadata["midpoint_cost"] == pytest.approx(1.0)
    assert len(report.to_dict()["witness"]) == 2


def test_uniqueness_probe_finds_book_shifting_ties() -> None:
    mu = DiscreteMeasure.from_atoms([[0.0], [1.0]])
    nu = DiscreteMeasure.from_atoms([[1.0], [2.0]])

    report = uniqueness_probe(mu, nu, CostFunction.distance(_line()))

    assert report.verdict == "multiple"
    assert report.witness is not None
    assert report.witness[0].cost == pytest.approx(report.witness[1].cost)
    assert not np.allclose(report.witness[0].dense(), report.witness[1].dense())


def test_uniqueness_probe_identity_is_unique() -> None:
    instance = identity(5, seed=3)

    report = uniqueness_probe(instance.mu, instance.nu, instance.cost, trials=4, seed=1)

    assert report.verdict == "unique"
    assert report.plan.cost == 0.0


def test_uniqueness_probe_rejects_negative_trials(crossing: Instance) -> None:
    with pytest.raises(ConfigError):
        uniqueness_probe(crossing.mu, crossing.nu, crossing.cost, trials=-1)


def test_saved_plan_loads_back_for_the_same_measures(
    tmp_path: Path, crossing: Instance
) -> None:
    plan = solve_kantorovich(crossing.mu, crossing.nu, crossing.cost)

    csv_path, json_path = save_plan(plan, tmp_path, crossing.cost)
    header = json.loads(json_path.read_text())
    loaded = load_plan(csv_path, crossing.mu, crossing.nu)

    assert csv_path.read_text().splitlines()[0] == "i,j,mass"
    assert header["optimal_cost"] == 1.0
    assert header["cost"] == {"kind": "squared_distance"}
    assert loaded.cost == 1.0
    np.testing.assert_array_equal(loaded.dense(), plan.dense())


def test_saved_plan_rejects_other_measures(tmp_path: Path, crossing: Instance) -> None:
    plan = solve_kantorovich(crossing.mu, crossing.nu, crossing.cost)
    csv_path, _ = save_plan(plan, tmp_path)
    other = DiscreteMeasure.from_atoms([[5.0, 5.0], [6.0, 6.0]])

    with pytest.raises(ConfigError, match="different source"):
        load_plan(csv_path, other, crossing.nu)
