from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import linprog

from mongelab.errors import ConfigError, InfeasibleError, IterationLimitError
from mongelab.seeding import derive_rng
from mongelab.simplex import TransportationSimplex


def _linprog_cost(costs: np.ndarray, supply: np.ndarray, demand: np.ndarray) -> float:
    m, n = costs.shape
    rows = np.zeros((m + n, m * n))
    for i in range(m):
        rows[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        rows[m + j, j::n] = 1.0
    result = linprog(
        costs.reshape(-1),
        A_eq=rows,
        b_eq=np.concatenate([supply, demand]),
        bounds=(0, None),
        method="highs",
    )
    assert result.status == 0
    return float(result.fun)


def test_two_by_two_picks_the_cheap_diagonal() -> None:
    solution = TransportationSimplex([[1.0, 2.0], [2.0, 1.0]], [0.5, 0.5], [0.5, 0.5]).solve()

    np.testing.assert_allclose(solution.flows, [[0.5, 0.0], [0.0, 0.5]])
    assert solution.cost == 1.0
    assert len(solution.basis) == 3


def test_matches_linear_programming_with_unequal_weights() -> None:
    for index in range(25):
        rng = derive_rng(21, index)
        m = int(rng.integers(1, 7))
        n = int(rng.integers(1, 7))
        costs = rng.uniform(0.0, 5.0, size=(m, n))
        supply = rng.uniform(0.1, 1.0, size=m)
        supply /= supply.sum()
        demand = rng.uniform(0.1, 1.0, size=n)
        demand /= demand.sum()

        solution = TransportationSimplex(costs, supply, demand).solve()

        assert solution.cost == pytest.approx(_linprog_cost(costs, supply, demand), abs=1e-8)
        np.testing.assert_allclose(solution.flows.sum(axis=1), supply, atol=1e-12)
        np.testing.assert_allclose(solution.flows.sum(axis=0), demand, atol=1e-12)


def test_optimal_potentials_certify_the_vertex() -> None:
    rng = derive_rng(4, 0)
    costs = rng.uniform(0.0, 1.0, size=(4, 5))
    solver = TransportationSimplex(costs, np.full(4, 0.25), np.full(5, 0.2))

    solution = solver.solve()

    for i, j in solution.basis:
        assert solution.u[i] + solution.v[j] == pytest.approx(costs[i, j])
    assert np.all(solver.reduced_costs() >= -solver.tolerance)
    assert len(solution.basis) == 4 + 5 - 1


def test_degenerate_identity_terminates_at_zero_cost() -> None:
    points = np.linspace(0.0, 1.0, 5)
    costs = (points[:, None] - points[None, :]) ** 2

    solution = TransportationSimplex(costs, np.full(5, 0.2), np.full(5, 0.2)).solve()

    assert solution.cost == 0.0
    assert solution.degenerate


def test_infinite_cells_are_avoided() -> None:
    costs = np.array([[math.inf, 1.0], [1.0, math.inf]])

    solution = TransportationSimplex(costs, [0.5, 0.5], [0.5, 0.5]).solve()

    np.testing.assert_allclose(solution.flows, [[0.0, 0.5], [0.5, 0.0]])
    assert solution.cost == 1.0


def test_inadmissible_infinite_pattern_is_infeasible() -> None:
    costs = np.array(
        [
            [1.0, math.inf, math.inf],
            [1.0, math.inf, math.inf],
            [1.0, 1.0, 1.0],
        ]
    )

    with pytest.raises(InfeasibleError):
        TransportationSimplex(costs, np.full(3, 1 / 3), np.full(3, 1 / 3))


def test_infinite_row_is_infeasible() -> None:
    with pytest.raises(InfeasibleError):
        TransportationSimplex([[math.inf, math.inf], [1.0, 1.0]], [0.5, 0.5], [0.5, 0.5])


def test_unbalanced_marginals_are_infeasible() -> None:
    with pytest.raises(InfeasibleError, match="differ"):
        TransportationSimplex([[1.0]], [1.0], [0.5])


def test_invalid_cost_matrices_are_rejected() -> None:
    with pytest.raises(ConfigError):
        TransportationSimplex([[math.nan]], [1.0], [1.0])
    with pytest.raises(ConfigError):
        TransportationSimplex([[1.0, 2.0]], [1.0], [1.0])


def test_iteration_limit_is_enforced() -> None:
    indices = np.arange(4)
    costs = 10.0 - (indices[:, None] - indices[None, :]) ** 2.0

    with pytest.raises(IterationLimitError):
        TransportationSimplex(
            costs, np.full(4, 0.25), np.full(4, 0.25), max_iterations=1
        ).solve()
