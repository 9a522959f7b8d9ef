"""Transportation simplex with Bland's lowest-index pivot rule."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
import logging
from typing import Any

import numpy as np
from scipy.optimize import linprog

from mongelab.errors import ConfigError, InfeasibleError, IterationLimitError
from mongelab.tolerances import TOL

logger = logging.getLogger(__name__)

SENTINEL_FACTOR = 1e6
Cell = tuple[int, int]


@dataclass(frozen=True)
class SimplexSolution:
    flows: np.ndarray
    basis: tuple[Cell, ...]
    u: np.ndarray
    v: np.ndarray
    cost: float
    iterations: int
    degenerate: bool


def check_admissible(costs: np.ndarray, supply: np.ndarray, demand: np.ndarray) -> None:
    """Raise unless some plan with the given marginals avoids every +inf cell."""
    finite = np.argwhere(np.isfinite(costs))
    m, n = costs.shape
    rows = np.zeros((m + n, finite.shape[0]))
    for column, (i, j) in enumerate(finite):
        rows[i, column] = 1.0
        rows[m + j, column] = 1.0
    result = linprog(
        c=np.zeros(finite.shape[0]),
        A_eq=rows,
        b_eq=np.concatenate([supply, demand]),
        bounds=(0, None),
        method="highs",
    )
    if result.status != 0:
        raise InfeasibleError("No finite-cost admissible plan exists for these marginals")


class TransportationSimplex:
    """Single-use exact solver for min <C, P> over plans with given marginals.

    Starts from the north-west corner vertex and pivots with Bland's rule:
    the entering cell is the lowest row-major index with negative reduced cost,
    the leaving cell the lowest index among the tied minimum-ratio cells.
    """

    def __init__(
        self,
        costs: Any,
        supply: Any,
        demand: Any,
        *,
        max_iterations: int | None = None,
    ) -> None:
        self.costs = np.asarray(costs, dtype=float)
        self.supply = np.asarray(supply, dtype=float).reshape(-1)
        self.demand = np.asarray(demand, dtype=float).reshape(-1)
        m, n = self.costs.shape if self.costs.ndim == 2 else (0, 0)
        if self.costs.ndim != 2 or (m, n) != (self.supply.size, self.demand.size):
            raise ConfigError(
                f"Cost matrix shape {self.costs.shape} does not match marginals "
                f"({self.supply.size}, {self.demand.size})"
            )
        if m == 0 or n == 0:
            raise ConfigError("Transport problems need at least one atom per side")
        if np.any(np.isnan(self.costs)) or np.any(self.costs == -np.inf):
            raise ConfigError("Cost matrix entries must be real or +inf")
        gap = abs(float(self.supply.sum()) - float(self.demand.sum()))
        if gap > TOL.marginal:
            raise InfeasibleError(f"Marginal masses differ by {gap:.3e}")

        infinite = np.isinf(self.costs)
        if np.any(np.all(infinite, axis=1)) or np.any(np.all(infinite, axis=0)):
            raise InfeasibleError("A row or column of the cost matrix is entirely +inf")
        finite_values = self.costs[~infinite]
        self.scale = max(1.0, float(np.max(np.abs(finite_values), initial=0.0)))
        self.sentinel_cells = infinite
        self.work = self.costs.copy()
        if np.any(infinite):
            check_admissible(self.costs, self.supply, self.demand)
            self.work[infinite] = self.scale * SENTINEL_FACTOR * (m + n)
        self.tolerance = TOL.optimality * self.scale
        self.max_iterations = max_iterations or 50 * m * n + 1000
        self.iterations = 0
        self.flow = np.zeros((m, n))
        self.basic = np.zeros((m, n), dtype=bool)
        self._north_west_corner()

    @property
    def shape(self) -> tuple[int, int]:
        return self.costs.shape  # type: ignore[return-value]

    def _north_west_corner(self) -> None:
        m, n = self.shape
        rows = self.supply.copy()
        cols = self.demand.copy()
        i = j = 0
        while True:
            amount = min(rows[i], cols[j])
            self.flow[i, j] = max(amount, 0.0)
            self.basic[i, j] = True
            if i == m - 1 and j == n - 1:
                break
            if i == m - 1:
                cols[j] -= amount
                rows[i] -= amount
                j += 1
            elif j == n - 1 or rows[i] <= cols[j]:
                cols[j] -= amount
                rows[i] = 0.0
                i += 1
            else:
                rows[i] -= amount
                cols[j] = 0.0
                j += 1

    def basis(self) -> tuple[Cell, ...]:
        return tuple((int(i), int(j)) for i, j in np.argwhere(self.basic))

    def _adjacency(self) -> list[list[tuple[int, Cell]]]:
        m, n = self.shape
        adjacency: list[list[tuple[int, Cell]]] = [[] for _ in range(m + n)]
        for i, j in self.basis():
            adjacency[i].append((m + j, (i, j)))
            adjacency[m + j].append((i, (i, j)))
        return adjacency

    def potentials(self) -> tuple[np.ndarray, np.ndarray]:
        """Dual potentials with u_0 = 0 and u_i + v_j = c_ij on basic cells."""
        m, n = self.shape
        values = np.full(m + n, np.nan)
        values[0] = 0.0
        adjacency = self._adjacency()
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for other, (i, j) in adjacency[node]:
                if np.isnan(values[other]):
                    values[other] = self.work[i, j] - values[node]
                    queue.append(other)
        return values[:m], values[m:]

    def reduced_costs(self) -> np.ndarray:
        u, v = self.potentials()
        reduced = self.work - u[:, None] - v[None, :]
        reduced[self.basic] = 0.0
        return reduced

    def _tree_path(self, start: int, goal: int) -> list[Cell]:
        parents: dict[int, tuple[int, Cell] | None] = {start: None}
        adjacency = self._adjacency()
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                break
            for other, cell in adjacency[node]:
                if other not in parents:
                    parents[other] = (node, cell)
                    queue.append(other)
        path: list[Cell] = []
        node = goal
        while parents[node] is not None:
            previous, cell = parents[node]  # type: ignore[misc]
            path.append(cell)
            node = previous
        path.reverse()
        return path

    def pivot(self, cell: Cell) -> float:
        """Bring ``cell`` into the basis; returns the mass moved around the cycle."""
        i, j = cell
        if self.basic[i, j]:
            return 0.0
        m, _ = self.shape
        # Cycle: entering (+), then the tree path from column j back to row i.
        path = self._tree_path(m + j, i)
        donors = path[0::2]
        receivers = path[1::2]
        theta = min(self.flow[c] for c in donors)
        tied = sorted(c for c in donors if self.flow[c] == theta)
        leaving = tied[0]
        for c in donors:
            self.flow[c] = max(self.flow[c] - theta, 0.0)
        for c in receivers:
            self.flow[c] += theta
        self.flow[i, j] = theta
        self.flow[leaving] = 0.0
        self.basic[i, j] = True
        self.basic[leaving] = False
        self.iterations += 1
        return float(theta)

    def entering_cell(self) -> Cell | None:
        reduced = self.reduced_costs()
        candidates = np.argwhere(reduced < -self.tolerance)
        if candidates.size == 0:
            return None
        i, j = candidates[0]
        return int(i), int(j)

    def solve(self) -> SimplexSolution:
        while True:
            cell = self.entering_cell()
            if cell is None:
                break
            if self.iterations >= self.max_iterations:
                raise IterationLimitError(
                    f"Transportation simplex exceeded {self.max_iterations} pivots"
                )
            self.pivot(cell)
        return self.solution()

    def solution(self) -> SimplexSolution:
        if np.any(self.flow[self.sentinel_cells] > TOL.mass_floor):
            raise InfeasibleError("Optimal vertex uses a +inf cost cell")
        u, v = self.potentials()
        used = self.flow > 0
        cost = float(np.sum(self.flow[used] * self.costs[used]))
        degenerate = bool(np.any(self.flow[self.basic] <= TOL.mass_floor))
        logger.debug(
            "mongelab.simplex.solved",
            extra={"iterations": self.iterations, "cost": cost, "degenerate": degenerate},
        )
        return SimplexSolution(
            flows=self.flow.copy(),
            basis=self.basis(),
            u=u,
            v=v,
            cost=cost,
            iterations=self.iterations,
            degenerate=degenerate,
        )
