"""Discrete Kantorovich problem: costs, plans, diagnostics and the uniqueness probe."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Literal, Mapping

import numpy as np
import pandas as pd

from mongelab.errors import ConfigError, NumericalError, ZeroMassError
from mongelab.hashing import compute_measure_hash
from mongelab.measures import DiscreteMeasure
from mongelab.seeding import derive_rng
from mongelab.simplex import TransportationSimplex
from mongelab.spaces import MetricSpace, as_point, paired_distances, pairwise_distances
from mongelab.tolerances import TOL, ZERO_REDUCED_COST

logger = logging.getLogger(__name__)

CostKind = Literal["squared_distance", "distance", "power", "custom"]
COST_KINDS: tuple[str, ...] = ("squared_distance", "distance", "power", "custom")
PLAN_COLUMNS = ("i", "j", "mass")
# Cost perturbation used to pull a zero-reduced-cost cell into an optimal vertex.
PERTURBATION_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class CostFunction:
    """c(x, y) as a power of the metric, an explicit table, or a callable."""

    kind: CostKind
    space: MetricSpace | None = None
    exponent: float = 2.0
    table: np.ndarray | None = field(default=None, repr=False)
    func: Callable[[Any, Any], float] | None = field(default=None, repr=False)
    factor: float = 1.0
    name: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in COST_KINDS:
            raise ConfigError(f"Unknown cost kind '{self.kind}'")
        if self.kind != "custom" and self.space is None:
            raise ConfigError(f"Cost kind '{self.kind}' needs a metric space")
        if self.kind == "power" and not self.exponent >= 1.0:
            raise ConfigError(f"Expected power cost exponent >= 1, got {self.exponent}")
        if self.kind == "custom" and self.table is None and self.func is None:
            raise ConfigError("Custom cost needs a table or a callable")
        if not self.factor > 0:
            raise ConfigError(f"Expected cost scale factor > 0, got {self.factor}")

    @classmethod
    def squared_distance(cls, space: MetricSpace) -> CostFunction:
        return cls("squared_distance", space=space, exponent=2.0)

    @classmethod
    def distance(cls, space: MetricSpace) -> CostFunction:
        return cls("distance", space=space, exponent=1.0)

    @classmethod
    def power(cls, space: MetricSpace, exponent: float) -> CostFunction:
        return cls("power", space=space, exponent=exponent)

    @classmethod
    def from_table(cls, table: Any, name: str = "table") -> CostFunction:
        values = np.asarray(table, dtype=float)
        if values.ndim != 2:
            raise ConfigError(f"Expected a 2-D cost table, got shape {values.shape}")
        return cls("custom", table=values, name=name)

    @classmethod
    def from_callable(
        cls,
        func: Callable[[Any, Any], float],
        name: str = "callable",
        space: MetricSpace | None = None,
    ) -> CostFunction:
        return cls("custom", func=func, name=name, space=space)

    def scaled(self, factor: float) -> CostFunction:
        return replace(self, factor=self.factor * factor)

    def _from_distance(self, d: np.ndarray) -> np.ndarray:
        if self.kind == "distance":
            return d * self.factor
        return d**self.exponent * self.factor

    def pairwise(self, xs: Any, ys: Any) -> np.ndarray:
        if self.kind != "custom":
            assert self.space is not None
            return self._from_distance(pairwise_distances(self.space, xs, ys))
        if self.table is not None:
            rows = np.asarray(xs, dtype=int).reshape(-1)
            cols = np.asarray(ys, dtype=int).reshape(-1)
            return self.table[np.ix_(rows, cols)] * self.factor
        assert self.func is not None
        left = list(xs)
        right = list(ys)
        values = np.array(
            [[float(self.func(x, y)) for y in right] for x in left], dtype=float
        ).reshape(len(left), len(right))
        return values * self.factor

    def paired(self, xs: Any, ys: Any) -> np.ndarray:
        """Row-wise c(x_k, y_k); a single point on either side broadcasts."""
        if self.kind != "custom":
            assert self.space is not None
            return self._from_distance(paired_distances(self.space, xs, ys))
        if self.table is not None:
            rows = np.asarray(xs, dtype=int)
            cols = np.asarray(ys, dtype=int)
            return np.atleast_1d(self.table[rows, cols] * self.factor)
        assert self.func is not None
        left = np.asarray(xs, dtype=float)
        right = np.asarray(ys, dtype=float)
        left, right = np.broadcast_arrays(np.atleast_2d(left), np.atleast_2d(right))
        return np.array([float(self.func(a, b)) for a, b in zip(left, right)]) * self.factor

    def __call__(self, x: Any, y: Any) -> float:
        if self.kind != "custom":
            assert self.space is not None
            d = paired_distances(self.space, [as_point(self.space, x)], [as_point(self.space, y)])
            return float(self._from_distance(d)[0])
        if self.table is not None:
            return float(self.table[int(x), int(y)] * self.factor)
        assert self.func is not None
        return float(self.func(x, y)) * self.factor

    def describe(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"kind": self.kind}
        if self.kind == "power":
            payload["exponent"] = self.exponent
        if self.kind == "custom":
            payload["name"] = self.name
        if self.factor != 1.0:
            payload["factor"] = self.factor
        return payload


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling; rows index source atoms, columns target atoms."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray
    cost: float | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dense(
        cls,
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        matrix: Any,
        *,
        cost: float | None = None,
        metadata: Mapping[str, Any] | None = None,
    ) -> TransportPlan:
        dense = np.asarray(matrix, dtype=float)
        if dense.shape != (source.size, target.size):
            raise ConfigError(
                f"Plan shape {dense.shape} does not match ({source.size}, {target.size})"
            )
        rows, cols = np.nonzero(dense > TOL.mass_floor)
        return cls(
            source=source,
            target=target,
            rows=rows.astype(int),
            cols=cols.astype(int),
            masses=dense[rows, cols],
            cost=cost,
            metadata=dict(metadata or {}),
        )

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [
            (int(i), int(j), float(mass))
            for i, j, mass in zip(self.rows, self.cols, self.masses)
        ]

    def dense(self) -> np.ndarray:
        matrix = np.zeros((self.source.size, self.target.size))
        matrix[self.rows, self.cols] = self.masses
        return matrix

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.masses, minlength=self.source.size)

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.masses, minlength=self.target.size)


@dataclass(frozen=True)
class PlanDiagnostics:
    mapness: float
    row_entropy: tuple[float, ...]
    diagonal_mass: float
    extracted_map: tuple[int, ...] | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "mapness": self.mapness,
            "row_entropy": list(self.row_entropy),
            "diagonal_mass": self.diagonal_mass,
            "extracted_map": list(self.extracted_map) if self.extracted_map else None,
        }


@dataclass(frozen=True)
class UniquenessReport:
    verdict: Literal["unique", "multiple"]
    plan: TransportPlan
    witness: tuple[TransportPlan, TransportPlan] | None
    metadata: Mapping[str, Any]

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "verdict": self.verdict,
            "optimal_cost": self.plan.cost,
            "metadata": dict(self.metadata),
        }
        if self.witness is not None:
            payload["witness"] = [
                {
                    "cost": plan.cost,
                    "mapness": mapness(plan).mapness,
                    "entries": [list(entry) for entry in plan.entries],
                }
                for plan in self.witness
            ]
        return payload


def cost_matrix(c: CostFunction, mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Dense matrix of c(x_i, y_j); NaN entries become +inf and are logged."""
    if c.table is not None:
        if c.table.shape != (mu.size, nu.size):
            raise ConfigError(
                f"Cost table shape {c.table.shape} does not match ({mu.size}, {nu.size})"
            )
        matrix = c.table.astype(float) * c.factor
    else:
        matrix = c.pairwise(mu.points, nu.points)
    matrix = np.array(matrix, dtype=float)
    if np.any(matrix < 0):
        raise ConfigError("Cost entries must be nonnegative")
    non_finite = ~np.isfinite(matrix)
    if np.any(non_finite):
        matrix[non_finite] = math.inf
        logger.warning(
            "mongelab.cost.non_finite",
            extra={"cells": int(non_finite.sum()), "kind": c.kind},
        )
    return matrix


def _cost_of(matrix: np.ndarray, flows: np.ndarray) -> float:
    used = flows > 0
    return float(np.sum(flows[used] * matrix[used]))


def check_marginals(plan: TransportPlan) -> None:
    row_gap = float(np.max(np.abs(plan.row_sums() - plan.source.weights)))
    col_gap = float(np.max(np.abs(plan.col_sums() - plan.target.weights)))
    if row_gap > TOL.marginal or col_gap > TOL.marginal:
        raise NumericalError(
            f"Plan marginals drift from the measures (rows {row_gap:.3e}, cols {col_gap:.3e})"
        )


def _solve_matrix(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    matrix: np.ndarray,
) -> tuple[TransportPlan, TransportationSimplex]:
    solver = TransportationSimplex(matrix, mu.weights, nu.weights)
    solution = solver.solve()
    plan = TransportPlan.from_dense(
        mu,
        nu,
        solution.flows,
        cost=solution.cost,
        metadata={"iterations": solution.iterations, "degenerate": solution.degenerate},
    )
    check_marginals(plan)
    return plan, solver


def solve_kantorovich(mu: DiscreteMeasure, nu: DiscreteMeasure, c: CostFunction) -> TransportPlan:
    logger.info("mongelab.solve.start", extra={"rows": mu.size, "cols": nu.size})
    plan, _ = _solve_matrix(mu, nu, cost_matrix(c, mu, nu))
    logger.info(
        "mongelab.solve.done",
        extra={"optimal_cost": plan.cost, "entries": len(plan.masses)},
    )
    return plan


def plan_cost(plan: TransportPlan, c: CostFunction) -> float:
    matrix = cost_matrix(c, plan.source, plan.target)
    return float(np.sum(plan.masses * matrix[plan.rows, plan.cols]))


def mapness(plan: TransportPlan, atom_tol: float = TOL.mass_floor) -> PlanDiagnostics:
    """Map-ness, conditional entropies and the diagonal mass of the row-product measure."""
    if atom_tol < TOL.mass_floor:
        raise ConfigError(f"Expected atom_tol >= {TOL.mass_floor}, got {atom_tol}")
    weights = plan.source.weights
    mapped_weight = 0.0
    entropies: list[float] = []
    diagonal = 0.0
    targets: list[int] = []
    for i in range(plan.source.size):
        in_row = (plan.rows == i) & (plan.masses > atom_tol)
        conditional = plan.masses[in_row] / weights[i]
        if conditional.size == 1:
            mapped_weight += weights[i]
            targets.append(int(plan.cols[in_row][0]))
        positive = conditional[conditional > 0]
        entropies.append(float(-np.sum(positive * np.log(positive))) + 0.0)
        diagonal += weights[i] * float(np.sum(conditional**2))
    score = mapped_weight / float(weights.sum())
    extracted = tuple(targets) if len(targets) == plan.source.size else None
    return PlanDiagnostics(
        mapness=float(score),
        row_entropy=tuple(entropies),
        diagonal_mass=float(diagonal),
        extracted_map=extracted,
    )


def product_plan(mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportPlan:
    return TransportPlan.from_dense(mu, nu, np.outer(mu.weights, nu.weights))


def mix_plans(first: TransportPlan, second: TransportPlan, weight: float = 0.5) -> TransportPlan:
    """Convex combination weight*first + (1 - weight)*second of plans with shared marginals."""
    if not 0 <= weight <= 1:
        raise ConfigError(f"Expected a mixing weight in [0, 1], got {weight}")
    if first.dense().shape != second.dense().shape:
        raise ConfigError("Plans must share their marginals to be mixed")
    cost = None
    if first.cost is not None and second.cost is not None:
        cost = weight * first.cost + (1.0 - weight) * second.cost
    mixed = TransportPlan.from_dense(
        first.source,
        first.target,
        weight * first.dense() + (1.0 - weight) * second.dense(),
        cost=cost,
    )
    check_marginals(mixed)
    return mixed


def _in_closed_ball(
    space: MetricSpace,
    points: np.ndarray,
    ball: tuple[Any, float],
) -> np.ndarray:
    center, radius = ball
    if radius < 0:
        raise ConfigError(f"Expected a nonnegative ball radius, got {radius}")
    if points.ndim == 1:
        others = np.full(points.shape[0], str(center), dtype=object)
        return paired_distances(space, points, others) <= radius
    return paired_distances(space, points, as_point(space, center)) <= radius


def restrict_plan(
    plan: TransportPlan,
    space: MetricSpace,
    source_ball: tuple[Any, float],
    target_ball: tuple[Any, float],
) -> TransportPlan:
    """Normalized restriction of the plan to the product of two closed balls."""
    keep_rows = _in_closed_ball(space, plan.source.points, source_ball)
    keep_cols = _in_closed_ball(space, plan.target.points, target_ball)
    kept = keep_rows[plan.rows] & keep_cols[plan.cols]
    captured = float(plan.masses[kept].sum())
    if captured <= TOL.mass_floor:
        raise ZeroMassError("Restriction balls capture no plan mass")

    rows = plan.rows[kept]
    cols = plan.cols[kept]
    masses = plan.masses[kept] / captured
    source_index = np.unique(rows)
    target_index = np.unique(cols)
    row_map = {int(old): new for new, old in enumerate(source_index)}
    col_map = {int(old): new for new, old in enumerate(target_index)}
    new_rows = np.array([row_map[int(i)] for i in rows], dtype=int)
    new_cols = np.array([col_map[int(j)] for j in cols], dtype=int)

    source = DiscreteMeasure(
        points=plan.source.points[source_index],
        weights=np.bincount(new_rows, weights=masses, minlength=source_index.size),
    )
    target = DiscreteMeasure(
        points=plan.target.points[target_index],
        weights=np.bincount(new_cols, weights=masses, minlength=target_index.size),
    )
    restricted = TransportPlan(
        source=source,
        target=target,
        rows=new_rows,
        cols=new_cols,
        masses=masses,
        metadata={
            "captured_mass": captured,
            "source_index": source_index.tolist(),
            "target_index": target_index.tolist(),
        },
    )
    check_marginals(restricted)
    return restricted


def is_optimal(plan: TransportPlan, c: CostFunction) -> tuple[bool, float]:
    """Compare the plan's cost with a fresh solve on its own marginals: (optimal, gap)."""
    matrix = cost_matrix(c, plan.source, plan.target)
    achieved = float(np.sum(plan.masses * matrix[plan.rows, plan.cols]))
    best, _ = _solve_matrix(plan.source, plan.target, matrix)
    assert best.cost is not None
    scale = max(1.0, float(np.max(matrix[np.isfinite(matrix)], initial=0.0)))
    gap = achieved - best.cost
    return gap <= TOL.optimality * scale, gap


def _plans_differ(first: np.ndarray, second: np.ndarray) -> bool:
    return float(np.max(np.abs(first - second))) > TOL.plan_distinct


def uniqueness_probe(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    c: CostFunction,
    trials: int = 8,
    seed: int = 0,
) -> UniquenessReport:
    """Search for a second optimal vertex; "unique" means none was found.

    Candidates in order: the product plan, each zero-reduced-cost cell forced
    into the basis (with a small cost tilt when the forced pivot is degenerate),
    then re-solves under random permutations of atom order.
    """
    if trials < 0:
        raise ConfigError(f"Expected trials >= 0, got {trials}")
    matrix = cost_matrix(c, mu, nu)
    base, solver = _solve_matrix(mu, nu, matrix)
    assert base.cost is not None
    optimum = base.cost
    scale = solver.scale
    tolerance = TOL.optimality * scale
    reduced = solver.reduced_costs()
    zero_cells = [
        (int(i), int(j))
        for i, j in np.argwhere((np.abs(reduced) <= ZERO_REDUCED_COST * scale) & ~solver.basic)
    ]
    degenerate = bool(base.metadata.get("degenerate", False))
    metadata: dict[str, Any] = {
        "degenerate_basis": degenerate,
        "zero_reduced_cost_cells": len(zero_cells),
        "trials": trials,
    }
    base_flows = base.dense()

    def witness(flows: np.ndarray, method: str) -> UniquenessReport:
        alternative = TransportPlan.from_dense(
            mu, nu, flows, cost=_cost_of(matrix, flows), metadata={"method": method}
        )
        assert alternative.cost is not None
        midpoint = mix_plans(base, alternative)
        metadata.update(
            {
                "method": method,
                "cost_difference": abs(alternative.cost - optimum),
                "midpoint_cost": _cost_of(matrix, midpoint.dense()),
                "midpoint_mapness": mapness(midpoint).mapness,
            }
        )
        logger.info("mongelab.probe.multiple", extra={"method": method})
        return UniquenessReport("multiple", base, (base, alternative), metadata)

    product = np.outer(mu.weights, nu.weights)
    if np.all(np.isfinite(matrix[product > 0])):
        if abs(_cost_of(matrix, product) - optimum) <= tolerance and _plans_differ(
            product, base_flows
        ):
            return witness(product, "product_plan")

    for cell in zero_cells:
        forced = copy.deepcopy(solver)
        forced.pivot(cell)
        flows = forced.solve().flows
        if abs(_cost_of(matrix, flows) - optimum) <= tolerance and _plans_differ(
            flows, base_flows
        ):
            return witness(flows, "forced_basis")
        tilted = matrix.copy()
        tilted[cell] -= min(PERTURBATION_FACTOR * tolerance, tilted[cell])
        flows, _ = _tilted_flows(mu, nu, tilted)
        if abs(_cost_of(matrix, flows) - optimum) <= tolerance and _plans_differ(
            flows, base_flows
        ):
            return witness(flows, "tilted_cell")

    for trial in range(trials):
        rng = derive_rng(seed, trial)
        row_order = rng.permutation(mu.size)
        col_order = rng.permutation(nu.size)
        permuted = TransportationSimplex(
            matrix[np.ix_(row_order, col_order)],
            mu.weights[row_order],
            nu.weights[col_order],
        ).solve()
        flows = np.zeros_like(base_flows)
        flows[np.ix_(row_order, col_order)] = permuted.flows
        flows[flows <= TOL.mass_floor] = 0.0
        if abs(_cost_of(matrix, flows) - optimum) <= tolerance and _plans_differ(
            flows, base_flows
        ):
            return witness(flows, "permutation")

    logger.info("mongelab.probe.unique", extra={"trials": trials, "zero_cells": len(zero_cells)})
    return UniquenessReport("unique", base, None, metadata)


def _tilted_flows(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    tilted: np.ndarray,
) -> tuple[np.ndarray, float]:
    solution = TransportationSimplex(tilted, mu.weights, nu.weights).solve()
    flows = solution.flows.copy()
    flows[flows <= TOL.mass_floor] = 0.0
    return flows, solution.cost


def plan_frame(plan: TransportPlan) -> pd.DataFrame:
    return pd.DataFrame(
        {
            PLAN_COLUMNS[0]: plan.rows,
            PLAN_COLUMNS[1]: plan.cols,
            PLAN_COLUMNS[2]: plan.masses,
        }
    )


def plan_header(plan: TransportPlan, c: CostFunction | None = None) -> dict[str, Any]:
    return {
        "source_hash": compute_measure_hash(plan.source.points, plan.source.weights),
        "target_hash": compute_measure_hash(plan.target.points, plan.target.weights),
        "cost": c.describe() if c is not None else None,
        "optimal_cost": plan.cost,
        "rows": plan.source.size,
        "cols": plan.target.size,
        "entries": int(plan.masses.size),
    }


def save_plan(
    plan: TransportPlan,
    directory: str | Path,
    c: CostFunction | None = None,
    stem: str = "plan",
) -> tuple[Path, Path]:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    csv_path = target / f"{stem}.csv"
    json_path = target / f"{stem}.json"
    plan_frame(plan).to_csv(csv_path, index=False, float_format="%.17g")
    json_path.write_text(json.dumps(plan_header(plan, c), indent=2, sort_keys=True))
    return csv_path, json_path


def load_plan(
    csv_path: str | Path,
    source: DiscreteMeasure,
    target: DiscreteMeasure,
) -> TransportPlan:
    path = Path(csv_path)
    if not path.exists():
        raise ConfigError(f"Plan CSV not found: {path}")
    frame = pd.read_csv(path)
    missing = [column for column in PLAN_COLUMNS if column not in frame.columns]
    if missing:
        raise ConfigError(f"Plan CSV {path} is missing columns {missing}")
    header_path = path.with_suffix(".json")
    cost = None
    if header_path.exists():
        header = json.loads(header_path.read_text())
        if header.get("source_hash") != compute_measure_hash(source.points, source.weights):
            raise ConfigError(f"Plan {path} was written for a different source measure")
        if header.get("target_hash") != compute_measure_hash(target.points, target.weights):
            raise ConfigError(f"Plan {path} was written for a different target measure")
        cost = header.get("optimal_cost")
    plan = TransportPlan(
        source=source,
        target=target,
        rows=frame["i"].to_numpy(dtype=int),
        cols=frame["j"].to_numpy(dtype=int),
        masses=frame["mass"].to_numpy(dtype=float),
        cost=cost,
    )
    check_marginals(plan)
    return plan
