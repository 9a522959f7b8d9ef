"""c-cyclical monotonicity certificates by negative-cycle search."""

from __future__ import annotations

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np
import pandas as pd

from mongelab.errors import ConfigError
from mongelab.tolerances import TOL
from mongelab.transport import CostFunction, TransportPlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MonotonePairSet:
    sources: np.ndarray
    targets: np.ndarray
    cost: CostFunction | None = None

    @classmethod
    def from_pairs(
        cls,
        sources: Any,
        targets: Any,
        cost: CostFunction | None = None,
    ) -> MonotonePairSet:
        xs = np.asarray(sources)
        ys = np.asarray(targets)
        if xs.shape[0] == 0:
            raise ConfigError("A pair set needs at least one pair")
        if xs.shape[0] != ys.shape[0]:
            raise ConfigError(
                f"Expected matching pair counts, got {xs.shape[0]} sources "
                f"and {ys.shape[0]} targets"
            )
        if xs.dtype.kind == "f" and xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        if ys.dtype.kind == "f" and ys.ndim == 1:
            ys = ys.reshape(-1, 1)
        keys = [
            (tuple(np.atleast_1d(x).tolist()), tuple(np.atleast_1d(y).tolist()))
            for x, y in zip(xs, ys)
        ]
        seen: dict[tuple[Any, Any], int] = {}
        for index, key in enumerate(keys):
            seen.setdefault(key, index)
        keep = sorted(seen.values())
        return cls(sources=xs[keep], targets=ys[keep], cost=cost)

    @property
    def size(self) -> int:
        return int(self.sources.shape[0])


@dataclass(frozen=True)
class CycleCertificate:
    verdict: Literal["monotone", "violated"]
    cycle: tuple[int, ...]
    defect: float

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "cycle": list(self.cycle), "defect": self.defect}


def _resolve_cost(pairs: MonotonePairSet, c: CostFunction | None) -> CostFunction:
    resolved = c if c is not None else pairs.cost
    if resolved is None:
        raise ConfigError("Certification needs a cost function")
    return resolved


def edge_weights(pairs: MonotonePairSet, c: CostFunction | None = None) -> np.ndarray:
    """w(i -> j) = c(x_i, y_j) - c(x_i, y_i)."""
    matrix = _resolve_cost(pairs, c).pairwise(pairs.sources, pairs.targets)
    if not np.all(np.isfinite(matrix)):
        raise ConfigError("Certification needs finite costs on the whole pair grid")
    return matrix - np.diag(matrix)[:, None]


def _predecessor_cycles(pred: np.ndarray) -> list[list[int]]:
    """Cycles of the functional graph node -> pred[node], in traversal order."""
    state = np.zeros(pred.size, dtype=int)
    cycles: list[list[int]] = []
    for start in range(pred.size):
        if state[start]:
            continue
        path: list[int] = []
        node = start
        while node >= 0 and state[node] == 0:
            state[node] = 1
            path.append(node)
            node = int(pred[node])
        if node >= 0 and state[node] == 1:
            backwards = path[path.index(node):]
            cycles.append(list(reversed(backwards)))
        for visited in path:
            state[visited] = 2
    return cycles


def _canonical_rotation(cycle: Sequence[int]) -> tuple[int, ...]:
    pivot = int(np.argmin(cycle))
    return tuple(int(i) for i in (*cycle[pivot:], *cycle[:pivot]))


def _cycle_sum(weights: np.ndarray, cycle: Sequence[int]) -> float:
    return float(sum(weights[a, b] for a, b in zip(cycle, (*cycle[1:], cycle[0]))))


def certify(pairs: MonotonePairSet, c: CostFunction | None = None) -> CycleCertificate:
    """Bellman-Ford over the complete graph with w(i -> j) = c(x_i, y_j) - c(x_i, y_i).

    The set is c-cyclically monotone iff no cycle has weight below the
    tolerance; a violating cycle is returned with its total weight. Indices
    are 0-based positions in the (deduplicated) pair set.
    """
    weights = edge_weights(pairs, c)
    count = weights.shape[0]
    if count == 1:
        return CycleCertificate("monotone", (), 0.0)
    scale = float(np.max(np.abs(weights)))
    tolerance = TOL.cycle_defect * (scale if scale > 0 else 1.0)
    # Each edge carries tolerance/count so only cycles below -tolerance survive.
    shifted = weights + tolerance / count
    np.fill_diagonal(shifted, np.inf)

    dist = np.zeros(count)
    pred = np.full(count, -1, dtype=int)
    columns = np.arange(count)
    relaxed_last = False
    for _ in range(count + 1):
        candidates = dist[:, None] + shifted
        best_from = np.argmin(candidates, axis=0)
        best = candidates[best_from, columns]
        improved = best < dist
        relaxed_last = bool(np.any(improved))
        if not relaxed_last:
            break
        dist = np.where(improved, best, dist)
        pred = np.where(improved, best_from, pred)

    if not relaxed_last:
        return CycleCertificate("monotone", (), 0.0)

    worst: tuple[int, ...] = ()
    worst_weight = 0.0
    for cycle in _predecessor_cycles(pred):
        total = _cycle_sum(weights, cycle)
        if total < worst_weight:
            worst, worst_weight = _canonical_rotation(cycle), total
    if worst and worst_weight < -tolerance:
        logger.info(
            "mongelab.certify.violated",
            extra={"cycle_length": len(worst), "defect": worst_weight},
        )
        return CycleCertificate("violated", worst, worst_weight)
    return CycleCertificate("monotone", (), 0.0)


def cycle_weight(
    pairs: MonotonePairSet,
    cycle: Sequence[int],
    c: CostFunction | None = None,
) -> float:
    """sum_m c(x_{i_m}, y_{i_{m+1}}) - c(x_{i_m}, y_{i_m}), evaluated pair by pair."""
    cost = _resolve_cost(pairs, c)
    total = 0.0
    for current, following in zip(cycle, (*cycle[1:], cycle[0])):
        total += cost(pairs.sources[current], pairs.targets[following])
        total -= cost(pairs.sources[current], pairs.targets[current])
    return total


def pairs_from_plan(plan: TransportPlan, c: CostFunction | None = None) -> MonotonePairSet:
    if c is not None and c.table is not None:
        return MonotonePairSet.from_pairs(plan.rows, plan.cols, cost=c)
    return MonotonePairSet.from_pairs(
        plan.source.points[plan.rows], plan.target.points[plan.cols], cost=c
    )


def violation_search(plan: TransportPlan, c: CostFunction) -> CycleCertificate:
    return certify(pairs_from_plan(plan, c), c)


def load_pairs_csv(path: str | Path, cost: CostFunction | None = None) -> MonotonePairSet:
    """Read columns x1..xd, y1..yd (or a two-column label file source,target)."""
    source = Path(path)
    if not source.exists():
        raise ConfigError(f"Pair CSV not found: {source}")
    frame = pd.read_csv(source)
    if {"source", "target"} <= set(frame.columns):
        return MonotonePairSet.from_pairs(
            frame["source"].astype(str).to_numpy().astype(str),
            frame["target"].astype(str).to_numpy().astype(str),
            cost=cost,
        )
    x_columns = [column for column in frame.columns if str(column).startswith("x")]
    y_columns = [column for column in frame.columns if str(column).startswith("y")]
    if not x_columns or len(x_columns) != len(y_columns):
        raise ConfigError(f"Expected matching x*/y* columns in {source}")
    return MonotonePairSet.from_pairs(
        frame[x_columns].to_numpy(dtype=float),
        frame[y_columns].to_numpy(dtype=float),
        cost=cost,
    )
