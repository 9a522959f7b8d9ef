"""Brute-force and closed-form ground truth.

Nothing here imports the solver, certificate or estimator modules; tests
compare those against these values.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools
import math
from typing import Any, Callable, Literal, Sequence

import numpy as np

from mongelab.errors import ConfigError

MAX_OT_ATOMS = 8
MAX_MONOTONE_PAIRS = 7
MONOTONE_TOLERANCE = 1e-9

Method = Literal["enumeration", "closed_form", "grid_search", "finite_difference"]
PointCost = Callable[[Any, Any], float]


@dataclass(frozen=True)
class OracleResult:
    value: float
    method: Method
    work: int
    witness: Any = None


def squared_euclidean(a: Any, b: Any) -> float:
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sum(diff * diff))


def lp_distance(p: float) -> PointCost:
    def cost(a: Any, b: Any) -> float:
        diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        if math.isinf(p):
            return float(np.max(diff))
        return float(np.sum(diff**p) ** (1.0 / p))

    return cost


def _cost_table(xs: Sequence[Any], ys: Sequence[Any], cost: PointCost) -> list[list[float]]:
    return [[float(cost(x, y)) for y in ys] for x in xs]


def brute_force_ot(
    xs: Sequence[Any],
    ys: Sequence[Any],
    cost: PointCost = squared_euclidean,
) -> OracleResult:
    """Cheapest bijection between two equal-weight atom lists, by enumeration.

    The value is the plan cost with weights 1/n; the witness is the first
    optimal permutation in lexicographic order.
    """
    n = len(xs)
    if n != len(ys):
        raise ConfigError(f"Expected equal atom counts, got {n} and {len(ys)}")
    if not 1 <= n <= MAX_OT_ATOMS:
        raise ConfigError(f"Enumeration accepts 1..{MAX_OT_ATOMS} atoms, got {n}")
    table = _cost_table(xs, ys, cost)
    best_value = math.inf
    best_perm: tuple[int, ...] = ()
    work = 0
    for perm in itertools.permutations(range(n)):
        work += 1
        total = sum(table[i][perm[i]] for i in range(n))
        if total < best_value:
            best_value, best_perm = total, perm
    return OracleResult(value=best_value / n, method="enumeration", work=work, witness=best_perm)


def monotone_defect(
    sources: Sequence[Any],
    targets: Sequence[Any],
    cost: PointCost = squared_euclidean,
) -> OracleResult:
    """min over permutations s of sum c(x_i, y_s(i)) - sum c(x_i, y_i)."""
    n = len(sources)
    if n != len(targets):
        raise ConfigError(f"Expected equal pair counts, got {n} and {len(targets)}")
    if not 1 <= n <= MAX_MONOTONE_PAIRS:
        raise ConfigError(f"Enumeration accepts 1..{MAX_MONOTONE_PAIRS} pairs, got {n}")
    table = _cost_table(sources, targets, cost)
    baseline = sum(table[i][i] for i in range(n))
    best = 0.0
    worst_perm: tuple[int, ...] = tuple(range(n))
    work = 0
    for perm in itertools.permutations(range(n)):
        work += 1
        defect = sum(table[i][perm[i]] for i in range(n)) - baseline
        if defect < best:
            best, worst_perm = defect, perm
    scale = max(abs(table[i][j] - table[i][i]) for i in range(n) for j in range(n))
    return OracleResult(
        value=best,
        method="enumeration",
        work=work,
        witness={"permutation": worst_perm, "scale": scale},
    )


def brute_force_monotone(
    sources: Sequence[Any],
    targets: Sequence[Any],
    cost: PointCost = squared_euclidean,
) -> bool:
    result = monotone_defect(sources, targets, cost)
    scale = result.witness["scale"] or 1.0
    return result.value >= -MONOTONE_TOLERANCE * scale


def pmtc_halfspace_fraction(epsilon: float, distance: float) -> float:
    """arccos(eps / (2 D)) / pi: planar Lebesgue PMTC ratio for Euclidean d^2."""
    if not distance > 0:
        raise ConfigError(f"Expected D > 0, got {distance}")
    if not 0 <= epsilon <= 2 * distance:
        raise ConfigError(f"Expected 0 <= eps <= 2D, got eps={epsilon}, D={distance}")
    return math.acos(epsilon / (2.0 * distance)) / math.pi


def cone_fraction(k: float, length: float) -> float:
    """arcsin(min(k / L, 1)) / pi: limit share of a planar ball inside the k-cone."""
    if not (k > 0 and length > 0):
        raise ConfigError(f"Expected k > 0 and L > 0, got k={k}, L={length}")
    return math.asin(min(k / length, 1.0)) / math.pi


def euclidean_derivative(alpha: float, length: float) -> float:
    """-cos(alpha) d(x, y)."""
    if length < 0:
        raise ConfigError(f"Expected d(x, y) >= 0, got {length}")
    return -math.cos(alpha) * length


def euclidean_derivative_at(x: Any, y: Any, z: Any) -> float:
    """-cos(alpha) d(x, y) with alpha the angle at x between y - x and z - x."""
    px, py, pz = (np.asarray(p, dtype=float) for p in (x, y, z))
    u = py - px
    w = pz - px
    nu = float(np.sqrt(u @ u))
    nw = float(np.sqrt(w @ w))
    if nu == 0 or nw == 0:
        raise ConfigError("Angle undefined when x coincides with y or z")
    cos_alpha = float(u @ w) / (nu * nw)
    return -max(-1.0, min(1.0, cos_alpha)) * nu


def lmtc_fraction(r: float, distance: float) -> float:
    """1/2 - arcsin(2r / D) / pi: planar LMTC share for Euclidean d^2, balls of radius r."""
    if not (r > 0 and distance > 0):
        raise ConfigError(f"Expected r > 0 and D > 0, got r={r}, D={distance}")
    if 2.0 * r > distance:
        raise ConfigError(f"Expected 2r <= D, got r={r}, D={distance}")
    return 0.5 - math.asin(2.0 * r / distance) / math.pi


def disk_fraction(r: float) -> float:
    """Uniform-on-unit-square mass of a disc of radius r lying inside the square."""
    if not 0 < r <= 0.5:
        raise ConfigError(f"Expected 0 < r <= 0.5, got {r}")
    return math.pi * r * r


def cone_contains_grid(
    p: Any,
    start: Any,
    end: Any,
    k: float,
    steps: int = 20_001,
) -> OracleResult:
    """Grid search for min_t ||p - gamma(t)|| - t k over t in [0, 1], Euclidean."""
    point, a, b = (np.asarray(v, dtype=float) for v in (p, start, end))
    ts = np.linspace(0.0, 1.0, steps)
    path = a[None, :] + ts[:, None] * (b - a)[None, :]
    gaps = np.sqrt(np.sum((point[None, :] - path) ** 2, axis=1)) - ts * k
    index = int(np.argmin(gaps))
    return OracleResult(
        value=float(gaps[index]), method="grid_search", work=steps, witness=float(ts[index])
    )


def finite_difference_derivative(
    norm: Callable[[np.ndarray], float],
    x: Any,
    y: Any,
    z: Any,
    t: float = 1e-7,
) -> OracleResult:
    """One-sided difference of t -> ||x + t (y - x) - z|| at 0."""
    px, py, pz = (np.asarray(v, dtype=float) for v in (x, y, z))
    value = (norm(px + t * (py - px) - pz) - norm(px - pz)) / t
    return OracleResult(value=float(value), method="finite_difference", work=2, witness=t)


def closed_forms() -> dict[str, Callable[..., float]]:
    return {
        "pmtc_halfspace_fraction": pmtc_halfspace_fraction,
        "cone_fraction": cone_fraction,
        "euclidean_derivative": euclidean_derivative,
        "lmtc_fraction": lmtc_fraction,
        "disk_fraction": disk_fraction,
    }
