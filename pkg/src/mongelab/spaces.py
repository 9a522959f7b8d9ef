"""Normed and finite metric spaces: distances, affine geodesics, cones, gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np

from mongelab.errors import ConfigError, NonDifferentiableNormError
from mongelab.tolerances import TOL

NormKind = Literal["euclidean", "lp", "l1", "linf"]
NORM_KINDS: tuple[str, ...] = ("euclidean", "lp", "l1", "linf")
DEFAULT_T_SCHEDULE: tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5)
TERNARY_MAX_ITERATIONS = 200


@dataclass(frozen=True)
class NormSpec:
    kind: NormKind
    dim: int
    p: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in NORM_KINDS:
            raise ConfigError(f"Unknown norm kind '{self.kind}'")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigError(f"Expected norm dimension to be a positive integer, got {self.dim}")
        if self.kind == "lp":
            if self.p is None or not math.isfinite(self.p) or self.p <= 1.0:
                raise ConfigError(f"lp norm requires finite p > 1, got {self.p}")

    @property
    def exponent(self) -> float:
        if self.kind == "euclidean":
            return 2.0
        if self.kind == "l1":
            return 1.0
        if self.kind == "linf":
            return math.inf
        return float(self.p)  # type: ignore[arg-type]

    @property
    def dual_exponent(self) -> float:
        exponent = self.exponent
        if exponent == 1.0:
            return math.inf
        if math.isinf(exponent):
            return 1.0
        return exponent / (exponent - 1.0)

    @property
    def strictly_convex(self) -> bool:
        return self.kind in ("euclidean", "lp")

    @property
    def differentiable(self) -> bool:
        return self.kind in ("euclidean", "lp")

    def norm(self, v: Any) -> Any:
        return np.linalg.norm(np.asarray(v, dtype=float), ord=self.exponent, axis=-1)

    def describe(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"kind": self.kind, "dim": self.dim}
        if self.kind == "lp":
            payload["p"] = self.p
        return payload


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """Either a normed R^n or an explicit finite metric on labelled points."""

    norm: NormSpec | None = None
    labels: tuple[str, ...] = ()
    matrix: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def normed(cls, norm: NormSpec) -> MetricSpace:
        return cls(norm=norm)

    @classmethod
    def finite(
        cls,
        labels: Sequence[str],
        matrix: Any,
        *,
        check: bool = True,
    ) -> MetricSpace:
        table = np.asarray(matrix, dtype=float)
        labels = tuple(str(label) for label in labels)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ConfigError(f"Expected a square distance matrix, got shape {table.shape}")
        if len(labels) != table.shape[0]:
            raise ConfigError(
                f"Expected {table.shape[0]} labels for the distance matrix, got {len(labels)}"
            )
        if len(set(labels)) != len(labels):
            raise ConfigError("Expected finite space labels to be unique")
        space = cls(labels=labels, matrix=table)
        if check:
            _validate_finite_matrix(table)
            violation = check_triangle_inequality(space)
            if violation > TOL.metric_triangle:
                raise ConfigError(
                    f"Finite metric violates the triangle inequality by {violation:.3e}"
                )
        return space

    @property
    def is_normed(self) -> bool:
        return self.norm is not None

    @property
    def dim(self) -> int | None:
        return self.norm.dim if self.norm is not None else None

    def index_of(self, label: Any) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError as exc:
            raise ConfigError(f"Unknown label '{label}' in finite metric space") from exc

    def describe(self) -> dict[str, Any]:
        if self.norm is not None:
            return {"type": "normed", **self.norm.describe()}
        return {"type": "finite", "size": len(self.labels)}


@dataclass(frozen=True, eq=False)
class Geodesic:
    """Affine constant-speed curve t -> (1 - t) start + t end on [0, 1]."""

    space: MetricSpace
    start: np.ndarray
    end: np.ndarray

    @property
    def length(self) -> float:
        return distance(self.space, self.start, self.end)

    def __call__(self, t: Any) -> np.ndarray:
        times = np.asarray(t, dtype=float)
        if times.ndim == 0:
            return self.start + float(times) * (self.end - self.start)
        return self.start[None, :] + times[:, None] * (self.end - self.start)[None, :]


@dataclass(frozen=True, eq=False)
class GeodesicCone:
    geodesic: Geodesic
    k: float

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise ConfigError(f"Expected cone size k > 0, got {self.k}")

    @property
    def apex(self) -> np.ndarray:
        return self.geodesic.start


@dataclass(frozen=True)
class DerivativeEstimate:
    schedule: tuple[float, ...]
    quotients: tuple[float, ...]
    smallest_t_value: float
    value: float
    refined: bool


def _validate_finite_matrix(table: np.ndarray) -> None:
    if not np.all(np.isfinite(table)):
        raise ConfigError("Finite distance matrix must contain only finite entries")
    if np.any(table < 0):
        raise ConfigError("Finite distance matrix must be nonnegative")
    if np.any(np.diag(table) != 0):
        raise ConfigError("Finite distance matrix must have a zero diagonal")
    if not np.allclose(table, table.T, rtol=0.0, atol=TOL.metric_triangle):
        raise ConfigError("Finite distance matrix must be symmetric")


def check_triangle_inequality(space: MetricSpace) -> float:
    """Largest violation d(i,k) - d(i,j) - d(j,k) over all triples (<= 0 when valid)."""
    if space.matrix is None:
        raise ConfigError("Triangle check requires a finite metric space")
    table = space.matrix
    if table.shape[0] == 0:
        return 0.0
    through = table[:, :, None] + table[None, :, :]
    return float(np.max(table[:, None, :] - through))


def load_finite_space(path: str | Path) -> MetricSpace:
    source = Path(path)
    if not source.exists():
        raise ConfigError(f"Metric matrix file not found: {source}")
    tokens = source.read_text().split()
    if not tokens:
        raise ConfigError(f"Metric matrix file is empty: {source}")
    try:
        size = int(tokens[0])
        values = np.array([float(token) for token in tokens[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"Malformed metric matrix file {source}: {exc}") from exc
    if size < 1 or values.size != size * size:
        raise ConfigError(
            f"Expected {size * size} matrix entries in {source}, got {values.size}"
        )
    labels = [str(index) for index in range(size)]
    return MetricSpace.finite(labels, values.reshape(size, size))


def as_point(space: MetricSpace, value: Any) -> Any:
    if space.norm is None:
        space.index_of(value)
        return str(value)
    point = np.asarray(value, dtype=float).reshape(-1)
    if point.shape != (space.norm.dim,):
        raise ConfigError(
            f"Expected a point of dimension {space.norm.dim}, got shape {np.shape(value)}"
        )
    return point


def as_points(space: MetricSpace, values: Any) -> np.ndarray:
    if space.norm is None:
        labels = np.asarray(values, dtype=object).reshape(-1)
        for label in labels:
            space.index_of(label)
        return labels.astype(str)
    points = np.atleast_2d(np.asarray(values, dtype=float))
    if points.ndim != 2 or points.shape[1] != space.norm.dim:
        raise ConfigError(
            f"Expected points of dimension {space.norm.dim}, got shape {points.shape}"
        )
    return points


def _label_indices(space: MetricSpace, labels: Any) -> np.ndarray:
    return np.array(
        [space.index_of(label) for label in np.asarray(labels, dtype=object).reshape(-1)],
        dtype=int,
    )


def distance(space: MetricSpace, a: Any, b: Any) -> float:
    if space.norm is None:
        assert space.matrix is not None
        return float(space.matrix[space.index_of(a), space.index_of(b)])
    pa = as_point(space, a)
    pb = as_point(space, b)
    return float(space.norm.norm(pa - pb))


def pairwise_distances(space: MetricSpace, a: Any, b: Any) -> np.ndarray:
    if space.norm is None:
        assert space.matrix is not None
        return space.matrix[np.ix_(_label_indices(space, a), _label_indices(space, b))]
    pa = as_points(space, a)
    pb = as_points(space, b)
    return space.norm.norm(pa[:, None, :] - pb[None, :, :])


def paired_distances(space: MetricSpace, a: Any, b: Any) -> np.ndarray:
    """Row-by-row distances; a single point on either side broadcasts."""
    if space.norm is None:
        assert space.matrix is not None
        ia = _label_indices(space, a)
        ib = _label_indices(space, b)
        return space.matrix[ia, ib]
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    if pa.shape[-1] != space.norm.dim or pb.shape[-1] != space.norm.dim:
        raise ConfigError(f"Expected points of dimension {space.norm.dim}")
    return np.atleast_1d(space.norm.norm(pa - pb))


def geodesic(space: MetricSpace, a: Any, b: Any) -> Geodesic:
    if space.norm is None:
        raise ConfigError("Geodesics are not defined on finite metric spaces")
    return Geodesic(space=space, start=as_point(space, a), end=as_point(space, b))


def _ternary_minimum(objective: Any, count: int) -> np.ndarray:
    lo = np.zeros(count)
    hi = np.ones(count)
    for _ in range(TERNARY_MAX_ITERATIONS):
        if float(np.max(hi - lo, initial=0.0)) <= TOL.ternary_resolution:
            break
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        left_lower = objective(m1) <= objective(m2)
        hi = np.where(left_lower, m2, hi)
        lo = np.where(left_lower, lo, m1)
    candidates = np.stack(
        [
            objective(lo),
            objective(hi),
            objective(0.5 * (lo + hi)),
            objective(np.zeros(count)),
            objective(np.ones(count)),
        ]
    )
    return candidates.min(axis=0)


def cone_gap_many(cone: GeodesicCone, points: Any) -> np.ndarray:
    """min over t of d(p, gamma(t)) - t k for each row of points."""
    norm = cone.geodesic.space.norm
    assert norm is not None
    pts = as_points(cone.geodesic.space, points)
    start = cone.geodesic.start
    step = cone.geodesic.end - start

    def objective(t: np.ndarray) -> np.ndarray:
        along = start[None, :] + t[:, None] * step[None, :]
        return norm.norm(pts - along) - t * cone.k

    return _ternary_minimum(objective, pts.shape[0])


def cone_contains_many(cone: GeodesicCone, points: Any, tol: float = 0.0) -> np.ndarray:
    if tol < 0:
        raise ConfigError(f"Expected tol >= 0, got {tol}")
    return cone_gap_many(cone, points) <= tol


def cone_contains(cone: GeodesicCone, p: Any, tol: float = 0.0) -> bool:
    return bool(cone_contains_many(cone, [as_point(cone.geodesic.space, p)], tol)[0])


def _subgradient(n: NormSpec, v: np.ndarray) -> np.ndarray:
    if n.kind == "l1":
        return np.sign(v)
    index = int(np.argmax(np.abs(v)))
    grad = np.zeros_like(v)
    grad[index] = np.sign(v[index])
    return grad


def norm_gradient(n: NormSpec, v: Any, *, allow_subgradient: bool = False) -> np.ndarray:
    """Gradient of g = ||.|| at v.

    For lp the i-th component is sign(v_i)|v_i|^(p-1) / ||v||^(p-1). l1 and linf
    raise ``NonDifferentiableNormError`` carrying a subgradient sample unless
    ``allow_subgradient`` is set.
    """
    vec = np.asarray(v, dtype=float).reshape(-1)
    if vec.shape != (n.dim,):
        raise ConfigError(f"Expected a vector of dimension {n.dim}, got shape {vec.shape}")
    size = float(n.norm(vec))
    if size == 0.0:
        raise ConfigError("Norm gradient is undefined at the origin")
    if not n.differentiable:
        sample = _subgradient(n, vec)
        if allow_subgradient:
            return sample
        raise NonDifferentiableNormError(
            f"{n.kind} norm is not differentiable; a subgradient sample is attached",
            subgradient=sample,
        )
    if n.kind == "euclidean":
        return vec / size
    p = n.exponent
    return np.sign(vec) * np.abs(vec) ** (p - 1.0) / size ** (p - 1.0)


def dual_norm(n: NormSpec, w: Any) -> Any:
    return np.linalg.norm(np.asarray(w, dtype=float), ord=n.dual_exponent, axis=-1)


def dual_maximizer(n: NormSpec, w: Any) -> np.ndarray:
    """Unit vector v (in n) attaining w . v = ||w||_*."""
    vec = np.asarray(w, dtype=float).reshape(-1)
    if not np.any(vec):
        raise ConfigError("Dual maximizer is undefined for the zero covector")
    if n.kind == "linf":
        return np.sign(vec)
    if n.kind == "l1":
        index = int(np.argmax(np.abs(vec)))
        out = np.zeros_like(vec)
        out[index] = np.sign(vec[index])
        return out
    q = n.dual_exponent
    candidate = np.sign(vec) * np.abs(vec) ** (q - 1.0)
    return candidate / n.norm(candidate)


def sampled_dual_norm(
    n: NormSpec,
    w: Any,
    samples: int,
    rng: np.random.Generator,
) -> float:
    vec = np.asarray(w, dtype=float).reshape(-1)
    directions = rng.normal(size=(samples, n.dim))
    lengths = n.norm(directions)
    directions = directions[lengths > 0] / lengths[lengths > 0][:, None]
    best = float(np.max(np.abs(directions @ vec), initial=0.0))
    if np.any(vec):
        best = max(best, float(vec @ dual_maximizer(n, vec)))
    return best


def sample_ball(
    norm: NormSpec,
    center: Any,
    r: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform samples from the open ball B_r(center) by box proposals."""
    if not r > 0:
        raise ConfigError(f"Expected radius > 0, got {r}")
    origin = np.asarray(center, dtype=float).reshape(-1)
    batch = max(64, 2 * n)
    accepted: list[np.ndarray] = []
    total = 0
    while total < n:
        proposals = rng.uniform(-r, r, size=(batch, norm.dim))
        inside = proposals[norm.norm(proposals) < r]
        accepted.append(inside)
        total += inside.shape[0]
    return origin[None, :] + np.concatenate(accepted)[:n]


def _quotient_table(
    norm: NormSpec,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    schedule: Sequence[float],
) -> np.ndarray:
    base = norm.norm(x - z)
    step = y - x
    columns = []
    for t in schedule:
        moved = norm.norm(x + t * step - z)
        columns.append((moved - base) / t)
    return np.stack(columns, axis=-1)


def _normalize_schedule(schedule: Sequence[float]) -> tuple[float, ...]:
    values = tuple(sorted((float(t) for t in schedule), reverse=True))
    if not values:
        raise ConfigError("Expected a nonempty t schedule")
    if any(not 0 < t <= 1 for t in values):
        raise ConfigError(f"Expected every t in (0, 1], got {values}")
    if len(set(values)) != len(values):
        raise ConfigError("Expected distinct t values in the schedule")
    return values


def _monotone_rows(table: np.ndarray) -> np.ndarray:
    if table.shape[1] < 2:
        return np.zeros(table.shape[0], dtype=bool)
    steps = np.diff(table, axis=1)
    return np.all(steps >= 0, axis=1) | np.all(steps <= 0, axis=1)


def extrapolate_quotients(
    quotients: np.ndarray,
    schedule: tuple[float, ...],
    lower_bound: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Smallest-t value with a Richardson step where the quotient table is monotone.

    Returns (values, refined mask). Values never drop below ``lower_bound``.
    """
    table = np.atleast_2d(quotients)
    smallest = table[:, -1]
    if table.shape[1] < 2:
        return np.maximum(smallest, lower_bound), np.zeros(table.shape[0], dtype=bool)
    monotone = _monotone_rows(table)
    ratio = schedule[-2] / schedule[-1]
    richardson = (ratio * table[:, -1] - table[:, -2]) / (ratio - 1.0)
    values = np.where(monotone, richardson, smallest)
    return np.maximum(values, lower_bound), monotone


def directional_metric_derivatives(
    space: MetricSpace,
    x: Any,
    y: Any,
    z: Any,
    schedule: Sequence[float] = DEFAULT_T_SCHEDULE,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized form over rows of x, y, z: (quotient table, extrapolated values)."""
    if space.norm is None:
        raise ConfigError("Directional derivatives require a normed space")
    ts = _normalize_schedule(schedule)
    xs = as_points(space, x)
    ys = as_points(space, y)
    zs = as_points(space, z)
    lengths = space.norm.norm(ys - xs)
    if np.any(lengths == 0):
        raise ConfigError("Directional derivative requires x != y")
    table = _quotient_table(space.norm, xs, ys, zs, ts)
    values, _ = extrapolate_quotients(table, ts, -lengths)
    return table, values


def directional_metric_derivative(
    space: MetricSpace,
    x: Any,
    y: Any,
    z: Any,
    schedule: Sequence[float] = DEFAULT_T_SCHEDULE,
) -> DerivativeEstimate:
    table, values = directional_metric_derivatives(space, [x], [y], [z], schedule)
    return DerivativeEstimate(
        schedule=_normalize_schedule(schedule),
        quotients=tuple(float(q) for q in table[0]),
        smallest_t_value=float(table[0, -1]),
        value=float(values[0]),
        refined=bool(_monotone_rows(table)[0]),
    )
