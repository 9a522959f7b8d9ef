from __future__ import annotations

from abc import ABC, abstractmethod
import math
from typing import Any, Callable, Mapping

import numpy as np
from scipy import stats

from mongelab.errors import ConfigError, ZeroMassError
from mongelab.spaces import NormSpec

DEFAULT_LEBESGUE_HALF_WIDTH = 10.0
MAX_EMPTY_BATCHES = 200
MIN_BATCH = 256


class SampledDensity(ABC):
    """Seedable reference measure on R^dim.

    Implementations draw only from the generator they are handed, so equal
    seeds give identical streams.
    """

    name: str
    dim: int

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n points from the whole measure."""

    @abstractmethod
    def sample_in_ball(
        self,
        rng: np.random.Generator,
        norm: NormSpec,
        center: np.ndarray,
        r: float,
        n: int,
    ) -> np.ndarray:
        """Draw n points from the measure restricted to the open ball B_r(center)."""

    def density(self, points: Any) -> np.ndarray | None:
        return None

    @abstractmethod
    def describe(self) -> dict[str, Any]:
        """JSON-friendly description for reports."""


class BoxDensity(SampledDensity):
    """Bounded density supported on an axis-aligned box, sampled by thinning."""

    def __init__(
        self,
        name: str,
        low: Any,
        high: Any,
        weight: Callable[[np.ndarray], np.ndarray],
        weight_bound: float,
        normalizer: float,
        params: Mapping[str, Any] | None = None,
    ) -> None:
        self.name = name
        self.low = np.asarray(low, dtype=float).reshape(-1)
        self.high = np.asarray(high, dtype=float).reshape(-1)
        if self.low.shape != self.high.shape:
            raise ConfigError(f"{name}: low and high must have the same dimension")
        if np.any(self.high <= self.low):
            raise ConfigError(f"{name}: expected high > low in every coordinate")
        if not weight_bound > 0:
            raise ConfigError(f"{name}: density bound must be positive")
        self.dim = int(self.low.size)
        self._weight = weight
        self._weight_bound = float(weight_bound)
        self._normalizer = float(normalizer)
        self.params = dict(params or {})

    def _inside(self, points: np.ndarray) -> np.ndarray:
        return np.all((points >= self.low) & (points <= self.high), axis=1)

    def _thin(self, rng: np.random.Generator, proposals: np.ndarray) -> np.ndarray:
        keep = rng.uniform(size=proposals.shape[0]) * self._weight_bound
        return proposals[keep < self._weight(proposals)]

    def _draw(
        self,
        rng: np.random.Generator,
        low: np.ndarray,
        high: np.ndarray,
        n: int,
        accept: Callable[[np.ndarray], np.ndarray] | None = None,
    ) -> np.ndarray:
        batch = max(MIN_BATCH, 2 * n)
        chunks: list[np.ndarray] = []
        total = 0
        empty = 0
        while total < n:
            proposals = rng.uniform(low, high, size=(batch, self.dim))
            if accept is not None:
                proposals = proposals[accept(proposals)]
            kept = self._thin(rng, proposals)
            if kept.shape[0] == 0:
                empty += 1
                if empty >= MAX_EMPTY_BATCHES:
                    raise ZeroMassError(f"{self.name}: no samples landed in the region")
                continue
            chunks.append(kept)
            total += kept.shape[0]
        return np.concatenate(chunks)[:n]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._draw(rng, self.low, self.high, n)

    def sample_in_ball(
        self,
        rng: np.random.Generator,
        norm: NormSpec,
        center: np.ndarray,
        r: float,
        n: int,
    ) -> np.ndarray:
        origin = np.asarray(center, dtype=float).reshape(-1)
        low = np.maximum(self.low, origin - r)
        high = np.minimum(self.high, origin + r)
        if np.any(high <= low):
            raise ZeroMassError(f"{self.name}: ball B_{r}({origin.tolist()}) misses the support")

        def in_ball(points: np.ndarray) -> np.ndarray:
            return norm.norm(points - origin) < r

        return self._draw(rng, low, high, n, accept=in_ball)

    def density(self, points: Any) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        values = self._weight(pts) / self._normalizer
        return np.where(self._inside(pts), values, 0.0)

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dim": self.dim,
            "low": self.low.tolist(),
            "high": self.high.tolist(),
            **self.params,
        }


class SegmentMeasure(SampledDensity):
    """Uniform measure on the segment [start, end]; singular w.r.t. Lebesgue."""

    def __init__(self, start: Any, end: Any) -> None:
        self.name = "segment"
        self.start = np.asarray(start, dtype=float).reshape(-1)
        self.end = np.asarray(end, dtype=float).reshape(-1)
        if self.start.shape != self.end.shape:
            raise ConfigError("segment: start and end must have the same dimension")
        if np.array_equal(self.start, self.end):
            raise ConfigError("segment: start and end must differ")
        self.dim = int(self.start.size)

    def _at(self, s: np.ndarray) -> np.ndarray:
        return self.start[None, :] + s[:, None] * (self.end - self.start)[None, :]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._at(rng.uniform(0.0, 1.0, size=n))

    def _closest_parameter(self, norm: NormSpec, origin: np.ndarray) -> float:
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-12:
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1 = float(norm.norm(self._at(np.array([m1]))[0] - origin))
            f2 = float(norm.norm(self._at(np.array([m2]))[0] - origin))
            if f1 <= f2:
                hi = m2
            else:
                lo = m1
        return 0.5 * (lo + hi)

    def sample_in_ball(
        self,
        rng: np.random.Generator,
        norm: NormSpec,
        center: np.ndarray,
        r: float,
        n: int,
    ) -> np.ndarray:
        origin = np.asarray(center, dtype=float).reshape(-1)
        closest = self._closest_parameter(norm, origin)
        if float(norm.norm(self._at(np.array([closest]))[0] - origin)) >= r:
            raise ZeroMassError(f"segment: ball B_{r}({origin.tolist()}) misses the support")
        # Chord of a convex ball has norm length < 2r.
        reach = 2.0 * r / float(norm.norm(self.end - self.start))
        low = max(0.0, closest - reach)
        high = min(1.0, closest + reach)
        batch = max(MIN_BATCH, 2 * n)
        chunks: list[np.ndarray] = []
        total = 0
        while total < n:
            points = self._at(rng.uniform(low, high, size=batch))
            kept = points[norm.norm(points - origin) < r]
            chunks.append(kept)
            total += kept.shape[0]
        return np.concatenate(chunks)[:n]

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dim": self.dim,
            "start": self.start.tolist(),
            "end": self.end.tolist(),
        }


def uniform_box(low: Any, high: Any) -> BoxDensity:
    lo = np.asarray(low, dtype=float).reshape(-1)
    hi = np.asarray(high, dtype=float).reshape(-1)
    volume = float(np.prod(hi - lo)) if lo.shape == hi.shape else 1.0
    return BoxDensity(
        "uniform",
        lo,
        hi,
        weight=lambda points: np.ones(points.shape[0]),
        weight_bound=1.0,
        normalizer=volume,
    )


def lebesgue_window(dim: int, half_width: float = DEFAULT_LEBESGUE_HALF_WIDTH) -> BoxDensity:
    if not half_width > 0:
        raise ConfigError(f"lebesgue: expected half_width > 0, got {half_width}")
    density = uniform_box([-half_width] * dim, [half_width] * dim)
    density.name = "lebesgue"
    density.params = {"half_width": half_width}
    return density


def truncated_gaussian(mean: Any, scale: Any, low: Any, high: Any) -> BoxDensity:
    center = np.asarray(mean, dtype=float).reshape(-1)
    lo = np.asarray(low, dtype=float).reshape(-1)
    hi = np.asarray(high, dtype=float).reshape(-1)
    sigma = np.broadcast_to(np.asarray(scale, dtype=float), center.shape).copy()
    if np.any(sigma <= 0):
        raise ConfigError("gaussian: expected scale > 0")
    if not (center.shape == lo.shape == hi.shape):
        raise ConfigError("gaussian: mean, low and high must share a dimension")

    def weight(points: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * np.sum(((points - center) / sigma) ** 2, axis=1))

    # Separable normalizer: prod_i sigma_i sqrt(2 pi) (Phi(b_i) - Phi(a_i)).
    mass = stats.norm.cdf((hi - center) / sigma) - stats.norm.cdf((lo - center) / sigma)
    normalizer = float(np.prod(sigma * math.sqrt(2.0 * math.pi) * mass))
    return BoxDensity(
        "gaussian",
        lo,
        hi,
        weight=weight,
        weight_bound=1.0,
        normalizer=normalizer,
        params={"mean": center.tolist(), "scale": sigma.tolist()},
    )


def piecewise_constant(low: Any, high: Any, values: Any) -> BoxDensity:
    lo = np.asarray(low, dtype=float).reshape(-1)
    hi = np.asarray(high, dtype=float).reshape(-1)
    grid = np.asarray(values, dtype=float)
    if grid.ndim != lo.size:
        raise ConfigError(
            f"piecewise: expected a {lo.size}-dimensional value grid, got {grid.ndim}"
        )
    if np.any(grid < 0) or not np.any(grid > 0):
        raise ConfigError("piecewise: values must be nonnegative with a positive entry")
    shape = np.array(grid.shape)
    cell_volume = float(np.prod((hi - lo) / shape))

    def weight(points: np.ndarray) -> np.ndarray:
        cells = np.floor((points - lo) / (hi - lo) * shape).astype(int)
        cells = np.clip(cells, 0, shape - 1)
        return grid[tuple(cells.T)]

    return BoxDensity(
        "piecewise",
        lo,
        hi,
        weight=weight,
        weight_bound=float(grid.max()),
        normalizer=float(grid.sum()) * cell_volume,
        params={"values": grid.tolist()},
    )


def _require(params: Mapping[str, Any], key: str, label: str) -> Any:
    if key not in params:
        raise ConfigError(f"Expected {label}.{key} to be set")
    return params[key]


def build_density(name: str, params: Mapping[str, Any], dim: int | None = None) -> SampledDensity:
    if name == "uniform":
        return uniform_box(_require(params, "low", name), _require(params, "high", name))
    if name == "lebesgue":
        size = int(params.get("dim", dim or 2))
        return lebesgue_window(size, float(params.get("half_width", DEFAULT_LEBESGUE_HALF_WIDTH)))
    if name == "gaussian":
        return truncated_gaussian(
            _require(params, "mean", name),
            params.get("scale", 1.0),
            _require(params, "low", name),
            _require(params, "high", name),
        )
    if name == "piecewise":
        return piecewise_constant(
            _require(params, "low", name),
            _require(params, "high", name),
            _require(params, "values", name),
        )
    if name == "segment":
        return SegmentMeasure(_require(params, "start", name), _require(params, "end", name))
    raise ConfigError(f"Unknown density '{name}'")


DENSITY_NAMES: tuple[str, ...] = ("uniform", "lebesgue", "gaussian", "piecewise", "segment")
