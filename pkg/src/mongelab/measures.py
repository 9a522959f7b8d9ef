"""Discrete and sampled measures; ball masses, doubling ratios and cone-mass ratios."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from mongelab.errors import ConfigError, ZeroMassError
from mongelab.samplers import SampledDensity
from mongelab.seeding import derive_rng
from mongelab.spaces import (
    Geodesic,
    GeodesicCone,
    MetricSpace,
    NormSpec,
    as_point,
    as_points,
    cone_contains_many,
    geodesic,
    paired_distances,
)
from mongelab.tolerances import TOL

logger = logging.getLogger(__name__)

Verdict = Literal["positive", "inconclusive", "zero"]

Z_95 = float(stats.norm.ppf(0.975))
WILSON_COUNT_THRESHOLD = 30
DEFAULT_R0 = 0.1
DEFAULT_LEVELS = 7
DEFAULT_BUDGET = 10_000
WEIGHT_COLUMN = "weight"
LABEL_COLUMN = "label"


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms with positive weights summing to one.

    ``points`` is an (n, d) float array on normed spaces or an (n,) array of
    labels on finite metric spaces.
    """

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_atoms(
        cls,
        points: Any,
        weights: Any = None,
        *,
        normalize: bool = False,
    ) -> DiscreteMeasure:
        raw = np.asarray(points)
        labelled = raw.dtype.kind in ("U", "S", "O")
        if labelled:
            atoms = raw.astype(str).reshape(-1)
        else:
            atoms = np.asarray(points, dtype=float)
            if atoms.ndim == 1:
                atoms = atoms.reshape(-1, 1)
            if atoms.ndim != 2:
                raise ConfigError(f"Expected atoms as a 2-D array, got shape {atoms.shape}")
        count = atoms.shape[0]
        if count == 0:
            raise ConfigError("A discrete measure needs at least one atom")
        if weights is None:
            mass = np.full(count, 1.0 / count)
        else:
            mass = np.asarray(weights, dtype=float).reshape(-1)
        if mass.shape[0] != count:
            raise ConfigError(f"Expected {count} weights, got {mass.shape[0]}")
        if not np.all(np.isfinite(mass)) or np.any(mass <= 0):
            raise ConfigError("Expected every atom weight to be finite and positive")

        unique, first, inverse = np.unique(
            atoms, axis=0 if not labelled else None, return_index=True, return_inverse=True
        )
        inverse = np.asarray(inverse).reshape(-1)
        if unique.shape[0] != count:
            order = np.argsort(first, kind="stable")
            rank = np.empty_like(order)
            rank[order] = np.arange(order.size)
            merged = np.zeros(order.size)
            np.add.at(merged, rank[inverse], mass)
            atoms = unique[order]
            mass = merged

        total = float(mass.sum())
        if normalize:
            mass = mass / total
        elif abs(total - 1.0) > TOL.weight_sum:
            raise ConfigError(f"Expected weights to sum to 1, got {total!r}")
        return cls(points=atoms, weights=mass)

    @classmethod
    def dirac(cls, point: Any) -> DiscreteMeasure:
        raw = np.asarray(point)
        if raw.dtype.kind in ("U", "S", "O"):
            return cls.from_atoms([str(point)], [1.0])
        return cls.from_atoms(np.asarray(point, dtype=float).reshape(1, -1), [1.0])

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def labelled(self) -> bool:
        return self.points.ndim == 1

    @property
    def dim(self) -> int | None:
        return None if self.labelled else int(self.points.shape[1])

    def describe(self) -> dict[str, Any]:
        return {"type": "discrete", "atoms": self.size, "dim": self.dim}


Measure = DiscreteMeasure | SampledDensity


@dataclass(frozen=True)
class MassEstimate:
    estimate: float
    half_width: float
    count: int = 0


@dataclass(frozen=True)
class RatioReport:
    radii: tuple[float, ...]
    estimates: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    half_widths: tuple[float, ...]
    counts: tuple[int, ...]
    liminf_proxy: float
    verdict: Verdict
    flags: tuple[str, ...] = ()

    @classmethod
    def from_intervals(
        cls,
        radii: Sequence[float],
        estimates: Sequence[float],
        lower: Sequence[float],
        upper: Sequence[float],
        counts: Sequence[int],
        flags: Sequence[str] = (),
    ) -> RatioReport:
        est = np.asarray(estimates, dtype=float)
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        half = np.maximum(est - lo, hi - est)
        tail = slice(len(est) // 2, None)
        tail_est = est[tail]
        if np.all(np.isnan(tail_est)):
            liminf = math.nan
        else:
            liminf = float(np.nanmin(tail_est))
        return cls(
            radii=tuple(float(r) for r in radii),
            estimates=tuple(float(v) for v in est),
            lower=tuple(float(v) for v in lo),
            upper=tuple(float(v) for v in hi),
            half_widths=tuple(float(v) for v in half),
            counts=tuple(int(c) for c in counts),
            liminf_proxy=liminf,
            verdict=classify_tail(est, lo),
            flags=tuple(flags),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "radii": list(self.radii),
            "estimates": list(self.estimates),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "half_widths": list(self.half_widths),
            "counts": list(self.counts),
            "liminf_proxy": self.liminf_proxy,
            "verdict": self.verdict,
            "flags": list(self.flags),
        }


def classify_tail(estimates: np.ndarray, lower: np.ndarray) -> Verdict:
    """Three-valued verdict on the tail half of a schedule."""
    tail = slice(len(estimates) // 2, None)
    tail_est = estimates[tail]
    tail_lower = lower[tail]
    if tail_est.size == 0 or np.any(np.isnan(tail_est)):
        return "inconclusive"
    if np.all(tail_lower > 0):
        return "positive"
    if np.all(tail_est == 0):
        return "zero"
    return "inconclusive"


def proportion_interval(hits: int, total: int) -> tuple[float, float, float]:
    """(estimate, lower, upper) at 95%; Wilson when hits or misses < 30."""
    if total <= 0:
        raise ZeroMassError("Proportion undefined without samples")
    p = hits / total
    if min(hits, total - hits) < WILSON_COUNT_THRESHOLD:
        z2 = Z_95 * Z_95
        denom = 1.0 + z2 / total
        center = (p + z2 / (2.0 * total)) / denom
        spread = Z_95 * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total)) / denom
        lower = 0.0 if hits == 0 else max(0.0, center - spread)
        upper = 1.0 if hits == total else min(1.0, center + spread)
        return p, lower, upper
    spread = Z_95 * math.sqrt(p * (1.0 - p) / total)
    return p, max(0.0, p - spread), min(1.0, p + spread)


def geometric_radii(r0: float = DEFAULT_R0, levels: int = DEFAULT_LEVELS) -> tuple[float, ...]:
    if not r0 > 0:
        raise ConfigError(f"Expected r0 > 0, got {r0}")
    if levels < 1:
        raise ConfigError(f"Expected at least one radius level, got {levels}")
    return tuple(r0 * 2.0 ** (-i) for i in range(levels))


def validate_schedule(values: Sequence[float], label: str = "radii") -> tuple[float, ...]:
    schedule = tuple(float(v) for v in values)
    if not schedule:
        raise ConfigError(f"Expected {label} to be nonempty")
    if any(not v > 0 for v in schedule):
        raise ConfigError(f"Expected every entry of {label} to be > 0")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError(f"Expected {label} to be strictly decreasing")
    return schedule


def _resolve_space(measure: Measure, space: MetricSpace | None) -> MetricSpace:
    if space is not None:
        return space
    dim = measure.dim
    if dim is None:
        raise ConfigError("A finite metric space is required for labelled measures")
    return MetricSpace.normed(NormSpec("euclidean", dim))


def _norm_of(space: MetricSpace) -> NormSpec:
    if space.norm is None:
        raise ConfigError("Sampled measures require a normed space")
    return space.norm


def _atom_distances(measure: DiscreteMeasure, space: MetricSpace, center: Any) -> np.ndarray:
    if measure.labelled:
        return paired_distances(
            space, measure.points, np.full(measure.size, str(center), dtype=object)
        )
    return paired_distances(space, measure.points, as_point(space, center))


def ball_mass(
    measure: Measure,
    center: Any,
    r: float,
    budget: int = DEFAULT_BUDGET,
    *,
    space: MetricSpace | None = None,
    seed: int = 0,
) -> MassEstimate:
    """Mass of the open ball B_r(center): exact for atoms, Monte Carlo otherwise."""
    if not r > 0:
        raise ConfigError(f"Expected radius r > 0, got {r}")
    resolved = _resolve_space(measure, space)
    if isinstance(measure, DiscreteMeasure):
        inside = _atom_distances(measure, resolved, center) < r
        return MassEstimate(float(measure.weights[inside].sum()), 0.0)
    if budget < 1:
        raise ConfigError(f"Expected budget >= 1, got {budget}")
    norm = _norm_of(resolved)
    points = measure.sample(derive_rng(seed, 0), budget)
    hits = int(np.count_nonzero(norm.norm(points - as_point(resolved, center)) < r))
    estimate, lower, upper = proportion_interval(hits, budget)
    return MassEstimate(estimate, max(estimate - lower, upper - estimate), budget)


@dataclass(frozen=True)
class DoublingScan:
    radii: tuple[float, ...]
    ratios: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    max_ratio: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "radii": list(self.radii),
            "ratios": list(self.ratios),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "max_ratio": self.max_ratio,
        }


def doubling_ratio_scan(
    measure: Measure,
    center: Any,
    radii: Sequence[float],
    budget: int = DEFAULT_BUDGET,
    *,
    space: MetricSpace | None = None,
    seed: int = 0,
) -> DoublingScan:
    """Per-scale m(B_2r)/m(B_r) and the empirical doubling constant."""
    schedule = tuple(float(r) for r in radii)
    if not schedule or any(not r > 0 for r in schedule):
        raise ConfigError("Expected nonempty radii, all > 0")
    resolved = _resolve_space(measure, space)
    ratios: list[float] = []
    lower: list[float] = []
    upper: list[float] = []
    for index, r in enumerate(schedule):
        if isinstance(measure, DiscreteMeasure):
            dist = _atom_distances(measure, resolved, center)
            inner = float(measure.weights[dist < r].sum())
            outer = float(measure.weights[dist < 2.0 * r].sum())
            if inner <= 0:
                raise ZeroMassError(f"Zero mass in the inner ball at r={r}")
            ratio = outer / inner
            ratios.append(ratio)
            lower.append(ratio)
            upper.append(ratio)
            continue
        norm = _norm_of(resolved)
        origin = as_point(resolved, center)
        points = measure.sample_in_ball(derive_rng(seed, index), norm, origin, 2.0 * r, budget)
        hits = int(np.count_nonzero(norm.norm(points - origin) < r))
        if hits == 0:
            raise ZeroMassError(f"No samples landed in the inner ball at r={r}")
        p, p_lo, p_hi = proportion_interval(hits, budget)
        ratios.append(1.0 / p)
        lower.append(1.0 / p_hi)
        upper.append(math.inf if p_lo == 0 else 1.0 / p_lo)
    logger.debug(
        "mongelab.doubling.scan",
        extra={"radii": list(schedule), "max_ratio": max(ratios)},
    )
    return DoublingScan(
        radii=schedule,
        ratios=tuple(ratios),
        lower=tuple(lower),
        upper=tuple(upper),
        max_ratio=float(max(ratios)),
    )


def support_doubling_constant(
    measure: DiscreteMeasure,
    radii: Sequence[float],
    *,
    space: MetricSpace | None = None,
) -> tuple[float, int]:
    """Largest doubling ratio over every atom of supp(measure): (constant, atom index)."""
    resolved = _resolve_space(measure, space)
    worst = -math.inf
    worst_index = 0
    for index in range(measure.size):
        scan = doubling_ratio_scan(measure, measure.points[index], radii, space=resolved)
        if scan.max_ratio > worst:
            worst, worst_index = scan.max_ratio, index
    return float(worst), worst_index


def cone_mass_ratio(
    measure: Measure,
    x: Any,
    gamma: Geodesic,
    k: float,
    radii: Sequence[float],
    budget: int = DEFAULT_BUDGET,
    *,
    seed: int = 0,
    stream: int = 0,
) -> RatioReport:
    """mu(C_{gamma,k} n B_r(x)) / mu(B_r(x)) across a shrinking radius schedule."""
    space = gamma.space
    norm = _norm_of(space)
    origin = as_point(space, x)
    if float(norm.norm(gamma.start - origin)) > TOL.apex:
        raise ConfigError("Expected the geodesic to start at x")
    cone = GeodesicCone(gamma, k)
    schedule = validate_schedule(radii)
    if budget < 1:
        raise ConfigError(f"Expected budget >= 1, got {budget}")

    estimates: list[float] = []
    lower: list[float] = []
    upper: list[float] = []
    counts: list[int] = []
    flags: list[str] = []
    for index, r in enumerate(schedule):
        if isinstance(measure, DiscreteMeasure):
            points = as_points(space, measure.points)
            in_ball = norm.norm(points - origin) < r
            denominator = float(measure.weights[in_ball].sum())
            if denominator <= 0:
                flags.append(f"zero_mass_radius_{index}")
                estimates.append(math.nan)
                lower.append(math.nan)
                upper.append(math.nan)
                counts.append(0)
                continue
            in_cone = np.zeros(measure.size, dtype=bool)
            in_cone[in_ball] = cone_contains_many(cone, points[in_ball], TOL.apex)
            ratio = min(1.0, float(measure.weights[in_cone].sum()) / denominator)
            estimates.append(ratio)
            lower.append(ratio)
            upper.append(ratio)
            counts.append(0)
            continue
        try:
            samples = measure.sample_in_ball(
                derive_rng(seed, stream, index), norm, origin, r, budget
            )
        except ZeroMassError:
            flags.append(f"zero_mass_radius_{index}")
            estimates.append(math.nan)
            lower.append(math.nan)
            upper.append(math.nan)
            counts.append(0)
            continue
        hits = int(np.count_nonzero(cone_contains_many(cone, samples, 0.0)))
        p, p_lo, p_hi = proportion_interval(hits, budget)
        estimates.append(p)
        lower.append(p_lo)
        upper.append(p_hi)
        counts.append(budget)
    return RatioReport.from_intervals(schedule, estimates, lower, upper, counts, flags)


@dataclass(frozen=True)
class DenseScatterReport:
    verdict: Verdict
    worst_direction: int
    worst: RatioReport
    reports: tuple[RatioReport, ...] = field(repr=False)

    @property
    def worst_ratio(self) -> float:
        return self.worst.liminf_proxy

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "worst_direction": self.worst_direction,
            "worst_ratio": self.worst_ratio,
            "worst": self.worst.to_dict(),
            "directions": [report.to_dict() for report in self.reports],
        }


def evenly_spread_directions(
    space: MetricSpace,
    x: Any,
    count: int,
    length: float = 1.0,
) -> list[Geodesic]:
    """Geodesics of the given length from x along evenly spread directions."""
    norm = _norm_of(space)
    if count < 1:
        raise ConfigError(f"Expected at least one direction, got {count}")
    origin = as_point(space, x)
    vectors: list[np.ndarray] = []
    for index in range(count):
        if norm.dim == 2:
            angle = 2.0 * math.pi * index / count
            vector = np.array([math.cos(angle), math.sin(angle)])
        else:
            vector = np.zeros(norm.dim)
            vector[(index // 2) % norm.dim] = 1.0 if index % 2 == 0 else -1.0
        vectors.append(vector * (length / float(norm.norm(vector))))
    return [geodesic(space, origin, origin + vector) for vector in vectors]


def densely_scattered_probe(
    measure: Measure,
    x: Any,
    directions: Sequence[Geodesic],
    k: float,
    radii: Sequence[float],
    budget: int = DEFAULT_BUDGET,
    *,
    seed: int = 0,
) -> DenseScatterReport:
    if not directions:
        raise ConfigError("Expected at least one direction geodesic")
    reports = tuple(
        cone_mass_ratio(
            measure, x, direction, k, radii, budget, seed=seed, stream=index
        )
        for index, direction in enumerate(directions)
    )
    proxies = [
        -math.inf if math.isnan(report.liminf_proxy) else report.liminf_proxy
        for report in reports
    ]
    worst_index = int(np.argmin(proxies))
    verdicts = {report.verdict for report in reports}
    if verdicts == {"positive"}:
        verdict: Verdict = "positive"
    elif "zero" in verdicts:
        verdict = "zero"
    else:
        verdict = "inconclusive"
    logger.info(
        "mongelab.cone.densely_scattered",
        extra={"verdict": verdict, "directions": len(reports), "worst": worst_index},
    )
    return DenseScatterReport(
        verdict=verdict,
        worst_direction=worst_index,
        worst=reports[worst_index],
        reports=reports,
    )


def load_measure_csv(path: str | Path, *, normalize: bool = False) -> DiscreteMeasure:
    source = Path(path)
    if not source.exists():
        raise ConfigError(f"Measure CSV not found: {source}")
    frame = pd.read_csv(source)
    if WEIGHT_COLUMN not in frame.columns:
        raise ConfigError(f"Expected a '{WEIGHT_COLUMN}' column in {source}")
    weights = frame[WEIGHT_COLUMN].to_numpy(dtype=float)
    if LABEL_COLUMN in frame.columns:
        return DiscreteMeasure.from_atoms(
            frame[LABEL_COLUMN].astype(str).to_numpy(dtype=object).astype(str),
            weights,
            normalize=normalize,
        )
    coordinates = [column for column in frame.columns if column != WEIGHT_COLUMN]
    if not coordinates:
        raise ConfigError(f"Expected coordinate columns in {source}")
    return DiscreteMeasure.from_atoms(
        frame[coordinates].to_numpy(dtype=float), weights, normalize=normalize
    )


def measure_frame(measure: DiscreteMeasure) -> pd.DataFrame:
    if measure.labelled:
        frame = pd.DataFrame({LABEL_COLUMN: measure.points})
    else:
        frame = pd.DataFrame(
            measure.points,
            columns=[f"x{index + 1}" for index in range(measure.points.shape[1])],
        )
    frame[WEIGHT_COLUMN] = measure.weights
    return frame


def save_measure_csv(measure: DiscreteMeasure, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    measure_frame(measure).to_csv(target, index=False, float_format="%.17g")
    return target
