"""Estimators for the metric twist conditions and the non-branching constant."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Any, Literal, Mapping, Sequence

import numpy as np

from mongelab.errors import ConfigError, EquidistanceError
from mongelab.measures import RatioReport, Verdict, proportion_interval, validate_schedule
from mongelab.samplers import SampledDensity
from mongelab.seeding import derive_rng
from mongelab.spaces import (
    DEFAULT_T_SCHEDULE,
    MetricSpace,
    NormSpec,
    as_point,
    directional_metric_derivatives,
    norm_gradient,
    sample_ball,
    sampled_dual_norm,
)
from mongelab.tolerances import TOL
from mongelab.transport import CostFunction

logger = logging.getLogger(__name__)

DEFAULT_S_SCHEDULE: tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)
EPSILON_GRID_EXPONENTS: tuple[int, ...] = tuple(range(1, 9))
BOUNDARY_SHRINK = 1.0 - 1e-9
DUAL_CHECK_SAMPLES = 10_000
NONBRANCHING_NOTE = (
    "canonical affine geodesic only: a positive verdict is sufficient, "
    "a negative verdict is indicative"
)


@dataclass(frozen=True)
class TwistConfig:
    epsilon: float | None = None
    s_schedule: tuple[float, ...] = DEFAULT_S_SCHEDULE
    r1: float = 0.05
    r2: float | None = None
    inner_budget: int = 64
    outer_budget: int = 10_000
    seed: int = 0
    conservative_margin: float = 1.0
    refine_steps: int = 8
    delta: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "s_schedule", validate_schedule(self.s_schedule, "s_schedule"))
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError(f"Expected epsilon > 0, got {self.epsilon}")
        if not self.r1 > 0 or (self.r2 is not None and not self.r2 > 0):
            raise ConfigError("Expected r1 and r2 to be > 0")
        if not self.delta > 0:
            raise ConfigError(f"Expected delta > 0, got {self.delta}")
        if self.inner_budget < 1 or self.outer_budget < 1:
            raise ConfigError("Expected inner and outer budgets >= 1")
        if self.conservative_margin < 0 or self.refine_steps < 0:
            raise ConfigError("Expected conservative_margin and refine_steps >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "s_schedule": list(self.s_schedule),
            "r1": self.r1,
            "r2": self.r2,
            "inner_budget": self.inner_budget,
            "outer_budget": self.outer_budget,
            "seed": self.seed,
            "conservative_margin": self.conservative_margin,
            "refine_steps": self.refine_steps,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class TwistReport:
    mode: Literal["exact", "optimistic", "conservative"]
    ratios: RatioReport
    parameters: Mapping[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> Verdict:
        return self.ratios.verdict

    def to_dict(self) -> dict[str, Any]:
        return {"mode": self.mode, "parameters": dict(self.parameters), **self.ratios.to_dict()}


@dataclass(frozen=True)
class LmtcBracket:
    optimistic: TwistReport
    conservative: TwistReport

    @property
    def verdict(self) -> Verdict:
        if self.conservative.verdict == "positive":
            return "positive"
        if self.optimistic.verdict == "zero":
            return "zero"
        return "inconclusive"

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "optimistic": self.optimistic.to_dict(),
            "conservative": self.conservative.to_dict(),
        }


def _space_norm(c: CostFunction) -> NormSpec:
    if c.space is None or c.space.norm is None:
        raise ConfigError("Twist estimators need a cost on a normed space")
    return c.space.norm


def _zero_report(schedule: Sequence[float], flag: str) -> RatioReport:
    zeros = [0.0] * len(schedule)
    return RatioReport.from_intervals(schedule, zeros, zeros, zeros, [0] * len(schedule), (flag,))


def pmtc_mask(
    c: CostFunction,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    epsilon: float,
    samples: np.ndarray,
) -> np.ndarray:
    """x' in E^eps: c(x', y) + c(x, z) < c(x, y) + c(x', z) - eps d(x', x)."""
    norm = _space_norm(c)
    left = c.paired(samples, y) + c(x, z)
    right = c(x, y) + c.paired(samples, z) - epsilon * norm.norm(samples - x)
    return left < right


def pmtc_ratio(
    ref: SampledDensity,
    c: CostFunction,
    x: Any,
    y: Any,
    z: Any,
    cfg: TwistConfig,
) -> TwistReport:
    space = c.space
    norm = _space_norm(c)
    assert space is not None
    if cfg.epsilon is None:
        raise ConfigError("pmtc_ratio needs an epsilon; use pmtc_epsilon_scan to scan a grid")
    px, py, pz = (as_point(space, p) for p in (x, y, z))
    parameters = {"epsilon": cfg.epsilon, "budget": cfg.outer_budget, "seed": cfg.seed}
    if np.array_equal(py, pz):
        return TwistReport("exact", _zero_report(cfg.s_schedule, "y_equals_z"), parameters)

    estimates: list[float] = []
    lower: list[float] = []
    upper: list[float] = []
    for index, s in enumerate(cfg.s_schedule):
        samples = ref.sample_in_ball(derive_rng(cfg.seed, index), norm, px, s, cfg.outer_budget)
        hits = int(np.count_nonzero(pmtc_mask(c, px, py, pz, cfg.epsilon, samples)))
        p, lo, hi = proportion_interval(hits, cfg.outer_budget)
        estimates.append(p)
        lower.append(lo)
        upper.append(hi)
    ratios = RatioReport.from_intervals(
        cfg.s_schedule, estimates, lower, upper, [cfg.outer_budget] * len(estimates)
    )
    logger.info(
        "mongelab.pmtc.ratio",
        extra={"epsilon": cfg.epsilon, "verdict": ratios.verdict, "liminf": ratios.liminf_proxy},
    )
    return TwistReport("exact", ratios, parameters)


@dataclass(frozen=True)
class EpsilonScan:
    epsilons: tuple[float, ...]
    reports: tuple[TwistReport, ...]
    best_epsilon: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilons": list(self.epsilons),
            "best_epsilon": self.best_epsilon,
            "reports": [report.to_dict() for report in self.reports],
        }


def epsilon_grid(d_yz: float) -> tuple[float, ...]:
    return tuple(d_yz * 2.0 ** (-k) for k in EPSILON_GRID_EXPONENTS)


def pmtc_epsilon_scan(
    ref: SampledDensity,
    c: CostFunction,
    x: Any,
    y: Any,
    z: Any,
    cfg: TwistConfig,
) -> EpsilonScan:
    """PMTC ratios over eps in {2^-1, ..., 2^-8} d(y, z); reports the largest positive eps."""
    assert c.space is not None
    d_yz = float(_space_norm(c).norm(as_point(c.space, y) - as_point(c.space, z)))
    if d_yz == 0:
        raise ConfigError("pmtc_epsilon_scan needs y != z")
    epsilons = epsilon_grid(d_yz)
    reports = tuple(pmtc_ratio(ref, c, x, y, z, replace(cfg, epsilon=eps)) for eps in epsilons)
    positive = [eps for eps, report in zip(epsilons, reports) if report.verdict == "positive"]
    return EpsilonScan(epsilons, reports, max(positive) if positive else None)


def _boundary_points(
    norm: NormSpec,
    center: np.ndarray,
    r: float,
    shape: tuple[int, int],
    rng: np.random.Generator,
) -> np.ndarray:
    directions = rng.normal(size=(*shape, norm.dim))
    lengths = norm.norm(directions)
    lengths = np.where(lengths > 0, lengths, 1.0)
    return center + directions / lengths[..., None] * (r * BOUNDARY_SHRINK)


def _project_into_ball(
    norm: NormSpec,
    points: np.ndarray,
    center: np.ndarray,
    r: float,
) -> np.ndarray:
    offsets = points - center
    lengths = norm.norm(offsets)
    limit = r * BOUNDARY_SHRINK
    factor = np.where(lengths > limit, limit / np.where(lengths > 0, lengths, 1.0), 1.0)
    return center + offsets * factor[..., None]


def _four_point_margin(
    c: CostFunction,
    x_bar: np.ndarray,
    samples: np.ndarray,
    ys: np.ndarray,
    zs: np.ndarray,
) -> np.ndarray:
    """c(x_bar, y') + c(x', z') - c(x', y') - c(x_bar, z'); positive when strict."""
    count, inner, dim = ys.shape
    flat_y = ys.reshape(-1, dim)
    flat_z = zs.reshape(-1, dim)
    flat_x = np.repeat(samples, inner, axis=0)
    margin = (
        c.paired(x_bar, flat_y)
        + c.paired(flat_x, flat_z)
        - c.paired(flat_x, flat_y)
        - c.paired(x_bar, flat_z)
    )
    return margin.reshape(count, inner)


def lmtc_margins(
    c: CostFunction,
    x_bar: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    r2: float,
    samples: np.ndarray,
    rng: np.random.Generator,
    inner_budget: int,
    refine_steps: int = 8,
) -> np.ndarray:
    """Smallest sampled four-point margin per x' over adversarial (y', z') in B_r2(y) x B_r2(z).

    Adversaries are half interior, half near-boundary points; the worst pair
    for each x' is then refined by shrinking random perturbations.
    """
    norm = _space_norm(c)
    count = samples.shape[0]
    interior = max(1, inner_budget // 2)
    boundary = max(1, inner_budget - interior)
    ys = np.concatenate(
        [
            y + (sample_ball(norm, np.zeros(norm.dim), r2, count * interior, rng)).reshape(
                count, interior, norm.dim
            ),
            _boundary_points(norm, y, r2, (count, boundary), rng),
        ],
        axis=1,
    )
    zs = np.concatenate(
        [
            z + (sample_ball(norm, np.zeros(norm.dim), r2, count * interior, rng)).reshape(
                count, interior, norm.dim
            ),
            _boundary_points(norm, z, r2, (count, boundary), rng),
        ],
        axis=1,
    )
    margins = _four_point_margin(c, x_bar, samples, ys, zs)
    worst = np.argmin(margins, axis=1)
    rows = np.arange(count)
    best_margin = margins[rows, worst]
    best_y = ys[rows, worst]
    best_z = zs[rows, worst]
    for step in range(refine_steps):
        scale = 0.5 * r2 * 2.0 ** (-step)
        trial_y = _project_into_ball(
            norm, best_y + rng.uniform(-scale, scale, size=best_y.shape), y, r2
        )
        trial_z = _project_into_ball(
            norm, best_z + rng.uniform(-scale, scale, size=best_z.shape), z, r2
        )
        trial = _four_point_margin(c, x_bar, samples, trial_y[:, None, :], trial_z[:, None, :])[
            :, 0
        ]
        better = trial < best_margin
        best_margin = np.where(better, trial, best_margin)
        best_y = np.where(better[:, None], trial_y, best_y)
        best_z = np.where(better[:, None], trial_z, best_z)
    return best_margin


def lmtc_ratio(
    ref: SampledDensity,
    c: CostFunction,
    x_bar: Any,
    y: Any,
    z: Any,
    cfg: TwistConfig,
) -> LmtcBracket:
    """Optimistic and conservative estimates of m(F_{s|r2}) / m(B_s) along the s schedule."""
    space = c.space
    norm = _space_norm(c)
    assert space is not None
    px, py, pz = (as_point(space, p) for p in (x_bar, y, z))
    d_yz = float(norm.norm(py - pz))
    if d_yz == 0:
        raise ConfigError("lmtc_ratio needs y != z")
    r2 = cfg.r2 if cfg.r2 is not None else d_yz / 4.0
    parameters = {
        "r2": r2,
        "r2_default": cfg.r2 is None,
        "inner_budget": cfg.inner_budget,
        "outer_budget": cfg.outer_budget,
        "conservative_margin": cfg.conservative_margin,
        "seed": cfg.seed,
    }
    if d_yz <= 2.0 * r2:
        zero = _zero_report(cfg.s_schedule, "overlapping_balls")
        return LmtcBracket(
            TwistReport("optimistic", zero, parameters),
            TwistReport("conservative", zero, parameters),
        )

    optimistic: list[tuple[float, float, float]] = []
    conservative: list[tuple[float, float, float]] = []
    for index, s in enumerate(cfg.s_schedule):
        samples = ref.sample_in_ball(
            derive_rng(cfg.seed, index, 0), norm, px, s, cfg.outer_budget
        )
        margins = lmtc_margins(
            c,
            px,
            py,
            pz,
            r2,
            samples,
            derive_rng(cfg.seed, index, 1),
            cfg.inner_budget,
            cfg.refine_steps,
        )
        slack = cfg.conservative_margin * norm.norm(samples - px) * r2
        optimistic.append(
            proportion_interval(int(np.count_nonzero(margins > 0)), len(margins))
        )
        conservative.append(
            proportion_interval(int(np.count_nonzero(margins > slack)), len(margins))
        )

    def report(
        mode: Literal["optimistic", "conservative"],
        rows: list[tuple[float, float, float]],
    ) -> TwistReport:
        estimates, lower, upper = (list(column) for column in zip(*rows))
        ratios = RatioReport.from_intervals(
            cfg.s_schedule, estimates, lower, upper, [cfg.outer_budget] * len(rows)
        )
        return TwistReport(mode, ratios, parameters)

    bracket = LmtcBracket(report("optimistic", optimistic), report("conservative", conservative))
    logger.info(
        "mongelab.lmtc.ratio",
        extra={"verdict": bracket.verdict, "r2": r2},
    )
    return bracket


@dataclass(frozen=True)
class NeighbourhoodScan:
    base_points: np.ndarray
    brackets: tuple[LmtcBracket, ...]

    @property
    def verdict(self) -> Verdict:
        verdicts = {bracket.verdict for bracket in self.brackets}
        if verdicts == {"positive"}:
            return "positive"
        if "zero" in verdicts:
            return "zero"
        return "inconclusive"

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "base_points": self.base_points.tolist(),
            "brackets": [bracket.to_dict() for bracket in self.brackets],
        }


def lmtc_neighbourhood_scan(
    ref: SampledDensity,
    c: CostFunction,
    x: Any,
    y: Any,
    z: Any,
    cfg: TwistConfig,
    points: int = 5,
) -> NeighbourhoodScan:
    """LMTC brackets at x itself and at base points drawn from B_r1(x)."""
    assert c.space is not None
    norm = _space_norm(c)
    if points < 1:
        raise ConfigError(f"Expected at least one base point, got {points}")
    center = as_point(c.space, x)
    extra = (
        sample_ball(norm, center, cfg.r1, points - 1, derive_rng(cfg.seed, 99))
        if points > 1
        else np.empty((0, norm.dim))
    )
    base_points = np.vstack([center[None, :], extra])
    brackets = tuple(
        lmtc_ratio(ref, c, base, y, z, replace(cfg, seed=cfg.seed + index))
        for index, base in enumerate(base_points)
    )
    return NeighbourhoodScan(base_points, brackets)


@dataclass(frozen=True)
class C1Report:
    passed: bool
    sup_estimate: float
    epsilon: float
    witness: tuple[list[float], list[float], list[float]]
    parameters: Mapping[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> Literal["pass", "fail"]:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "sup_estimate": self.sup_estimate,
            "epsilon": self.epsilon,
            "witness": {
                "x_bar": self.witness[0],
                "y_bar": self.witness[1],
                "x_prime": self.witness[2],
            },
            "parameters": dict(self.parameters),
        }


def c1_probe(
    c: CostFunction,
    x: Any,
    y: Any,
    epsilon: float,
    r1: float,
    r2: float,
    delta: float,
    budget: int,
    seed: int,
) -> C1Report:
    """Sampled sup of |(c(x',y_bar) - c(x_bar,y_bar)) - (c(x',y) - c(x_bar,y))| / d(x',x_bar)."""
    if not (r1 > 0 and r2 > 0 and delta > 0):
        raise ConfigError("Expected r1, r2 and delta to be > 0")
    if epsilon < 0:
        raise ConfigError(f"Expected epsilon >= 0, got {epsilon}")
    if budget < 1:
        raise ConfigError(f"Expected budget >= 1, got {budget}")
    assert c.space is not None
    norm = _space_norm(c)
    px = as_point(c.space, x)
    py = as_point(c.space, y)
    rng = derive_rng(seed, 0)
    x_bar = sample_ball(norm, px, r1, budget, rng)
    y_bar = sample_ball(norm, py, r2, budget, rng)
    x_prime = x_bar + sample_ball(norm, np.zeros(norm.dim), delta, budget, rng)
    spread = norm.norm(x_prime - x_bar)
    numerator = np.abs(
        (c.paired(x_prime, y_bar) - c.paired(x_bar, y_bar))
        - (c.paired(x_prime, py) - c.paired(x_bar, py))
    )
    quotient = numerator / spread
    worst = int(np.argmax(quotient))
    sup = float(quotient[worst])
    return C1Report(
        passed=sup < epsilon,
        sup_estimate=sup,
        epsilon=float(epsilon),
        witness=(x_bar[worst].tolist(), y_bar[worst].tolist(), x_prime[worst].tolist()),
        parameters={"r1": r1, "r2": r2, "delta": delta, "budget": budget, "seed": seed},
    )


@dataclass(frozen=True)
class SampledVariation:
    centers: np.ndarray
    tail_ratios: tuple[float, ...]
    max_difference: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "centers": self.centers.tolist(),
            "tail_ratios": list(self.tail_ratios),
            "max_difference": self.max_difference,
        }


def c1_sampled_variation(
    ref: SampledDensity,
    c: CostFunction,
    y: Any,
    z: Any,
    epsilon: float,
    centers: Any,
    cfg: TwistConfig,
) -> SampledVariation:
    """Spread of the PMTC tail ratio over a grid of base points; reported without a verdict."""
    assert c.space is not None
    points = np.atleast_2d(np.asarray(centers, dtype=float))
    settings = replace(cfg, epsilon=epsilon)
    tails = tuple(
        pmtc_ratio(
            ref, c, center, y, z, replace(settings, seed=cfg.seed + index)
        ).ratios.liminf_proxy
        for index, center in enumerate(points)
    )
    values = np.array(tails, dtype=float)
    spread = float(np.nanmax(values) - np.nanmin(values)) if values.size else 0.0
    return SampledVariation(points, tails, spread)


@dataclass(frozen=True)
class TwistGap:
    gap: np.ndarray
    magnitude: float

    @property
    def twisted(self) -> bool:
        return self.magnitude > TOL.optimality


def twist_gradient_gap(
    c: CostFunction,
    x: Any,
    y: Any,
    z: Any,
    h: float = 1e-6,
) -> TwistGap:
    """Central-difference grad_x c(x, y) - grad_x c(x, z)."""
    assert c.space is not None
    norm = _space_norm(c)
    px, py, pz = (as_point(c.space, p) for p in (x, y, z))
    steps = np.eye(norm.dim) * h
    plus = px + steps
    minus = px - steps
    grad_y = (c.paired(plus, py) - c.paired(minus, py)) / (2.0 * h)
    grad_z = (c.paired(plus, pz) - c.paired(minus, pz)) / (2.0 * h)
    gap = grad_y - grad_z
    return TwistGap(gap=gap, magnitude=float(np.linalg.norm(gap)))


def make_equidistant(space: MetricSpace, x: Any, y: Any, z: Any) -> tuple[np.ndarray, float]:
    """Rescale z radially about x so that d(x, z) = d(x, y); returns (z, scale factor)."""
    if space.norm is None:
        raise ConfigError("Equidistant projection needs a normed space")
    px, py, pz = (as_point(space, p) for p in (x, y, z))
    d_xy = float(space.norm.norm(py - px))
    d_xz = float(space.norm.norm(pz - px))
    if d_xz == 0:
        raise ConfigError("Cannot project z = x onto the sphere around x")
    factor = d_xy / d_xz
    return px + (pz - px) * factor, factor


def random_equidistant_triple(
    space: MetricSpace,
    rng: np.random.Generator,
    *,
    low: float = 0.0,
    high: float = 1.0,
    min_separation: float = 0.1,
    min_length: float = 0.05,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x, y uniform in a box and z on the d(x, y)-sphere around x, with y, z kept apart."""
    if space.norm is None:
        raise ConfigError("Random triples need a normed space")
    norm = space.norm
    while True:
        x = rng.uniform(low, high, size=norm.dim)
        y = rng.uniform(low, high, size=norm.dim)
        length = float(norm.norm(y - x))
        if length < min_length:
            continue
        direction = rng.normal(size=norm.dim)
        size = float(norm.norm(direction))
        if size == 0:
            continue
        z = x + direction * (length / size)
        if float(norm.norm(z - y)) >= min_separation * length:
            return x, y, z


@dataclass(frozen=True)
class NonBranchingReport:
    x_samples: np.ndarray
    y_samples: np.ndarray
    z_samples: np.ndarray
    derivatives: np.ndarray
    lengths: np.ndarray
    rho_hat: float
    verdict: Literal["positive", "negative"]
    worst_index: int
    projection: Mapping[str, Any]
    note: str = NONBRANCHING_NOTE

    @property
    def worst_triple(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        i = self.worst_index
        return self.x_samples[i], self.y_samples[i], self.z_samples[i]

    def to_dict(self) -> dict[str, Any]:
        x, y, z = self.worst_triple
        return {
            "rho_hat": self.rho_hat,
            "verdict": self.verdict,
            "triples": int(self.derivatives.size),
            "worst": {
                "x": x.tolist(),
                "y": y.tolist(),
                "z": z.tolist(),
                "derivative": float(self.derivatives[self.worst_index]),
                "length": float(self.lengths[self.worst_index]),
            },
            "min_triangle_slack": float(np.min(self.derivatives + self.lengths)),
            "projection": dict(self.projection),
            "note": self.note,
        }


def nonbranching_scan(
    space: MetricSpace,
    x: Any,
    y: Any,
    z: Any,
    r: float,
    t_schedule: Sequence[float] = DEFAULT_T_SCHEDULE,
    triple_budget: int = 64,
    seed: int = 0,
    *,
    project: bool = False,
) -> NonBranchingReport:
    """rho_hat = min over sampled triples of 1 + D / d(x', y'), capped at 1.

    The base triple itself is always the first triple scanned. With
    ``project`` set, a non-equidistant base triple has z rescaled radially
    toward x instead of raising ``EquidistanceError``.

    Requires r < d(x, y) / 2 so the sampling balls around x and y are
    disjoint and every sampled x' differs from y'. Larger radii raise
    ``ConfigError``.
    """
    if space.norm is None:
        raise ConfigError("Non-branching scans need a normed space")
    norm = space.norm
    px, py, pz = (as_point(space, p) for p in (x, y, z))
    if np.array_equal(py, pz):
        raise ConfigError("Non-branching scan needs y != z")
    if not r > 0:
        raise ConfigError(f"Expected r > 0, got {r}")
    if triple_budget < 1:
        raise ConfigError(f"Expected triple_budget >= 1, got {triple_budget}")
    d_xy = float(norm.norm(py - px))
    if not r < d_xy / 2.0:
        raise ConfigError(f"Expected r < d(x, y) / 2 = {d_xy / 2.0}")
    gap = abs(d_xy - float(norm.norm(pz - px)))
    projection: dict[str, Any] = {"projected": False, "equidistance_gap": gap}
    if gap > TOL.equidistance:
        if not project:
            raise EquidistanceError(
                f"Expected d(x, y) = d(x, z) within {TOL.equidistance}, got gap {gap:.3e}"
            )
        pz, factor = make_equidistant(space, px, py, pz)
        projection.update({"projected": True, "scale": factor, "z": pz.tolist()})

    rng = derive_rng(seed, 0)
    xs = np.vstack([px[None, :], sample_ball(norm, px, r, triple_budget, rng)])
    ys = np.vstack([py[None, :], sample_ball(norm, py, r, triple_budget, rng)])
    zs = np.vstack([pz[None, :], sample_ball(norm, pz, r, triple_budget, rng)])
    _, derivatives = directional_metric_derivatives(space, xs, ys, zs, t_schedule)
    lengths = norm.norm(ys - xs)
    rho = 1.0 + derivatives / lengths
    worst = int(np.argmin(rho))
    rho_hat = float(min(1.0, rho[worst]))
    verdict: Literal["positive", "negative"] = (
        "positive" if rho_hat > TOL.nonbranching_floor else "negative"
    )
    logger.info(
        "mongelab.nonbranching.scan",
        extra={"rho_hat": rho_hat, "verdict": verdict, "triples": int(rho.size)},
    )
    return NonBranchingReport(
        x_samples=xs,
        y_samples=ys,
        z_samples=zs,
        derivatives=derivatives,
        lengths=lengths,
        rho_hat=rho_hat,
        verdict=verdict,
        worst_index=worst,
        projection=projection,
    )


@dataclass(frozen=True)
class NonBranchingCertificate:
    value: float
    equidistant: bool
    dual_norm: float
    flags: tuple[str, ...] = ()

    @property
    def rho_local(self) -> float:
        return 1.0 + self.value

    @property
    def strictly_above_minus_one(self) -> bool:
        return self.value > -1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "rho_local": self.rho_local,
            "equidistant": self.equidistant,
            "dual_norm": self.dual_norm,
            "flags": list(self.flags),
        }


def normed_nonbranching_certificate(
    n: NormSpec,
    x: Any,
    y: Any,
    z: Any,
    *,
    dual_samples: int = DUAL_CHECK_SAMPLES,
    seed: int = 0,
) -> NonBranchingCertificate:
    """v = grad g(x - z) . (y - x) / d(x, y) for a strictly convex C^1 norm g."""
    if not (n.strictly_convex and n.differentiable):
        raise ConfigError(f"Certificate needs a strictly convex C^1 norm, got {n.kind}")
    px, py, pz = (np.asarray(p, dtype=float).reshape(-1) for p in (x, y, z))
    if np.array_equal(px, py) or np.array_equal(px, pz):
        raise ConfigError("Certificate needs x distinct from y and z")
    if np.array_equal(py, pz):
        raise ConfigError("Certificate needs y != z")
    gradient = norm_gradient(n, px - pz)
    d_xy = float(n.norm(py - px))
    value = float(gradient @ (py - px)) / d_xy
    dual = sampled_dual_norm(n, gradient, dual_samples, derive_rng(seed, 0))
    gap = abs(d_xy - float(n.norm(pz - px)))
    flags: list[str] = []
    equidistant = gap <= TOL.equidistance
    if not equidistant:
        flags.append("not_equidistant")
    if abs(dual - 1.0) > TOL.optimality:
        flags.append("dual_norm_off_unit")
    if math.isclose(value, -1.0, abs_tol=TOL.optimality):
        flags.append("collinear_toward_z")
    return NonBranchingCertificate(
        value=value, equidistant=equidistant, dual_norm=dual, flags=tuple(flags)
    )
