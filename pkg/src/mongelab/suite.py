"""Acceptance battery: solver, certificate, derivative, twist and uniqueness checks.

Every criterion draws from its own derived generator, so running them on a
thread pool gives the same results as running them in order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from typing import Any, Callable

import numpy as np
import pandas as pd

from mongelab.conditions import (
    TwistConfig,
    lmtc_ratio,
    nonbranching_scan,
    normed_nonbranching_certificate,
    pmtc_ratio,
    random_equidistant_triple,
)
from mongelab.config_loader import ExperimentConfig
from mongelab.instances import euclid_crossing_2x2, linf_branching_triple, linf_two_segments
from mongelab.measures import (
    DiscreteMeasure,
    densely_scattered_probe,
    evenly_spread_directions,
    geometric_radii,
)
from mongelab.monotonicity import MonotonePairSet, certify, pairs_from_plan
from mongelab.oracle import (
    brute_force_monotone,
    brute_force_ot,
    cone_fraction,
    euclidean_derivative_at,
    pmtc_halfspace_fraction,
)
from mongelab.reporting.series import scalar_frame
from mongelab.samplers import (
    lebesgue_window,
    piecewise_constant,
    truncated_gaussian,
    uniform_box,
)
from mongelab.seeding import derive_rng
from mongelab.spaces import MetricSpace, NormSpec, directional_metric_derivative
from mongelab.transport import CostFunction, mapness, solve_kantorovich, uniqueness_probe

logger = logging.getLogger(__name__)

SOLVER_TOLERANCE = 1e-9
DERIVATIVE_TOLERANCE = 1e-4
NONBRANCHING_MARGIN = 1e-6
RATIO_TOLERANCE = 0.02
EQUAL_COST_TOLERANCE = 1e-12
MIN_TRIPLE_SPACING = 0.05
LMTC_MIN_SEPARATION = 0.5
CONE_BUDGET = 10_000
CONE_MIN_BUDGET = 500
CONE_DIRECTIONS = 16
CONE_BASE_POINTS = ((0.5, 0.5), (0.4, 0.6))


@dataclass(frozen=True)
class CriterionResult:
    criterion: int
    name: str
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "criterion": self.criterion,
            "name": self.name,
            "passed": self.passed,
            "details": self.details,
        }


def _scaled(count: int, scale: float, floor: int = 1) -> int:
    return max(floor, int(round(count * scale)))


def _ratio_tolerance(budget: int) -> float:
    """Full-budget tolerance, widened to five standard errors of a proportion near 1/2."""
    if budget >= CONE_BUDGET:
        return RATIO_TOLERANCE
    return max(RATIO_TOLERANCE, 5.0 * math.sqrt(0.25 / budget))


def _plane(kind: str, p: float | None = None) -> MetricSpace:
    return MetricSpace.normed(NormSpec(kind, 2, p))  # type: ignore[arg-type]


def solver_optimality(seed: int, scale: float) -> CriterionResult:
    space = _plane("euclidean")
    cost = CostFunction.squared_distance(space)
    count = _scaled(500, scale)
    worst_gap = 0.0
    failures = 0
    for index in range(count):
        rng = derive_rng(seed, 1, index)
        n = int(rng.integers(1, 8))
        xs = rng.uniform(0.0, 1.0, size=(n, 2))
        ys = rng.uniform(0.0, 1.0, size=(n, 2))
        plan = solve_kantorovich(
            DiscreteMeasure.from_atoms(xs), DiscreteMeasure.from_atoms(ys), cost
        )
        assert plan.cost is not None
        gap = abs(plan.cost - brute_force_ot(xs, ys).value)
        worst_gap = max(worst_gap, gap)
        failures += gap > SOLVER_TOLERANCE
    return CriterionResult(
        1,
        "solver cost matches permutation enumeration",
        failures == 0,
        {"instances": count, "failures": failures, "max_gap": worst_gap},
    )


def _random_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    raw = rng.uniform(0.1, 1.0, size=n)
    return raw / raw.sum()


def plan_monotonicity(seed: int, scale: float) -> CriterionResult:
    space = _plane("euclidean")
    cost = CostFunction.squared_distance(space)
    plans = _scaled(500, scale)
    violated = 0
    for index in range(plans):
        rng = derive_rng(seed, 2, 0, index)
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 9))
        mu = DiscreteMeasure.from_atoms(
            rng.uniform(0.0, 1.0, size=(n, 2)), _random_weights(rng, n), normalize=True
        )
        nu = DiscreteMeasure.from_atoms(
            rng.uniform(0.0, 1.0, size=(m, 2)), _random_weights(rng, m), normalize=True
        )
        plan = solve_kantorovich(mu, nu, cost)
        violated += certify(pairs_from_plan(plan, cost), cost).verdict != "monotone"

    pair_sets = _scaled(200, scale)
    disagreements = 0
    for index in range(pair_sets):
        rng = derive_rng(seed, 2, 1, index)
        n = int(rng.integers(1, 8))
        xs = rng.uniform(0.0, 1.0, size=(n, 2))
        ys = rng.uniform(0.0, 1.0, size=(n, 2))
        verdict = certify(MonotonePairSet.from_pairs(xs, ys), cost).verdict
        disagreements += (verdict == "monotone") != brute_force_monotone(xs, ys)
    return CriterionResult(
        2,
        "optimal supports are c-cyclically monotone",
        violated == 0 and disagreements == 0,
        {
            "plans": plans,
            "violated_plans": violated,
            "pair_sets": pair_sets,
            "oracle_disagreements": disagreements,
        },
    )


def derivative_identity(seed: int, scale: float) -> CriterionResult:
    space = _plane("euclidean")
    count = _scaled(100, scale)
    rng = derive_rng(seed, 3)
    worst = 0.0
    checked = 0
    while checked < count:
        x, y, z = rng.uniform(0.0, 1.0, size=(3, 2))
        if min(np.linalg.norm(y - x), np.linalg.norm(z - x)) < MIN_TRIPLE_SPACING:
            continue
        estimate = directional_metric_derivative(space, x, y, z).value
        worst = max(worst, abs(estimate - euclidean_derivative_at(x, y, z)))
        checked += 1
    return CriterionResult(
        3,
        "Euclidean derivative equals -cos(alpha) d(x, y)",
        worst <= DERIVATIVE_TOLERANCE,
        {"triples": count, "max_error": worst},
    )


def nonbranching_dichotomy(seed: int, scale: float) -> CriterionResult:
    count = _scaled(1000, scale)
    details: dict[str, Any] = {"triples_per_norm": count}
    passed = True
    for stream, (kind, p) in enumerate((("euclidean", None), ("lp", 4.0))):
        space = _plane(kind, p)
        assert space.norm is not None
        rng = derive_rng(seed, 4, stream)
        worst_value = math.inf
        worst_rho = math.inf
        for index in range(count):
            x, y, z = random_equidistant_triple(space, rng, min_separation=0.25)
            certificate = normed_nonbranching_certificate(
                space.norm, x, y, z, seed=seed + index
            )
            scan = nonbranching_scan(
                space,
                x,
                y,
                z,
                r=0.005 * float(space.norm.norm(y - x)),
                triple_budget=16,
                seed=seed + index,
            )
            worst_value = min(worst_value, certificate.value)
            worst_rho = min(worst_rho, scan.rho_hat)
            passed &= certificate.value > -1.0 + NONBRANCHING_MARGIN
            passed &= scan.verdict == "positive"
        label = kind if p is None else f"l{int(p)}"
        details[label] = {"min_certificate": worst_value, "min_rho_hat": worst_rho}

    instance = linf_branching_triple()
    assert instance.triple is not None
    x, y, z = instance.triple
    scan = nonbranching_scan(instance.space, x, y, z, r=0.01, triple_budget=16, seed=seed)
    base_gap = abs(float(scan.derivatives[0]) + float(scan.lengths[0]))
    details["linf"] = {"base_gap": base_gap, "rho_hat": scan.rho_hat, "verdict": scan.verdict}
    passed &= base_gap <= NONBRANCHING_MARGIN and scan.rho_hat <= NONBRANCHING_MARGIN
    return CriterionResult(4, "strictly convex norms do not branch, linf does", passed, details)


def pmtc_closed_form(seed: int, scale: float) -> CriterionResult:
    space = _plane("euclidean")
    budget = _scaled(100_000, scale, floor=10_000)
    cfg = TwistConfig(epsilon=0.1, s_schedule=(0.1, 0.05, 0.01), outer_budget=budget, seed=seed)
    report = pmtc_ratio(
        lebesgue_window(2),
        CostFunction.squared_distance(space),
        [0.0, 0.0],
        [1.0, 0.0],
        [-1.0, 0.0],
        cfg,
    )
    expected = pmtc_halfspace_fraction(0.1, 2.0)
    errors = [abs(value - expected) for value in report.ratios.estimates]
    return CriterionResult(
        5,
        "PMTC ratio matches the half-space fraction",
        max(errors) <= RATIO_TOLERANCE,
        {"budget": budget, "expected": expected, "estimates": list(report.ratios.estimates)},
    )


def densely_scattered(seed: int, scale: float) -> CriterionResult:
    space = _plane("euclidean")
    radii = geometric_radii()
    expected = cone_fraction(1.0, 1.0)
    budget = _scaled(CONE_BUDGET, scale, floor=CONE_MIN_BUDGET)
    tolerance = _ratio_tolerance(budget)
    densities = {
        "uniform": uniform_box([0.0, 0.0], [1.0, 1.0]),
        "gaussian": truncated_gaussian([0.5, 0.5], [0.3, 0.3], [0.0, 0.0], [1.0, 1.0]),
        "piecewise": piecewise_constant([0.0, 0.0], [1.0, 1.0], [[1.0, 2.0], [3.0, 0.5]]),
    }
    passed = True
    worst_error = 0.0
    verdicts: dict[str, str] = {}
    for stream, (name, density) in enumerate(densities.items()):
        for index, base in enumerate(CONE_BASE_POINTS):
            directions = evenly_spread_directions(space, base, CONE_DIRECTIONS, 1.0)
            probe = densely_scattered_probe(
                density,
                base,
                directions,
                1.0,
                radii,
                budget,
                seed=seed + 10 * stream + index,
            )
            verdicts[f"{name}_{index}"] = probe.verdict
            passed &= probe.verdict == "positive"
            if name == "uniform":
                for report in probe.reports:
                    tail = report.estimates[len(report.estimates) // 2 :]
                    worst_error = max(worst_error, max(abs(v - expected) for v in tail))
    passed &= worst_error <= tolerance
    return CriterionResult(
        6,
        "cone mass ratios are positive in every direction",
        passed,
        {
            "budget": budget,
            "tolerance": tolerance,
            "expected": expected,
            "max_tail_error": worst_error,
            "verdicts": verdicts,
        },
    )


def uniqueness_dichotomy(seed: int, scale: float) -> CriterionResult:
    segments = linf_two_segments(4)
    report = uniqueness_probe(segments.mu, segments.nu, segments.cost, seed=seed)
    passed = report.verdict == "multiple" and report.witness is not None
    witness_mapness: list[float] = []
    cost_gap = math.inf
    if report.witness is not None:
        first, second = report.witness
        assert first.cost is not None and second.cost is not None
        cost_gap = abs(first.cost - second.cost)
        witness_mapness = sorted(mapness(plan).mapness for plan in report.witness)
        passed &= cost_gap < EQUAL_COST_TOLERANCE and witness_mapness == [0.0, 1.0]

    crossing = euclid_crossing_2x2()
    passed &= (
        uniqueness_probe(crossing.mu, crossing.nu, crossing.cost, seed=seed).verdict == "unique"
    )
    space = _plane("euclidean")
    cost = CostFunction.squared_distance(space)
    count = _scaled(100, scale)
    multiple = 0
    for index in range(count):
        rng = derive_rng(seed, 7, index)
        n = int(rng.integers(2, 7))
        mu = DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(n, 2)))
        nu = DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(n, 2)))
        multiple += uniqueness_probe(mu, nu, cost, seed=seed).verdict != "unique"
    passed &= multiple == 0
    return CriterionResult(
        7,
        "linf segments admit several optimal plans, generic Euclidean instances one",
        passed,
        {
            "segments_verdict": report.verdict,
            "witness_cost_gap": cost_gap,
            "witness_mapness": witness_mapness,
            "random_instances": count,
            "random_multiple": multiple,
        },
    )


def lmtc_sanity(seed: int, scale: float) -> CriterionResult:
    space = _plane("euclidean")
    cost = CostFunction.squared_distance(space)
    reference = lebesgue_window(2)
    count = _scaled(20, scale)
    budget = _scaled(10_000, scale, floor=1_000)
    rng = derive_rng(seed, 8)
    positive = 0
    checked = 0
    while checked < count:
        x, y, z = rng.uniform(0.0, 1.0, size=(3, 2))
        if np.linalg.norm(y - z) < LMTC_MIN_SEPARATION:
            continue
        cfg = TwistConfig(outer_budget=budget, seed=seed + checked)
        positive += lmtc_ratio(reference, cost, x, y, z, cfg).conservative.verdict == "positive"
        checked += 1

    y = np.array([1.0, 0.0])
    z = np.array([-1.0, 0.0])
    overlap = lmtc_ratio(
        reference, cost, [0.0, 0.0], y, z, TwistConfig(r2=1.2, outer_budget=budget, seed=seed)
    )
    overlap_zero = all(v == 0.0 for v in overlap.optimistic.ratios.estimates) and all(
        v == 0.0 for v in overlap.conservative.ratios.estimates
    )
    return CriterionResult(
        8,
        "LMTC conservative bracket is positive for separated targets",
        positive == count and overlap_zero,
        {"triples": count, "positive": positive, "overlap_zero": overlap_zero, "budget": budget},
    )


CRITERIA: dict[int, Callable[[int, float], CriterionResult]] = {
    1: solver_optimality,
    2: plan_monotonicity,
    3: derivative_identity,
    4: nonbranching_dichotomy,
    5: pmtc_closed_form,
    6: densely_scattered,
    7: uniqueness_dichotomy,
    8: lmtc_sanity,
}


def run_criteria(
    criteria: list[int],
    seed: int,
    scale: float = 1.0,
    workers: int = 1,
) -> list[CriterionResult]:
    selected = sorted(set(criteria))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {number: executor.submit(CRITERIA[number], seed, scale) for number in selected}
        results = [futures[number].result() for number in selected]
    for result in results:
        logger.info(
            "mongelab.suite.criterion",
            extra={"criterion": result.criterion, "passed": result.passed},
        )
    return results


def run_suite(config: ExperimentConfig) -> tuple[dict[str, Any], dict[str, pd.DataFrame]]:
    spec = config.suite
    results = run_criteria(spec.criteria, config.seed, spec.scale, config.workers)
    payload = {
        "scale": spec.scale,
        "passed": all(result.passed for result in results),
        "criteria": [result.to_dict() for result in results],
    }
    frame = scalar_frame("criteria", {str(r.criterion): r.passed for r in results})
    return payload, {"criteria": frame}
