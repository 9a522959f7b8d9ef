from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    optimality: float = 1e-9
    mass_floor: float = 1e-12
    marginal: float = 1e-9
    weight_sum: float = 1e-12
    cycle_defect: float = 1e-9
    geodesic: float = 1e-9
    ternary_resolution: float = 1e-10
    triangle_bound: float = 1e-8
    equidistance: float = 1e-9
    nonbranching_floor: float = 1e-6
    plan_distinct: float = 1e-9
    metric_triangle: float = 1e-12
    apex: float = 1e-12


TOL = Tolerances()

# Reduced costs below this (relative to the cost scale) count as zero.
ZERO_REDUCED_COST = TOL.optimality
