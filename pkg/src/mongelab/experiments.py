"""Build domain objects from a validated config and run one experiment kind."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Any, Callable

import numpy as np
import pandas as pd

from mongelab.conditions import (
    TwistConfig,
    c1_probe,
    c1_sampled_variation,
    lmtc_neighbourhood_scan,
    lmtc_ratio,
    nonbranching_scan,
    normed_nonbranching_certificate,
    pmtc_epsilon_scan,
    pmtc_ratio,
    twist_gradient_gap,
)
from mongelab.config_loader import (
    CostSpec,
    DensitySpec,
    ExperimentConfig,
    MeasureSpec,
    SpaceSpec,
    TwistSpec,
)
from mongelab.errors import ConfigError
from mongelab.instances import build_instance
from mongelab.measures import (
    DiscreteMeasure,
    cone_mass_ratio,
    densely_scattered_probe,
    doubling_ratio_scan,
    evenly_spread_directions,
    geometric_radii,
    load_measure_csv,
    support_doubling_constant,
)
from mongelab.monotonicity import (
    MonotonePairSet,
    certify,
    cycle_weight,
    load_pairs_csv,
    pairs_from_plan,
)
from mongelab.reporting.series import (
    doubling_frame,
    nonbranching_frame,
    ratio_frame,
    ratio_frames,
)
from mongelab.samplers import SampledDensity, build_density
from mongelab.spaces import MetricSpace, NormSpec, geodesic, load_finite_space
from mongelab.suite import run_suite
from mongelab.transport import (
    CostFunction,
    TransportPlan,
    check_marginals,
    mapness,
    solve_kantorovich,
    uniqueness_probe,
)

logger = logging.getLogger(__name__)


@dataclass
class ExperimentOutcome:
    kind: str
    results: dict[str, Any]
    series: dict[str, pd.DataFrame] = field(default_factory=dict)
    plan: TransportPlan | None = None
    cost: CostFunction | None = None


@dataclass(frozen=True, eq=False)
class Problem:
    space: MetricSpace
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    cost: CostFunction
    instance: str | None = None


def build_space(spec: SpaceSpec) -> MetricSpace:
    if spec.kind == "finite":
        if spec.matrix_file is not None:
            return load_finite_space(spec.matrix_file)
        assert spec.matrix is not None
        labels = spec.labels or [str(i) for i in range(len(spec.matrix))]
        return MetricSpace.finite(labels, spec.matrix)
    return MetricSpace.normed(NormSpec(spec.norm, spec.dim, spec.p))


def build_cost(spec: CostSpec, space: MetricSpace) -> CostFunction:
    if spec.kind == "squared_distance":
        return CostFunction.squared_distance(space)
    if spec.kind == "distance":
        return CostFunction.distance(space)
    if spec.kind == "power":
        assert spec.exponent is not None
        return CostFunction.power(space, spec.exponent)
    if spec.table_file is not None:
        if not spec.table_file.exists():
            raise ConfigError(f"Cost table not found: {spec.table_file}")
        table = pd.read_csv(spec.table_file, header=None).to_numpy(dtype=float)
        return CostFunction.from_table(table, name=spec.table_file.stem)
    return CostFunction.from_table(spec.table)


def build_measure(spec: MeasureSpec) -> DiscreteMeasure:
    if spec.csv is not None:
        return load_measure_csv(spec.csv, normalize=spec.normalize)
    return DiscreteMeasure.from_atoms(spec.points, spec.weights, normalize=spec.normalize)


def build_reference(spec: DensitySpec, space: MetricSpace) -> SampledDensity:
    return build_density(spec.name, spec.params, dim=space.dim)


def twist_config(spec: TwistSpec | None, seed: int) -> TwistConfig:
    if spec is None:
        return TwistConfig(seed=seed)
    return TwistConfig(
        epsilon=spec.epsilon,
        s_schedule=tuple(spec.s_schedule),
        r1=spec.r1,
        r2=spec.r2,
        inner_budget=spec.inner_budget,
        outer_budget=spec.outer_budget,
        seed=seed,
        conservative_margin=spec.conservative_margin,
        refine_steps=spec.refine_steps,
        delta=spec.delta,
    )


def resolve_problem(config: ExperimentConfig) -> Problem:
    if config.instance is not None:
        instance = build_instance(config.instance.name, config.instance.n, config.seed)
        cost = (
            build_cost(config.cost, instance.space) if config.cost is not None else instance.cost
        )
        return Problem(instance.space, instance.mu, instance.nu, cost, instance.name)
    assert config.source is not None and config.target is not None
    space = build_space(config.space)
    return Problem(
        space,
        build_measure(config.source),
        build_measure(config.target),
        _config_cost(config, space),
    )


def _config_cost(config: ExperimentConfig, space: MetricSpace) -> CostFunction:
    if config.cost is None:
        raise ConfigError(f"`{config.experiment}` experiments need a `cost` section")
    return build_cost(config.cost, space)


def _triple(config: ExperimentConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    assert config.triple is not None
    x = np.asarray(config.triple.x, dtype=float)
    y = np.asarray(config.triple.y, dtype=float)
    z = None if config.triple.z is None else np.asarray(config.triple.z, dtype=float)
    return x, y, z


def _radii(radii: list[float] | None, r0: float, levels: int) -> tuple[float, ...]:
    return tuple(radii) if radii is not None else geometric_radii(r0, levels)


def run_solve(config: ExperimentConfig) -> ExperimentOutcome:
    problem = resolve_problem(config)
    plan = solve_kantorovich(problem.mu, problem.nu, problem.cost)
    check_marginals(plan)
    certificate = certify(pairs_from_plan(plan, problem.cost), problem.cost)
    results = {
        "instance": problem.instance,
        "optimal_cost": plan.cost,
        "entries": int(plan.masses.size),
        "iterations": plan.metadata.get("iterations"),
        "degenerate": plan.metadata.get("degenerate"),
        "diagnostics": mapness(plan).to_dict(),
        "support_certificate": certificate.to_dict(),
    }
    return ExperimentOutcome("solve", results, plan=plan, cost=problem.cost)


def _certify_pairs(config: ExperimentConfig) -> tuple[MonotonePairSet, CostFunction, str]:
    spec = config.certify
    if spec is not None and spec.pairs_csv is not None:
        space = build_space(config.space)
        cost = _config_cost(config, space)
        return load_pairs_csv(spec.pairs_csv, cost), cost, "pairs_csv"
    if spec is not None and spec.sources is not None:
        space = build_space(config.space)
        cost = _config_cost(config, space)
        return MonotonePairSet.from_pairs(spec.sources, spec.targets, cost), cost, "inline"
    problem = resolve_problem(config)
    plan = solve_kantorovich(problem.mu, problem.nu, problem.cost)
    return pairs_from_plan(plan, problem.cost), problem.cost, "optimal_plan"


def run_certify(config: ExperimentConfig) -> ExperimentOutcome:
    pairs, cost, origin = _certify_pairs(config)
    certificate = certify(pairs, cost)
    results: dict[str, Any] = {
        "pairs": pairs.size,
        "pair_source": origin,
        "certificate": certificate.to_dict(),
    }
    if certificate.cycle:
        results["recomputed_cycle_weight"] = cycle_weight(pairs, certificate.cycle, cost)
    return ExperimentOutcome("certify", results)


def run_uniqueness(config: ExperimentConfig) -> ExperimentOutcome:
    problem = resolve_problem(config)
    report = uniqueness_probe(
        problem.mu, problem.nu, problem.cost, trials=config.uniqueness.trials, seed=config.seed
    )
    results = {"instance": problem.instance, **report.to_dict()}
    return ExperimentOutcome("uniqueness", results, plan=report.plan, cost=problem.cost)


def _twist_setup(
    config: ExperimentConfig,
) -> tuple[SampledDensity, CostFunction, np.ndarray, np.ndarray, np.ndarray, TwistConfig]:
    space = build_space(config.space)
    if not space.is_normed:
        raise ConfigError(f"`{config.experiment}` experiments need a normed space")
    assert config.reference is not None
    x, y, z = _triple(config)
    assert z is not None
    return (
        build_reference(config.reference, space),
        _config_cost(config, space),
        x,
        y,
        z,
        twist_config(config.twist, config.seed),
    )


def run_pmtc(config: ExperimentConfig) -> ExperimentOutcome:
    ref, cost, x, y, z, cfg = _twist_setup(config)
    assert config.twist is not None
    mode = config.twist.mode
    if mode == "neighbourhood":
        raise ConfigError("`pmtc` experiments support modes `ratio` and `epsilon_scan`")
    if mode == "epsilon_scan" or cfg.epsilon is None:
        scan = pmtc_epsilon_scan(ref, cost, x, y, z, cfg)
        frames = ratio_frames(
            (f"epsilon_{index}", report.ratios) for index, report in enumerate(scan.reports)
        )
        return ExperimentOutcome(
            "pmtc", {"mode": "epsilon_scan", **scan.to_dict()}, {"ratios": frames}
        )
    report = pmtc_ratio(ref, cost, x, y, z, cfg)
    return ExperimentOutcome(
        "pmtc",
        {"mode": "ratio", **report.to_dict()},
        {"ratios": ratio_frame(report.ratios, "pmtc")},
    )


def run_lmtc(config: ExperimentConfig) -> ExperimentOutcome:
    ref, cost, x, y, z, cfg = _twist_setup(config)
    assert config.twist is not None
    mode = config.twist.mode
    if mode == "epsilon_scan":
        raise ConfigError("`lmtc` experiments support modes `ratio` and `neighbourhood`")
    if mode == "neighbourhood":
        scan = lmtc_neighbourhood_scan(ref, cost, x, y, z, cfg, points=config.twist.points)
        pieces = []
        for index, bracket in enumerate(scan.brackets):
            pieces.append((f"optimistic_{index}", bracket.optimistic.ratios))
            pieces.append((f"conservative_{index}", bracket.conservative.ratios))
        return ExperimentOutcome(
            "lmtc", {"mode": "neighbourhood", **scan.to_dict()}, {"ratios": ratio_frames(pieces)}
        )
    bracket = lmtc_ratio(ref, cost, x, y, z, cfg)
    frames = ratio_frames(
        [
            ("optimistic", bracket.optimistic.ratios),
            ("conservative", bracket.conservative.ratios),
        ]
    )
    return ExperimentOutcome("lmtc", {"mode": "ratio", **bracket.to_dict()}, {"ratios": frames})


def run_c1(config: ExperimentConfig) -> ExperimentOutcome:
    space = build_space(config.space)
    cost = _config_cost(config, space)
    x, y, z = _triple(config)
    spec = config.c1
    probe = c1_probe(
        cost, x, y, spec.epsilon, spec.r1, spec.r2, spec.delta, spec.budget, config.seed
    )
    results: dict[str, Any] = {"probe": probe.to_dict()}
    if z is not None:
        gap = twist_gradient_gap(cost, x, y, z)
        results["twist_gradient_gap"] = {
            "gap": gap.gap.tolist(),
            "magnitude": gap.magnitude,
            "twisted": gap.twisted,
        }
        if spec.centers is not None and config.reference is not None:
            variation = c1_sampled_variation(
                build_reference(config.reference, space),
                cost,
                y,
                z,
                spec.epsilon,
                spec.centers,
                twist_config(config.twist, config.seed),
            )
            results["sampled_variation"] = variation.to_dict()
    return ExperimentOutcome("c1", results)


def run_nonbranching(config: ExperimentConfig) -> ExperimentOutcome:
    space = build_space(config.space)
    if space.norm is None:
        raise ConfigError("`nonbranching` experiments need a normed space")
    x, y, z = _triple(config)
    assert z is not None
    spec = config.nonbranching
    report = nonbranching_scan(
        space,
        x,
        y,
        z,
        spec.r,
        tuple(spec.t_schedule),
        spec.triple_budget,
        config.seed,
        project=spec.project,
    )
    results: dict[str, Any] = {"scan": report.to_dict()}
    if spec.certificate and space.norm.strictly_convex:
        base_z = report.z_samples[0]
        certificate = normed_nonbranching_certificate(
            space.norm, x, y, base_z, dual_samples=spec.dual_samples, seed=config.seed
        )
        results["certificate"] = certificate.to_dict()
    return ExperimentOutcome(
        "nonbranching",
        results,
        {"nonbranching": nonbranching_frame(report.derivatives, report.lengths)},
    )


def run_cone(config: ExperimentConfig) -> ExperimentOutcome:
    space = build_space(config.space)
    if not space.is_normed:
        raise ConfigError("`cone` experiments need a normed space")
    assert config.reference is not None and config.cone is not None
    spec = config.cone
    ref = build_reference(config.reference, space)
    radii = _radii(spec.radii, spec.r0, spec.levels)
    x = np.asarray(spec.x, dtype=float)
    if spec.directions > 0:
        directions = evenly_spread_directions(space, x, spec.directions, spec.length)
        k = spec.k if spec.k is not None else spec.length
        probe = densely_scattered_probe(ref, x, directions, k, radii, spec.budget, seed=config.seed)
        frames = ratio_frames(
            (f"direction_{index}", report) for index, report in enumerate(probe.reports)
        )
        return ExperimentOutcome(
            "cone", {"mode": "densely_scattered", "k": k, **probe.to_dict()}, {"ratios": frames}
        )
    gamma = geodesic(space, x, spec.end)
    k = spec.k if spec.k is not None else gamma.length
    report = cone_mass_ratio(ref, x, gamma, k, radii, spec.budget, seed=config.seed)
    return ExperimentOutcome(
        "cone",
        {"mode": "single", "k": k, "length": gamma.length, **report.to_dict()},
        {"ratios": ratio_frame(report, "cone")},
    )


def run_doubling(config: ExperimentConfig) -> ExperimentOutcome:
    assert config.doubling is not None
    spec = config.doubling
    space = build_space(config.space)
    radii = _radii(spec.radii, spec.r0, spec.levels)
    measure: DiscreteMeasure | SampledDensity
    if config.source is not None:
        measure = build_measure(config.source)
    else:
        assert config.reference is not None
        measure = build_reference(config.reference, space)
    if spec.center is None:
        if not isinstance(measure, DiscreteMeasure):
            raise ConfigError("Doubling scans of a reference density need `center`")
        constant, index = support_doubling_constant(measure, radii, space=space)
        return ExperimentOutcome(
            "doubling",
            {"mode": "support", "max_ratio": constant, "worst_atom": index, "radii": list(radii)},
        )
    scan = doubling_ratio_scan(
        measure, spec.center, radii, spec.budget, space=space, seed=config.seed
    )
    return ExperimentOutcome(
        "doubling", {"mode": "center", **scan.to_dict()}, {"doubling": doubling_frame(scan)}
    )


def run_suite_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    results, series = run_suite(config)
    return ExperimentOutcome("suite", results, series)


RUNNERS: dict[str, Callable[[ExperimentConfig], ExperimentOutcome]] = {
    "solve": run_solve,
    "certify": run_certify,
    "uniqueness": run_uniqueness,
    "pmtc": run_pmtc,
    "lmtc": run_lmtc,
    "c1": run_c1,
    "nonbranching": run_nonbranching,
    "cone": run_cone,
    "doubling": run_doubling,
    "suite": run_suite_experiment,
}


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    runner = RUNNERS.get(config.experiment)
    if runner is None:
        raise ConfigError(f"Unknown experiment kind '{config.experiment}'")
    logger.info("mongelab.experiment.start", extra={"experiment": config.experiment})
    outcome = runner(config)
    logger.info("mongelab.experiment.done", extra={"experiment": config.experiment})
    return outcome
