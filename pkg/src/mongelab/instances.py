"""Named transport instances: uniqueness witnesses, branching triples, random draws."""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any, Callable

import numpy as np

from mongelab.errors import ConfigError
from mongelab.measures import DiscreteMeasure, save_measure_csv
from mongelab.seeding import derive_rng
from mongelab.spaces import MetricSpace, NormSpec
from mongelab.transport import CostFunction

logger = logging.getLogger(__name__)

DEFAULT_ATOMS = 4
LP4_STREAM = 4
EUCLID_STREAM = 2
IDENTITY_STREAM = 1


@dataclass(frozen=True, eq=False)
class Instance:
    name: str
    space: MetricSpace
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    cost: CostFunction
    parameters: dict[str, Any] = field(default_factory=dict)
    triple: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    description: str = ""

    def describe(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "name": self.name,
            "description": self.description,
            "parameters": dict(self.parameters),
            "space": self.space.describe(),
            "cost": self.cost.describe(),
            "mu": self.mu.describe(),
            "nu": self.nu.describe(),
        }
        if self.triple is not None:
            payload["triple"] = {
                key: point.tolist() for key, point in zip(("x", "y", "z"), self.triple)
            }
        return payload


def _plane(kind: str, p: float | None = None) -> MetricSpace:
    return MetricSpace.normed(NormSpec(kind, 2, p))  # type: ignore[arg-type]


def _require_count(n: int) -> int:
    if int(n) != n or n < 1:
        raise ConfigError(f"Expected a positive atom count, got {n}")
    return int(n)


def linf_two_segments(n: int = DEFAULT_ATOMS, seed: int = 0) -> Instance:
    """n atoms on {0} x [0, 1] and n on {1} x [0, 1]; every linf distance is 1, c = d^2."""
    count = _require_count(n)
    heights = np.linspace(0.0, 1.0, count) if count > 1 else np.zeros(1)
    space = _plane("linf")
    return Instance(
        name="linf-two-segments",
        space=space,
        mu=DiscreteMeasure.from_atoms(np.column_stack([np.zeros(count), heights])),
        nu=DiscreteMeasure.from_atoms(np.column_stack([np.ones(count), heights])),
        cost=CostFunction.squared_distance(space),
        parameters={"n": count},
        description="constant-cost instance with many optimal plans",
    )


def euclid_crossing_2x2(n: int = 2, seed: int = 0) -> Instance:
    space = _plane("euclidean")
    return Instance(
        name="euclid-crossing-2x2",
        space=space,
        mu=DiscreteMeasure.from_atoms([[0.0, 0.0], [1.0, 0.0]]),
        nu=DiscreteMeasure.from_atoms([[0.0, 1.0], [1.0, 1.0]]),
        cost=CostFunction.squared_distance(space),
        description="two sources, two targets; the non-crossing matching costs 1",
    )


def lp4_random(n: int = DEFAULT_ATOMS, seed: int = 0) -> Instance:
    count = _require_count(n)
    rng = derive_rng(seed, LP4_STREAM)
    space = _plane("lp", 4.0)
    return Instance(
        name="lp4-random",
        space=space,
        mu=DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(count, 2))),
        nu=DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(count, 2))),
        cost=CostFunction.squared_distance(space),
        parameters={"n": count, "seed": seed},
        description="uniform atoms in the unit square under the l4 norm",
    )


def linf_branching_triple(n: int = 1, seed: int = 0) -> Instance:
    """x = (0, 0) with y = (1, .5), z = (1, -.5); the x-y segment runs straight at z."""
    x = np.array([0.0, 0.0])
    y = np.array([1.0, 0.5])
    z = np.array([1.0, -0.5])
    space = _plane("linf")
    return Instance(
        name="linf-branching-triple",
        space=space,
        mu=DiscreteMeasure.dirac(x),
        nu=DiscreteMeasure.from_atoms(np.vstack([y, z])),
        cost=CostFunction.distance(space),
        triple=(x, y, z),
        description="equidistant linf triple whose geodesic derivative equals -d(x, y)",
    )


def euclid_random(n: int = DEFAULT_ATOMS, seed: int = 0) -> Instance:
    count = _require_count(n)
    rng = derive_rng(seed, EUCLID_STREAM)
    space = _plane("euclidean")
    return Instance(
        name="euclid-random",
        space=space,
        mu=DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(count, 2))),
        nu=DiscreteMeasure.from_atoms(rng.uniform(0.0, 1.0, size=(count, 2))),
        cost=CostFunction.squared_distance(space),
        parameters={"n": count, "seed": seed},
        description="uniform atoms in the unit square, squared Euclidean cost",
    )


def identity(n: int = DEFAULT_ATOMS, seed: int = 0) -> Instance:
    count = _require_count(n)
    points = derive_rng(seed, IDENTITY_STREAM).uniform(0.0, 1.0, size=(count, 2))
    space = _plane("euclidean")
    measure = DiscreteMeasure.from_atoms(points)
    return Instance(
        name="identity",
        space=space,
        mu=measure,
        nu=measure,
        cost=CostFunction.squared_distance(space),
        parameters={"n": count, "seed": seed},
        description="equal marginals; the identity coupling has cost 0",
    )


_BUILDERS: dict[str, Callable[..., Instance]] = {
    "linf-two-segments": linf_two_segments,
    "euclid-crossing-2x2": euclid_crossing_2x2,
    "lp4-random": lp4_random,
    "linf-branching-triple": linf_branching_triple,
    "euclid-random": euclid_random,
    "identity": identity,
}


def builtin_instances() -> tuple[str, ...]:
    return tuple(_BUILDERS)


def build_instance(name: str, n: int | None = None, seed: int = 0) -> Instance:
    builder = _BUILDERS.get(name)
    if builder is None:
        known = ", ".join(sorted(_BUILDERS))
        raise ConfigError(f"Unknown instance '{name}'. Known instances: {known}")
    if n is None:
        return builder(seed=seed)
    return builder(n=n, seed=seed)


def dump_instance(instance: Instance, directory: str | Path) -> list[Path]:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    paths = [
        save_measure_csv(instance.mu, target / "mu.csv"),
        save_measure_csv(instance.nu, target / "nu.csv"),
    ]
    header = target / "instance.json"
    header.write_text(json.dumps(instance.describe(), indent=2, sort_keys=True))
    paths.append(header)
    logger.info("mongelab.instance.dumped", extra={"instance": instance.name, "files": len(paths)})
    return paths
