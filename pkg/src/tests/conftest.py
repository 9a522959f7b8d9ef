from __future__ import annotations

from pathlib import Path
import os
from typing import Callable, Iterator

import pytest

from mongelab.instances import Instance, euclid_crossing_2x2
from mongelab.spaces import MetricSpace, NormSpec
from mongelab.transport import CostFunction


@pytest.fixture
def plane() -> MetricSpace:
    return MetricSpace.normed(NormSpec("euclidean", 2))


@pytest.fixture
def squared_cost(plane: MetricSpace) -> CostFunction:
    return CostFunction.squared_distance(plane)


@pytest.fixture
def crossing() -> Instance:
    return euclid_crossing_2x2()


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str, str], Path]:
    """Write a TOML experiment file into tmp_path and return its path."""

    def _write(name: str, body: str) -> Path:
        path = tmp_path / name
        path.write_text(body)
        return path

    return _write


@pytest.fixture(autouse=True)
def _clear_seed_env() -> Iterator[None]:
    saved = os.environ.pop("MONGELAB_SEED", None)
    yield
    os.environ.pop("MONGELAB_SEED", None)
    if saved is not None:
        os.environ["MONGELAB_SEED"] = saved
