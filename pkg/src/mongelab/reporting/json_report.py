from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from mongelab import __version__
from mongelab.hashing import compute_payload_hash

REPORT_FILENAME = "report.json"


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings "nan", "inf", "-inf"."""
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isfinite(number):
            return number
        return "nan" if math.isnan(number) else ("inf" if number > 0 else "-inf")
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass
class RunReport:
    experiment: str
    config: dict[str, Any]
    results: dict[str, Any]
    seed: int
    wall_time_seconds: float = 0.0
    artifacts: list[str] = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return compute_payload_hash(to_jsonable(self.config))

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "config": to_jsonable(self.config),
            "config_hash": self.config_hash,
            "results": to_jsonable(self.results),
            "run_metadata": {
                "tool_version": __version__,
                "seed": self.seed,
                "wall_time_seconds": self.wall_time_seconds,
                "artifacts": list(self.artifacts),
            },
        }


def write_json_report(path: Path, report: RunReport) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return path


def results_hash(payload: Mapping[str, Any]) -> str:
    """Hash of the reproducible part of a written report."""
    return compute_payload_hash(payload["results"])
