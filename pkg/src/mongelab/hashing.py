from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"Cannot hash value of type {type(value).__name__}")


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_jsonable)


def compute_payload_hash(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def compute_measure_hash(points: Any, weights: Any) -> str:
    atoms = np.asarray(points)
    canonical = {
        "points": atoms.tolist() if atoms.dtype.kind != "f" else [
            [float.hex(float(value)) for value in np.atleast_1d(row)] for row in atoms
        ],
        "weights": [float.hex(float(w)) for w in np.asarray(weights).reshape(-1)],
    }
    return compute_payload_hash(canonical)
