"""Plot-ready CSV series with fixed column headers."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import pandas as pd

from mongelab.measures import DoublingScan, RatioReport

RATIO_COLUMNS = ("series", "index", "radius", "estimate", "lower", "upper", "count")
DOUBLING_COLUMNS = ("series", "index", "radius", "ratio", "lower", "upper")
NONBRANCHING_COLUMNS = ("index", "derivative", "length", "rho")
SCALAR_COLUMNS = ("series", "key", "value")


def ratio_frame(report: RatioReport, series: str) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "series": series,
            "index": np.arange(len(report.radii)),
            "radius": report.radii,
            "estimate": report.estimates,
            "lower": report.lower,
            "upper": report.upper,
            "count": report.counts,
        },
        columns=list(RATIO_COLUMNS),
    )


def ratio_frames(reports: Iterable[tuple[str, RatioReport]]) -> pd.DataFrame:
    frames = [ratio_frame(report, series) for series, report in reports]
    if not frames:
        return pd.DataFrame(columns=list(RATIO_COLUMNS))
    return pd.concat(frames, ignore_index=True)


def doubling_frame(scan: DoublingScan, series: str = "doubling") -> pd.DataFrame:
    return pd.DataFrame(
        {
            "series": series,
            "index": np.arange(len(scan.radii)),
            "radius": scan.radii,
            "ratio": scan.ratios,
            "lower": scan.lower,
            "upper": scan.upper,
        },
        columns=list(DOUBLING_COLUMNS),
    )


def nonbranching_frame(derivatives: np.ndarray, lengths: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "index": np.arange(derivatives.size),
            "derivative": derivatives,
            "length": lengths,
            "rho": 1.0 + derivatives / lengths,
        },
        columns=list(NONBRANCHING_COLUMNS),
    )


def scalar_frame(series: str, values: Mapping[str, Any]) -> pd.DataFrame:
    return pd.DataFrame(
        {"series": series, "key": list(values), "value": list(values.values())},
        columns=list(SCALAR_COLUMNS),
    )


def write_series(directory: Path, series: Mapping[str, pd.DataFrame]) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for name in sorted(series):
        path = directory / f"{name}.csv"
        series[name].to_csv(path, index=False, float_format="%.17g")
        paths.append(path)
    return paths
