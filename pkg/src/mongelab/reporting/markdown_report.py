from __future__ import annotations

import math
from typing import Any, Iterable


def _format_number(value: Any, decimals: int = 6) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.{decimals}g}"
    return str(value)


def _verdict_rows(results: dict[str, Any], prefix: str = "") -> Iterable[tuple[str, Any]]:
    for key in sorted(results):
        value = results[key]
        label = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _verdict_rows(value, f"{label}.")
        elif key in {"verdict", "optimal_cost", "liminf_proxy", "rho_hat", "defect", "value"}:
            yield label, value
        elif key in {"best_epsilon", "max_ratio", "worst_ratio", "sup_estimate", "passed"}:
            yield label, value


def render_markdown_report(payload: dict[str, Any]) -> str:
    metadata = payload.get("run_metadata", {})
    lines = [
        f"# mongelab run: {payload.get('experiment', '-')}",
        "",
        f"- Config hash: `{payload.get('config_hash', '-')}`",
        f"- Seed: {metadata.get('seed', '-')}",
        f"- Tool version: {metadata.get('tool_version', '-')}",
        f"- Wall time: {_format_number(metadata.get('wall_time_seconds'), 3)} s",
        "",
        "## Headline values",
        "",
        "| Field | Value |",
        "| --- | --- |",
    ]
    results = payload.get("results", {})
    rows = list(_verdict_rows(results)) if isinstance(results, dict) else []
    if not rows:
        lines.append("| - | - |")
    for label, value in rows:
        lines.append(f"| {label} | {_format_number(value)} |")

    criteria = results.get("criteria") if isinstance(results, dict) else None
    if isinstance(criteria, list) and criteria:
        lines.extend(
            ["", "## Acceptance criteria", "", "| # | Name | Passed |", "| --- | --- | --- |"]
        )
        for entry in criteria:
            lines.append(
                f"| {entry.get('criterion')} | {entry.get('name')} | "
                f"{'yes' if entry.get('passed') else 'no'} |"
            )

    artifacts = metadata.get("artifacts") or []
    if artifacts:
        lines.extend(["", "## Artifacts", ""])
        lines.extend(f"- `{path}`" for path in artifacts)
    return "\n".join(lines) + "\n"
