from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
import sys
import time
from typing import Any

from pydantic import ValidationError

from mongelab import __version__
from mongelab.config_loader import ExperimentConfig, load_experiment_config
from mongelab.errors import ConfigError, MongeLabError, NumericalError
from mongelab.experiments import ExperimentOutcome, run_experiment
from mongelab.instances import build_instance, builtin_instances, dump_instance
from mongelab.reporting import RunReport, render_markdown_report, write_json_report, write_series
from mongelab.reporting.json_report import REPORT_FILENAME
from mongelab.transport import save_plan

logger = logging.getLogger(__name__)

RUNS_DIRNAME = "mongelab-runs"
MARKDOWN_FILENAME = "report.md"
EXIT_OK = 0
EXIT_UNEXPECTED = 1


def _configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mongelab", description="Run optimal transport experiments."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run the experiment described by a config.")
    run_parser.add_argument("config", type=str, help="Path to an experiment TOML file.")
    run_parser.add_argument(
        "--output",
        type=str,
        default=None,
        help="Directory for report.json and series CSVs (overrides output_dir).",
    )
    run_parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Override the config seed and MONGELAB_SEED.",
    )
    run_parser.add_argument(
        "--verbose",
        action="store_true",
        help="Log at DEBUG level.",
    )

    instance_parser = subparsers.add_parser("instance", help="Show or dump a builtin instance.")
    instance_parser.add_argument("name", type=str, help=f"One of: {', '.join(builtin_instances())}")
    instance_parser.add_argument("--n", type=int, default=None, help="Atom count.")
    instance_parser.add_argument("--seed", type=int, default=0, help="Seed for random instances.")
    instance_parser.add_argument(
        "--dump",
        type=str,
        default=None,
        help="Directory to write mu.csv, nu.csv and instance.json.",
    )

    subparsers.add_parser("version", help="Print the package version.")
    return parser


def _find_runs_dir(start: Path) -> Path:
    for base in [start, *start.parents]:
        candidate = base / RUNS_DIRNAME
        if candidate.is_dir():
            return candidate
    return start / RUNS_DIRNAME


def _resolve_output_dir(output_arg: str | None, config: ExperimentConfig) -> Path:
    if output_arg:
        return Path(output_arg).expanduser().resolve()
    if config.output_dir is not None:
        return config.output_dir
    return _find_runs_dir(Path.cwd()) / config.experiment


def _write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)


def write_artifacts(
    outcome: ExperimentOutcome,
    config: ExperimentConfig,
    output_dir: Path,
    wall_time: float,
) -> tuple[dict[str, Any], list[Path]]:
    paths = write_series(output_dir, outcome.series)
    if outcome.plan is not None:
        paths.extend(save_plan(outcome.plan, output_dir, outcome.cost))
    json_path = output_dir / REPORT_FILENAME
    markdown_path = output_dir / MARKDOWN_FILENAME
    report = RunReport(
        experiment=config.experiment,
        config=config.echo(),
        results=outcome.results,
        seed=config.seed,
        wall_time_seconds=wall_time,
        artifacts=sorted(path.name for path in [*paths, json_path, markdown_path]),
    )
    write_json_report(json_path, report)
    payload = report.to_dict()
    _write_text(markdown_path, render_markdown_report(payload))
    return payload, [*paths, json_path, markdown_path]


def _run(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config, seed=args.seed)
    output_dir = _resolve_output_dir(args.output, config)
    started = time.perf_counter()
    outcome = run_experiment(config)
    wall_time = time.perf_counter() - started
    payload, paths = write_artifacts(outcome, config, output_dir, wall_time)
    print(json.dumps(payload, indent=2, sort_keys=True))
    print("Artifacts written:\n" + "\n".join(str(path.resolve()) for path in paths))
    return EXIT_OK


def _instance(args: argparse.Namespace) -> int:
    instance = build_instance(args.name, args.n, args.seed)
    print(json.dumps(instance.describe(), indent=2, sort_keys=True))
    if args.dump:
        paths = dump_instance(instance, Path(args.dump).expanduser())
        print("Artifacts written:\n" + "\n".join(str(path.resolve()) for path in paths))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK

    _configure_logging(getattr(args, "verbose", False))
    try:
        if args.command == "instance":
            return _instance(args)
        return _run(args)
    except ValidationError as exc:
        print(f"mongelab: invalid config: {exc.error_count()} error(s)\n{exc}", file=sys.stderr)
        return ConfigError.exit_code
    except MongeLabError as exc:
        kind = "numerical failure" if isinstance(exc, NumericalError) else "error"
        print(f"mongelab: {kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.exception("mongelab.cli.unexpected")
        print(f"mongelab: unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
