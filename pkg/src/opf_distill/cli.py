#!/usr/bin/env python3
"""
Command-line interface for OPF data distillation.

Usage:
    opf-distill [--config run.json] [--seed N] [--out-dir DIR] [--jobs N] <command> [--key value ...]

Commands:
    model check        - Validate the feeder and print its summary
    scenarios gen      - Generate a synthetic feeder and scenario file
    scenarios stats    - Per-feature statistics of the scenarios
    opf solve          - Solve the OPF for every scenario and export the batch
    fit                - Fit every (method, K or λ) task of the configuration
    eval [MAP ...]     - Evaluate map files against the full-data OPF
    sweep              - Fit and evaluate a K-grid over methods

Any RunConfig field can be overridden with ``--key value``; dotted keys reach
nested settings (``--apg.max_iter 50``), lists take comma-separated values
(``--methods pca,deim --ks 2,4``).

Exit codes: 0 success, 2 usage/configuration, 3 input data, 4 numerical failure.
"""

import argparse
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence, Tuple

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from opf_distill.domain.config import RunConfig, load_run_config
from opf_distill.exceptions import EXIT_CONFIG, EXIT_OK, DistillError
from opf_distill.grid import save_feeder_csv
from opf_distill.scenarios import EvalReport, feature_statistics, generate_synthetic, save_scenarios_csv
from opf_distill.services import DataService, EvalService, FitService, SweepService, TaskOutcome

logger = logging.getLogger("opf_distill")

console = Console()
error_console = Console(stderr=True)

COMMANDS = {
    ("model", "check"),
    ("scenarios", "gen"),
    ("scenarios", "stats"),
    ("opf", "solve"),
    ("fit", None),
    ("eval", None),
    ("sweep", None),
}


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Install a single rich handler on the package logger (stderr)."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = RichHandler(console=error_console, show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False


def handle_cli_errors(func: Callable[..., int]) -> Callable[..., int]:
    """
    Decorator mapping exceptions to messages and exit codes.

    DistillError subclasses report their own exit code; pydantic validation
    errors are configuration errors.
    """

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        try:
            return func(*args, **kwargs)
        except DistillError as e:
            error_console.print(f"[red]Error: {e.message}[/red]")
            return e.exit_code
        except ValidationError as e:
            error_console.print(f"[red]Invalid configuration: {e}[/red]")
            return EXIT_CONFIG
        except FileNotFoundError as e:
            error_console.print(f"[red]File not found: {e.filename}[/red]")
            return EXIT_CONFIG

    return wrapper


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opf-distill",
        description="Select and reconstruct OPF input features",
        allow_abbrev=False,
    )
    parser.add_argument("--config", type=Path, help="Run configuration JSON")
    parser.add_argument("--seed", type=int, help="Run seed")
    parser.add_argument("--out-dir", type=Path, help="Output directory")
    parser.add_argument("--jobs", type=int, help="Worker threads")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")
    parser.add_argument("--hard", action="store_true", help="opf solve: enforce the voltage band exactly")
    return parser


def split_overrides(extra: Sequence[str]) -> Tuple[List[Tuple[str, str]], List[str]]:
    """
    Separate ``--key value`` pairs from positional leftovers.

    Raises:
        DistillError: (exit 2) on a flag without a value
    """
    overrides: List[Tuple[str, str]] = []
    positional: List[str] = []
    i = 0
    while i < len(extra):
        token = extra[i]
        if token.startswith("--"):
            key, sep, value = token[2:].partition("=")
            if not sep:
                if i + 1 >= len(extra) or extra[i + 1].startswith("--"):
                    raise DistillError(f"option --{key} needs a value", exit_code=EXIT_CONFIG)
                value = extra[i + 1]
                i += 1
            overrides.append((key, value))
        else:
            positional.append(token)
        i += 1
    return overrides, positional


def _outcome_table(outcomes: Sequence[TaskOutcome]) -> Table:
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Task", style="cyan", no_wrap=True)
    table.add_column("K", justify="right")
    table.add_column("λ", justify="right")
    table.add_column("Status", style="white")
    for outcome in outcomes:
        k = "" if outcome.k is None else f"{outcome.k}{'' if outcome.exact_k else '*'}"
        lam = "" if outcome.lam is None else f"{outcome.lam:.4g}"
        status = "[green]✓ ok[/green]" if outcome.ok else f"[red]✗ {outcome.error}[/red]"
        table.add_row(outcome.task.name, k, lam, status)
    return table


def _report_table(reports: Sequence[EvalReport]) -> Table:
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Map", style="cyan", no_wrap=True)
    table.add_column("K", justify="right")
    table.add_column("Data error", justify="right")
    table.add_column("Minimizer error", justify="right")
    table.add_column("Out of band (lin)", justify="right")
    table.add_column("Out of band (AC)", justify="right")
    for report in reports:
        table.add_row(
            report.label,
            str(report.k),
            f"{report.data_error:.4e}",
            f"{report.minimizer_error:.4e}",
            f"{100 * report.voltage['linear'].out_of_band_fraction:.2f}%",
            f"{100 * report.voltage['ac'].out_of_band_fraction:.2f}%",
        )
    return table


def _worst(codes: Sequence[int]) -> int:
    failed = [c for c in codes if c != EXIT_OK]
    return max(failed) if failed else EXIT_OK


# ============================================================================
# Commands
# ============================================================================


def cmd_model_check(config: RunConfig) -> int:
    """Validate the feeder and print its summary."""
    summary = DataService(config).check_feeder()
    table = Table(show_header=False, box=None)
    table.add_column("Field", style="cyan", width=22)
    table.add_column("Value", style="white")
    for key, value in summary.items():
        table.add_row(key, f"{value:.4g}" if isinstance(value, float) else str(value))
    console.print(Panel(table, title="[bold]Feeder[/bold]", border_style="green"))
    return EXIT_OK


def cmd_scenarios_gen(config: RunConfig) -> int:
    """Generate a synthetic feeder and scenario file in the output directory."""
    scenarios, feeder = generate_synthetic(config.synthetic)
    save_feeder_csv(feeder, config.out_dir / "feeder")
    save_scenarios_csv(scenarios, config.out_dir / "scenarios.csv")
    console.print(
        f"[green]✓ Wrote {scenarios.p} features × {scenarios.t} scenarios and a "
        f"{feeder.n}-bus feeder to {config.out_dir}[/green]"
    )
    return EXIT_OK


def cmd_scenarios_stats(config: RunConfig) -> int:
    """Print per-feature statistics and flag constant rows."""
    stats = feature_statistics(DataService(config).scenarios())
    table = Table(show_header=True, header_style="bold magenta")
    for column in ("feature", "kind", "bus", "mean", "σ", "min", "max", "constant"):
        table.add_column(column, justify="left" if column in ("feature", "kind") else "right")
    for row in stats.itertuples(index=False):
        table.add_row(
            row.feature_id,
            row.kind,
            str(row.bus),
            f"{row.mean:.4g}",
            f"{row.std:.4g}",
            f"{row.min:.4g}",
            f"{row.max:.4g}",
            "[yellow]yes[/yellow]" if row.constant else "",
        )
    console.print(table)
    return EXIT_OK


def cmd_opf_solve(config: RunConfig, hard: bool = False) -> int:
    """Solve the OPF for every scenario and export the batch CSV."""
    path = config.out_dir / ("opf_hard.csv" if hard else "opf_batch.csv")
    solutions = DataService(config).solve_batch(path, hard=hard)
    counts: dict = {}
    for sol in solutions:
        counts[sol.status.value] = counts.get(sol.status.value, 0) + 1
    summary = ", ".join(f"{status}: {n}" for status, n in sorted(counts.items()))
    console.print(f"[green]✓ Solved {len(solutions)} scenarios ({summary}); results in {path}[/green]")
    return EXIT_OK


def cmd_fit(config: RunConfig) -> int:
    """Fit every task and report per-task outcomes."""
    if not config.has_targets():
        raise DistillError("fit needs at least one K or λ (--ks / --lambdas)", exit_code=EXIT_CONFIG)
    results = FitService(config, DataService(config)).run()
    outcomes = [outcome for outcome, _ in results]
    console.print(_outcome_table(outcomes))
    return _worst([o.exit_code for o in outcomes])


def cmd_eval(config: RunConfig, maps: Sequence[Path]) -> int:
    """Evaluate map files; the baseline row is always included."""
    paths = list(maps) or list(config.maps)
    if not paths:
        raise DistillError("eval needs map files (positional or --maps)", exit_code=EXIT_CONFIG)
    config = config.model_copy(update={"maps": paths})
    config.check_paths()
    service = EvalService(config, DataService(config))
    reports = service.evaluate_files(paths)
    service.write(reports, config.out_dir / "eval")
    console.print(_report_table(reports))
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    """Fit and evaluate every task; outputs land in per-task subdirectories."""
    if not config.ks:
        raise DistillError("sweep needs a K grid (--ks)", exit_code=EXIT_CONFIG)
    result = SweepService(config).run()
    console.print(_outcome_table(result.outcomes))
    return result.exit_code


@handle_cli_errors
def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    configure_logging(args.verbose, args.quiet)

    overrides, positional = split_overrides(extra)
    if not positional:
        parser.print_usage(sys.stderr)
        raise DistillError("missing command", exit_code=EXIT_CONFIG)
    for flag in ("seed", "out_dir", "jobs"):
        value = getattr(args, flag)
        if value is not None:
            overrides.append((flag, str(value)))

    name = positional.pop(0)
    if name in ("model", "scenarios", "opf"):
        command: Tuple[str, Optional[str]] = (name, positional.pop(0) if positional else None)
    else:
        command = (name, None)
    if command not in COMMANDS:
        raise DistillError(f"unknown command: {' '.join(c for c in command if c)}", exit_code=EXIT_CONFIG)
    if positional and command != ("eval", None):
        raise DistillError(f"unexpected arguments: {' '.join(positional)}", exit_code=EXIT_CONFIG)

    config = load_run_config(args.config, overrides)
    if command == ("model", "check"):
        return cmd_model_check(config)
    elif command == ("scenarios", "gen"):
        return cmd_scenarios_gen(config)
    elif command == ("scenarios", "stats"):
        return cmd_scenarios_stats(config)
    elif command == ("opf", "solve"):
        return cmd_opf_solve(config, hard=args.hard)
    elif command == ("fit", None):
        return cmd_fit(config)
    elif command == ("eval", None):
        return cmd_eval(config, [Path(p) for p in positional])
    else:
        return cmd_sweep(config)


def main() -> int:
    """Main entry point."""
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
