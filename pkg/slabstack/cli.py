#!/usr/bin/env python3
"""
slabstack CLI - transmission statistics of stacks of random slabs.
"""

import argparse
import logging
import sys
from typing import Optional, Sequence
import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from slabstack import __version__
from slabstack.config import get_settings
from slabstack.errors import SlabStackError
from slabstack.models.grid import TargetFunction, TargetTag
from slabstack.models.stats import RngSpec
from slabstack.schemas.recurrence import RecurrenceConfig
from slabstack.schemas.run import Command, DerivedConstants, Figure, FigureMetadata, OutputFormat, RunConfig
from slabstack.services.bounds import BoundsService
from slabstack.services.figures import FIG4_N_MAX, FIG4_TAU1, FIG4_TRIALS, FigureData, FigureService
from slabstack.services.montecarlo import MonteCarloService
from slabstack.services.output import OutputService
from slabstack.services.recurrence import RecurrenceService
from slabstack.services.slab import SlabService

logger = logging.getLogger("slabstack")

EXIT_OK = 0
EXIT_VALIDATION = 2


def build_parser() -> argparse.ArgumentParser:
    """
    The argument parser of every subcommand.
    """
    settings = get_settings()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tau1", type=float, help="Single-slab transmission probability, 0 < tau1 <= 1")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    common.add_argument("--out", help="Output file; a <stem>.meta.json sidecar is written next to it")
    common.add_argument("--workers", type=int, default=settings.workers)
    common.add_argument("--log-level", default=settings.log_level, help="DEBUG, INFO, WARNING or ERROR")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-delta", type=float, default=0.005, help="Rapidity grid spacing")
    grid.add_argument("--quad-nodes", type=int, default=128, help="Periodic trapezoid nodes, even and >= 8")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--trials", type=int)
    seeded.add_argument("--seed", type=int, default=settings.default_seed)
    seeded.add_argument("--no-matrix-check", dest="matrix_check", action="store_false")

    parser = argparse.ArgumentParser(prog="slabstack", description=__doc__)
    parser.add_argument("--version", action="version", version=f"slabstack {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    exact = commands.add_parser("exact", parents=[common], help="Closed-form statistics of one N")
    exact.add_argument("--n", type=int, nargs=1, required=True)

    recurrence = commands.add_parser("recurrence", parents=[common, grid], help="<f(C_tot)> for N = 2 .. N_max")
    recurrence.add_argument("--n-max", type=int, required=True)
    recurrence.add_argument("--target", choices=["tau", "logtau", "invtau", "cosh", "cosh2"], default="tau")

    montecarlo = commands.add_parser("montecarlo", parents=[common, seeded], help="Monte Carlo ensembles")
    montecarlo.add_argument("--n", type=int, nargs="+", required=True)

    figure = commands.add_parser("figure", parents=[common, grid, seeded], help="Figure datasets")
    figure.add_argument("figure", choices=[f.value for f in Figure])
    figure.add_argument("--n-max", type=int)
    figure.add_argument("--grid-points", type=int, default=200, help="tau1 grid of fig5")
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    """
    Validate parsed arguments into a RunConfig, applying the figure defaults.
    """
    values = {
        "command": args.command,
        "tau1": args.tau1,
        "format": args.format,
        "out": args.out,
        "workers": args.workers,
    }
    for name in ("n_max", "target", "trials", "seed", "grid_delta", "quad_nodes", "grid_points", "matrix_check"):
        if getattr(args, name, None) is not None:
            values[name] = getattr(args, name)
    if getattr(args, "n", None):
        values["n"] = args.n
    if args.command == Command.FIGURE.value:
        values["figure"] = args.figure
        if args.figure != Figure.FIG5.value:
            values["tau1"] = FIG4_TAU1 if args.tau1 is None else args.tau1
            values.setdefault("n_max", FIG4_N_MAX)
        if args.figure == Figure.FIG4.value and args.trials is None:
            values["trials"] = FIG4_TRIALS
    return RunConfig(**values)


def recurrence_config(config: RunConfig) -> RecurrenceConfig:
    """
    Grid settings of a run.
    """
    return RecurrenceConfig(
        delta_eta=config.grid_delta,
        quad_nodes=config.quad_nodes,
        workers=config.workers,
        max_grid_points=get_settings().max_grid_points,
    )


def derived_constants(tau1: float) -> DerivedConstants:
    """
    The slab constants that go into a sidecar.
    """
    params = SlabService.slab_params(tau1)
    return DerivedConstants(
        C=params.C,
        S=params.S,
        theta=params.theta,
        upsilon=BoundsService.upsilon(tau1),
        lambda_=BoundsService.lambda_bound(tau1),
    )


def cmd_exact(config: RunConfig) -> FigureData:
    """
    Every closed-form statistic of one (tau1, N).
    """
    stats = SlabService.exact_statistics(config.tau1, config.n[0])
    return FigureData(frame=pd.DataFrame([stats.model_dump()]))


def cmd_recurrence(config: RunConfig) -> FigureData:
    """
    One row per N = 2 .. N_max with value, log value and error estimate.
    """
    target = TargetFunction.builtin(TargetTag(config.target))
    series = RecurrenceService.average_series(config.tau1, config.n_max, target, recurrence_config(config))
    rows = []
    for n in range(2, config.n_max + 1):
        result = series.result(n)
        rows.append(
            {
                "N": n,
                "value": result.linear_value,
                "log_value": result.log_value,
                "error_estimate": result.error_estimate,
            }
        )
    frame = pd.DataFrame(rows, columns=["N", "value", "log_value", "error_estimate"])
    return FigureData(frame=frame, error_estimates={"value": frame["error_estimate"].tolist()})


def cmd_montecarlo(config: RunConfig) -> FigureData:
    """
    Means and standard errors of every sampled quantity, one row per N.
    """
    ensembles = MonteCarloService.run_mc(
        config.tau1, config.n, config.trials, RngSpec(seed=config.seed), config.matrix_check, config.workers
    )
    rows = []
    for n, stats in ensembles.items():
        summary = stats.summary()
        rows.append(
            {
                "N": n,
                "trials": stats.count,
                "mean_tau": summary["tau"].mean,
                "se_tau": summary["tau"].standard_error,
                "mean_log_tau": summary["logtau"].mean,
                "se_log_tau": summary["logtau"].standard_error,
                "log_mean_inv_tau": summary["invtau"].log_mean,
                "rel_se_inv_tau": summary["invtau"].relative_error,
                "inv_tau_reliable": summary["invtau"].reliable,
                "log_mean_cosh": summary["cosh"].log_mean,
                "rel_se_cosh": summary["cosh"].relative_error,
                "log_mean_cosh2": summary["cosh2"].log_mean,
                "rel_se_cosh2": summary["cosh2"].relative_error,
                "jensen_ok": stats.jensen_holds,
            }
        )
    return FigureData(frame=pd.DataFrame(rows))


def cmd_figure(config: RunConfig) -> FigureData:
    """
    The dataset of one figure.
    """
    if config.figure is Figure.FIG5:
        return FigureService.fig5(config.grid_points)
    if config.figure is Figure.FIG4:
        return FigureService.fig4(
            config.tau1,
            config.n_max,
            config.trials,
            RngSpec(seed=config.seed),
            recurrence_config(config),
            config.workers,
            config.matrix_check,
        )
    return FigureService.fig6(config.tau1, config.n_max, recurrence_config(config))


COMMANDS = {
    Command.EXACT: cmd_exact,
    Command.RECURRENCE: cmd_recurrence,
    Command.MONTECARLO: cmd_montecarlo,
    Command.FIGURE: cmd_figure,
}


def setup_logging(level: str):
    """
    Send log records to stderr through rich, stdout carries data only.
    """
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    root = logging.getLogger("slabstack")
    root.handlers = [handler]
    root.setLevel(level.upper())
    root.propagate = False


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.
    Args:
        argv: Arguments without the program name, sys.argv[1:] when omitted.
    Returns:
        The exit code: 0 success, 2 invalid input, 3 convergence failure, 4 cross-check mismatch.
    """
    errors = Console(stderr=True)
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level)
    except ValueError as e:
        errors.print(f"[red]Invalid --log-level: {e}[/red]")
        return EXIT_VALIDATION
    try:
        config = run_config(args)
    except ValidationError as e:
        errors.print(f"[red]Invalid arguments:[/red] {e}")
        return EXIT_VALIDATION
    name = config.command.value if config.figure is None else f"{config.command.value} {config.figure.value}"
    logger.info("Running %s", name)
    try:
        data = COMMANDS[config.command](config)
        metadata = None
        if config.out is not None:
            metadata = FigureMetadata(
                command=name,
                flags=config.flags(),
                tool_version=__version__,
                derived_constants=derived_constants(config.tau1) if config.tau1 is not None else None,
                error_estimates=data.error_estimates,
                trend_report=data.trend.text if data.trend is not None else None,
                diagnostics=data.diagnostics,
            )
        OutputService.write(data.frame, config.format, config.out, metadata, stream=sys.stdout, console=Console())
    except SlabStackError as e:
        errors.print(f"[red]{type(e).__name__}: {e}[/red]")
        return e.exit_code
    logger.info("Finished %s", name)
    return EXIT_OK


def run_cli():
    """
    Console script entry point.
    """
    sys.exit(main())


if __name__ == "__main__":
    run_cli()
