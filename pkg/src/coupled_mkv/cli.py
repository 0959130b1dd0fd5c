"""
CLI entry points for coupled-mkv experiments.

Exit codes: 0 on success, 2 when the experiment document is invalid or an
operation is called outside its contract, 3 on numerical failure (blow-up,
step-size violation, quadrature domain, non-convergence).
"""

import logging
import sys
from pathlib import Path
from typing import Optional

import typer
import yaml

from .config import load_config_from_path, log_level_from_env
from .experiments import ResolvedExperiment, build_plan, load_experiment, run_experiment
from .formatters import SummaryFormatter
from .lifecycle import experiment_context
from .util import InvalidArgumentError, NumericalFailure

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

app = typer.Typer(
    help="Particle, Picard, propagation-of-chaos and invariant-measure experiments "
    "for coupled two-species McKean-Vlasov systems.",
    add_completion=False,
    no_args_is_help=True,
)


def setup_logging(verbose: bool = False) -> None:
    """
    Set up logging configuration.

    Args:
        verbose: Whether to enable verbose logging; otherwise MKV_LOG_LEVEL decides
    """
    log_level = logging.DEBUG if verbose else log_level_from_env()
    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def _fail(code: int, message: str) -> typer.Exit:
    typer.echo(f"error: {message}", err=True)
    return typer.Exit(code=code)


def _load(config: Path, output_dir: Optional[Path]) -> ResolvedExperiment:
    try:
        document = load_config_from_path(config)
    except (FileNotFoundError, ValueError, yaml.YAMLError) as e:
        raise _fail(EXIT_INVALID, str(e))
    try:
        return load_experiment(document, base_dir=config.parent, output_dir=output_dir)
    except InvalidArgumentError as e:
        raise _fail(EXIT_INVALID, str(e))


@app.command()
def run(
    config: Path = typer.Argument(..., help="Experiment document (JSON or YAML)"),
    output_dir: Optional[Path] = typer.Option(
        None, "--output-dir", "-o", help="Overrides the document's output directory"
    ),
    dry_run: bool = typer.Option(False, "--dry-run", help="Print the plan and write nothing"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
) -> None:
    """Run an experiment and write its result files."""
    setup_logging(verbose)
    exp = _load(config, output_dir)
    formatter = SummaryFormatter()
    if dry_run:
        typer.echo(formatter.format_plan(build_plan(exp)))
        return

    try:
        with experiment_context(exp.as_dict(), exp.output_dir, exp.workers) as ctx:
            summary = run_experiment(exp, ctx)
    except InvalidArgumentError as e:
        raise _fail(EXIT_INVALID, str(e))
    except NumericalFailure as e:
        logger.error(f"Numerical failure: {e}")
        raise _fail(EXIT_NUMERICAL, str(e))

    typer.echo(formatter.format_summary(summary))
    if summary.get("status") != "ok":
        status = summary.get("status")
        raise _fail(EXIT_NUMERICAL, f"{exp.spec.kind} experiment finished with status {status}")


@app.command()
def describe(
    config: Path = typer.Argument(..., help="Experiment document (JSON or YAML)"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Include the resolved spec"),
) -> None:
    """Print the resolved plan of an experiment without computing anything."""
    setup_logging(False)
    exp = _load(config, output_dir)
    formatter = SummaryFormatter("verbose" if verbose else "standard")
    typer.echo(formatter.format_plan(build_plan(exp)))


@app.command()
def version() -> None:
    """Show version information."""
    from coupled_mkv import __version__

    typer.echo(f"coupled-mkv version {__version__}")


def main() -> None:
    """Console-script entry point."""
    app()


# Entry point when run as a module
if __name__ == "__main__":
    main()
