"""
CLI utility functions.
"""

from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import click
import typer
from click.core import ParameterSource
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from ..core.config import RunConfig
from ..core.errors import InvariantViolation
from ..core.storage import AXIS_NAMES
from ..utils.helpers import parse_float_list
from ..utils.logger import setup_logger

# Diagnostics go to stderr; result files are the only machine-readable output
console = Console(stderr=True)


def print_error(message: str) -> None:
    """Print error message with consistent formatting."""
    console.print(f"[red]✗[/red] {message}")


def print_success(message: str) -> None:
    """Print success message with consistent formatting."""
    console.print(f"[green]✓[/green] {message}")


def print_warning(message: str) -> None:
    """Print warning message with consistent formatting."""
    console.print(f"[yellow]⚠[/yellow] {message}")


def print_info(message: str) -> None:
    console.print(f"[cyan]•[/cyan] {message}")


def _is_valid(config: RunConfig) -> bool:
    try:
        config.validate()
    except InvariantViolation:
        return False
    return True


def resolve_config(ctx: typer.Context, config_path: str | None, **flags: Any) -> RunConfig:
    """Combine defaults, config file, environment and explicit flags.

    ``flags`` maps RunConfig attribute names to the values of the command
    parameters with the same name; only values the user actually typed
    override the file and environment.
    """
    config = RunConfig.load(config_path)
    explicit = {
        name: value
        for name, value in flags.items()
        if ctx.get_parameter_source(name) is ParameterSource.COMMANDLINE
    }
    merged = config.merged(explicit)
    try:
        merged.validate()
    except InvariantViolation as e:
        # a flag that breaks an otherwise valid configuration
        if explicit and _is_valid(config):
            raise click.UsageError(str(e), ctx=ctx) from e
        raise
    config = merged
    setup_logger(level=config.log_level)
    return config


def was_given(ctx: click.Context, name: str) -> bool:
    return ctx.get_parameter_source(name) is ParameterSource.COMMANDLINE


def output_path(config: RunConfig, filename: str) -> Path:
    path = Path(config.output_dir).expanduser()
    path.mkdir(parents=True, exist_ok=True)
    return path / filename


@contextmanager
def voxel_progress(total: int, description: str) -> Iterator[Callable[[int], None]]:
    """Progress bar on stderr; yields a callback taking the number of voxels done."""
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(description=description, total=total)
        yield lambda done: progress.advance(task, done)


def parse_render_slice(text: str | None) -> tuple[int, int] | None:
    """Parse ``<axis>:<index>`` with axis ``x``, ``y``, ``z`` or ``0..2``."""
    if text is None:
        return None
    axis_text, sep, index_text = text.partition(":")
    if not sep:
        raise typer.BadParameter(f"expected <axis>:<index>, got '{text}'", param_hint="--render-slice")
    axis_text = axis_text.strip().lower()
    if axis_text in AXIS_NAMES:
        axis = AXIS_NAMES[axis_text]
    elif axis_text in ("0", "1", "2"):
        axis = int(axis_text)
    else:
        raise typer.BadParameter(f"unknown axis '{axis_text}'", param_hint="--render-slice")
    try:
        index = int(index_text)
    except ValueError as e:
        raise typer.BadParameter(f"slice index '{index_text}' is not an integer", param_hint="--render-slice") from e
    return axis, index


def parse_floats(text: str, option: str, count: int | None = None) -> list[float]:
    try:
        values = parse_float_list(text)
    except ValueError as e:
        raise typer.BadParameter(f"'{text}' is not a comma-separated list of numbers", param_hint=option) from e
    if count is not None and len(values) != count:
        raise typer.BadParameter(f"expected {count} values, got {len(values)}", param_hint=option)
    return values


# Options shared by several commands
CONFIG_OPTION = typer.Option(None, "--config", help="JSON or YAML run-config file")
LOG_LEVEL_OPTION = typer.Option("INFO", "--log-level", help="Logging level")
INPUT_OPTION = typer.Option(..., "--input", "-i", help="PREVMAP-EFFECTS v1 file")
OUTPUT_DIR_OPTION = typer.Option("prevmap-out", "--output-dir", "-o", help="Directory for result files")
SEED_OPTION = typer.Option(0, "--seed", help="Base random seed")
WORKERS_OPTION = typer.Option(None, "--workers", help="Parallel workers (default: available CPUs)")
GRID_STEP_OPTION = typer.Option(0.05, "--grid-step", help="Spacing of the (p1, p2) start grid")
TOP_K_OPTION = typer.Option(5, "--top-k", help="EM starts kept from the grid")
MAX_ITER_OPTION = typer.Option(500, "--max-iter", help="EM iteration cap")
REL_TOL_OPTION = typer.Option(1e-8, "--rel-tol", help="Relative log-likelihood tolerance")
Q_OPTION = typer.Option(0.1, "--q", help="Benjamini-Hochberg FDR level")
RENDER_SLICE_OPTION = typer.Option(None, "--render-slice", help="Render a PGM slice, e.g. z:0")
