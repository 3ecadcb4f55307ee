"""
Main CLI application using Typer.
"""

import sys
from collections.abc import Sequence
from importlib.metadata import PackageNotFoundError, version

import click
import typer

from ..core.errors import PrevmapError
from .commands.efficiency import are_command, power_command
from .commands.fit import fit_command, significance_command
from .commands.gof import gof_command
from .commands.pipeline import pipeline_command
from .commands.regions import regions_command
from .commands.simulate import simulate_command
from .utils import console, print_error

try:
    __version__ = version("prevmap")
except PackageNotFoundError:
    __version__ = "0.1.0"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

# click 8.2+ reports a bare invocation as a usage error whose message is the help
_NO_ARGS_IS_HELP = getattr(click.exceptions, "NoArgsIsHelpError", ())

app = typer.Typer(
    name="prevmap",
    help="Voxel-wise activation prevalence maps from subject-level effects",
    rich_markup_mode="rich",
    no_args_is_help=True,
)


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        console.print(f"prevmap version {__version__}")
        raise typer.Exit()


@app.callback()
def main_callback(
    version: bool | None = typer.Option(
        None,
        "--version",
        "-v",
        help="Show version and exit.",
        callback=version_callback,
        is_eager=True,
    ),
) -> None:
    """
    prevmap - estimate, test and map the prevalence of activation

    Use --help with any command for more information.
    """


app.command("simulate")(simulate_command)
app.command("fit")(fit_command)
app.command("test")(significance_command)
app.command("pipeline")(pipeline_command)
app.command("regions")(regions_command)
app.command("gof")(gof_command)
app.command("are")(are_command)
app.command("power")(power_command)


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code.

    0 on success, 1 on a usage error (the synopsis is printed), 2 when the
    input data or files are bad.
    """
    args = list(sys.argv[1:] if argv is None else argv)
    command = typer.main.get_command(app)
    try:
        rv = command.main(args, prog_name="prevmap", standalone_mode=False)
    except click.UsageError as e:
        e.show(file=sys.stderr)
        if e.ctx is not None and not isinstance(e, _NO_ARGS_IS_HELP):
            click.echo(e.ctx.get_help(), err=True)
        return EXIT_USAGE
    except click.Abort:
        print_error("Aborted")
        return EXIT_USAGE
    except (PrevmapError, OSError) as e:
        print_error(str(e))
        return EXIT_DATA
    return rv if isinstance(rv, int) else EXIT_OK


def main() -> None:
    sys.exit(run())
