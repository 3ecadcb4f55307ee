"""Toy simulation command."""

import typer

from ...core.storage import render_pgm_slice, write_effects_table, write_truth
from ...core.toy_models import ActiveModel, ToySpec
from ...services.simulate import make_toy_population, sample_effects
from ...utils.constants import (
    DEFAULT_AXES_JITTER_SD,
    DEFAULT_CENTER_JITTER_SD,
    DEFAULT_TOY_SUBJECTS,
    EFFECTS_FILENAME,
    SLICE_FILENAME,
    TRUTH_FILENAME,
)
from ..utils import (
    CONFIG_OPTION,
    LOG_LEVEL_OPTION,
    OUTPUT_DIR_OPTION,
    RENDER_SLICE_OPTION,
    SEED_OPTION,
    output_path,
    parse_floats,
    parse_render_slice,
    print_info,
    print_success,
    resolve_config,
)

DIMS_OPTION = typer.Option("64,64", "--dims", help="Grid extents, 2 or 3 comma-separated integers")
SUBJECTS_OPTION = typer.Option(DEFAULT_TOY_SUBJECTS, "--subjects", help="Number of simulated subjects")
AXES_OPTION = typer.Option(
    "18,12", "--axes", help="Ellipse semi-axes in voxels, or 'none' for a pure-null population"
)
ACTIVE_MODEL_OPTION = typer.Option(ActiveModel.GAUSSIAN, "--active-model", help="Effect distribution of active subjects")


def build_toy_spec(
    dims: str,
    subjects: int,
    axes: str,
    center_jitter: float,
    axes_jitter: float,
    active_model: ActiveModel,
    params_as_sd: bool,
    seed: int,
) -> ToySpec:
    """ToySpec from command-line text values."""
    grid = parse_floats(dims, "--dims")
    if any(d != int(d) for d in grid):
        raise typer.BadParameter("grid extents must be integers", param_hint="--dims")
    semi_axes = None if axes.strip().lower() == "none" else tuple(parse_floats(axes, "--axes"))
    return ToySpec(
        dims=tuple(int(d) for d in grid),
        n_subjects=subjects,
        axes=semi_axes,
        center_jitter_sd=center_jitter,
        axes_jitter_sd=axes_jitter,
        active_model=active_model,
        params_as_sd=params_as_sd,
        seed=seed,
    )


def simulate_command(
    ctx: typer.Context,
    output_dir: str = OUTPUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    dims: str = DIMS_OPTION,
    subjects: int = SUBJECTS_OPTION,
    axes: str = AXES_OPTION,
    center_jitter: float = typer.Option(DEFAULT_CENTER_JITTER_SD, "--center-jitter", help="SD of ellipse center jitter (voxels)"),
    axes_jitter: float = typer.Option(DEFAULT_AXES_JITTER_SD, "--axes-jitter", help="SD of multiplicative axes jitter"),
    active_model: ActiveModel = ACTIVE_MODEL_OPTION,
    params_as_sd: bool = typer.Option(False, "--params-as-sd", help="Read toy distribution parameters as SDs"),
    render_slice: str | None = RENDER_SLICE_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Simulate a toy population and write its effects table and true prevalence."""
    render = parse_render_slice(render_slice)
    cfg = resolve_config(ctx, config, output_dir=output_dir, seed=seed, log_level=log_level)
    spec = build_toy_spec(
        dims, subjects, axes, center_jitter, axes_jitter, active_model, params_as_sd, cfg.seed
    )

    population = make_toy_population(spec)
    table = sample_effects(population, spec)
    effects_path = write_effects_table(output_path(cfg, EFFECTS_FILENAME), table)
    write_truth(output_path(cfg, TRUTH_FILENAME), table, population.true_prevalence)

    if render is not None:
        axis, index = render
        name = SLICE_FILENAME.format(name="true_prevalence", axis="xyz"[axis], index=index)
        path = render_pgm_slice(output_path(cfg, name), population.true_prevalence, axis, index, (0.0, 1.0))
        print_info(f"Rendered {path}")
    print_success(
        f"Simulated {table.n_voxels} voxels x {table.n_subjects} subjects → {effects_path}"
    )
