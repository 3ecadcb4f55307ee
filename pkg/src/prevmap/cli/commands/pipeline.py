"""End-to-end pipeline command."""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import typer

from ...core.config import RunConfig
from ...core.models import EffectsTable, VoxelFit
from ...core.storage import (
    read_effects_table,
    write_effect_maps,
    write_effects_table,
    write_json,
    write_parameter_map,
    write_truth,
)
from ...core.toy_models import ActiveModel
from ...services.pipeline import build_records, effect_maps
from ...services.simulate import run_toy_pipeline
from ...utils.constants import (
    DEFAULT_AXES_JITTER_SD,
    DEFAULT_CENTER_JITTER_SD,
    DEFAULT_FWHM,
    DEFAULT_Q_LEVEL,
    DEFAULT_TOY_Q_LEVEL,
    EFFECTS_FILENAME,
    MAPS_FILENAME,
    PARAMETER_MAP_FILENAME,
    TOY_REPORT_FILENAME,
    TRUTH_FILENAME,
)
from ..utils import (
    CONFIG_OPTION,
    GRID_STEP_OPTION,
    LOG_LEVEL_OPTION,
    MAX_ITER_OPTION,
    OUTPUT_DIR_OPTION,
    Q_OPTION,
    REL_TOL_OPTION,
    RENDER_SLICE_OPTION,
    SEED_OPTION,
    TOP_K_OPTION,
    WORKERS_OPTION,
    output_path,
    parse_render_slice,
    print_info,
    print_success,
    resolve_config,
    voxel_progress,
    was_given,
)
from .fit import assess_effects, fit_effects, render_map, symmetric_range
from .simulate import ACTIVE_MODEL_OPTION, AXES_OPTION, DIMS_OPTION, SUBJECTS_OPTION, build_toy_spec


def write_maps(
    cfg: RunConfig,
    table: EffectsTable,
    fits: Sequence[VoxelFit],
    signed: np.ndarray,
    render: tuple[int, int] | None,
) -> list[Path]:
    """Write the comparison maps and render one slice of each."""
    maps = effect_maps(table, fits, signed, cfg.fwhm, cfg.workers)
    written = [write_effect_maps(output_path(cfg, MAPS_FILENAME), table, maps)]
    render = render or (2, table.dims[2] // 2)
    written.append(render_map(cfg, table, signed, "signed_prevalence", render))
    for name in ("mu", "t", "t_smoothed"):
        written.append(render_map(cfg, table, maps[name], name, render, symmetric_range(maps[name])))
    return written


def pipeline_command(
    ctx: typer.Context,
    input_path: str | None = typer.Option(
        None, "--input", "-i", help="PREVMAP-EFFECTS v1 file (default: run the toy simulation)"
    ),
    output_dir: str = OUTPUT_DIR_OPTION,
    q_level: float = Q_OPTION,
    grid_step: float = GRID_STEP_OPTION,
    top_k: int = TOP_K_OPTION,
    max_iter: int = MAX_ITER_OPTION,
    rel_tol: float = REL_TOL_OPTION,
    seed: int = SEED_OPTION,
    workers: int | None = WORKERS_OPTION,
    render_slice: str | None = RENDER_SLICE_OPTION,
    fwhm: float = typer.Option(
        DEFAULT_FWHM, "--fwhm", help="Smoothing kernel FWHM in voxels for the smoothed t map"
    ),
    dims: str = DIMS_OPTION,
    subjects: int = SUBJECTS_OPTION,
    axes: str = AXES_OPTION,
    active_model: ActiveModel = ACTIVE_MODEL_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Fit, test and render; without --input, run and score the toy simulation.

    The toy run uses q = 0.05 unless a level is given explicitly. Besides the
    parameter map, every run writes the prevalence, effect, t and smoothed t
    maps and renders one slice of each.
    """
    render = parse_render_slice(render_slice)
    cfg = resolve_config(
        ctx, config,
        output_dir=output_dir, q_level=q_level, grid_step=grid_step, top_k=top_k,
        max_iter=max_iter, rel_tol=rel_tol, seed=seed, workers=workers, fwhm=fwhm,
        log_level=log_level,
    )

    if input_path is not None:
        table = read_effects_table(input_path)
        fits = fit_effects(table, cfg)
        tests, fdr, signed = assess_effects(table, fits, cfg)
        path = write_parameter_map(
            output_path(cfg, PARAMETER_MAP_FILENAME),
            build_records(table, fits, tests, fdr, signed),
        )
        maps_path, *slices = write_maps(cfg, table, fits, signed, render)
        print_info(f"Maps written to {maps_path}, rendered {len(slices)} slices")
        print_success(
            f"{fdr.n_rejected}/{table.n_voxels} voxels significant at q={cfg.q_level} → {path}"
        )
        return

    toy_q = cfg.q_level
    if not was_given(ctx, "q_level") and cfg.q_level == DEFAULT_Q_LEVEL:
        toy_q = DEFAULT_TOY_Q_LEVEL
    spec = build_toy_spec(
        dims, subjects, axes, DEFAULT_CENTER_JITTER_SD, DEFAULT_AXES_JITTER_SD,
        active_model, False, cfg.seed,
    )
    n_voxels = spec.grid_dims[0] * spec.grid_dims[1] * spec.grid_dims[2]
    with voxel_progress(n_voxels, "Fitting toy voxels") as advance:
        report = run_toy_pipeline(spec, cfg.em_options(), toy_q, cfg.workers, advance)

    table = report.effects
    write_effects_table(output_path(cfg, EFFECTS_FILENAME), table)
    write_truth(output_path(cfg, TRUTH_FILENAME), table, report.true_prevalence)
    signed = report.signed_prevalence.ravel(order="F")[table.voxel_index]
    write_parameter_map(
        output_path(cfg, PARAMETER_MAP_FILENAME),
        build_records(table, report.fits, report.tests, report.fdr, signed),
    )
    report_path = write_json(output_path(cfg, TOY_REPORT_FILENAME), report.summary())
    maps_path, *slices = write_maps(cfg, table, report.fits, signed, render)
    print_info(f"Maps written to {maps_path}, rendered {len(slices)} slices")
    print_success(
        f"Toy run: correlation {report.correlation:.3f}, MAE {report.mean_abs_error:.3f}, "
        f"{report.n_rejected} rejected (FDP {report.false_discovery_proportion:.3f}) → {report_path}"
    )
