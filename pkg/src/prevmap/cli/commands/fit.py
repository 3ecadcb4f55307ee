"""Fit and test commands."""

from pathlib import Path

import numpy as np
import typer

from ...core.config import RunConfig
from ...core.errors import LengthMismatch
from ...core.models import EffectsTable, FdrOutcome, TestResult, VoxelFit
from ...core.storage import (
    read_effects_table,
    read_parameter_map,
    record_to_fit,
    render_pgm_slice,
    write_parameter_map,
)
from ...services.inference import bh_adjust, signed_prevalence_map
from ...services.pipeline import build_records, fit_table, p_values_of, signed_rank_table
from ...utils.constants import PARAMETER_MAP_FILENAME, SLICE_FILENAME
from ..utils import (
    CONFIG_OPTION,
    GRID_STEP_OPTION,
    INPUT_OPTION,
    LOG_LEVEL_OPTION,
    MAX_ITER_OPTION,
    OUTPUT_DIR_OPTION,
    Q_OPTION,
    REL_TOL_OPTION,
    RENDER_SLICE_OPTION,
    TOP_K_OPTION,
    WORKERS_OPTION,
    output_path,
    parse_render_slice,
    print_info,
    print_success,
    print_warning,
    resolve_config,
    voxel_progress,
)


def fit_effects(table: EffectsTable, config: RunConfig) -> list[VoxelFit]:
    """Fit every voxel with a progress bar."""
    with voxel_progress(table.n_voxels, "Fitting voxels") as advance:
        fits = fit_table(table, config.em_options(), config.workers, advance)
    stalled = sum(1 for f in fits if not f.converged)
    if stalled:
        print_warning(f"{stalled} voxel(s) reached the EM iteration cap ({config.max_iter}) before converging")
    return fits


def assess_effects(
    table: EffectsTable, fits: list[VoxelFit], config: RunConfig
) -> tuple[list[TestResult | None], FdrOutcome, np.ndarray]:
    """Signed-rank tests, BH adjustment and the masked signed-prevalence map."""
    tests = signed_rank_table(table, config.workers)
    fdr = bh_adjust(p_values_of(tests), config.q_level)
    return tests, fdr, signed_prevalence_map(fits, fdr)


def symmetric_range(values: np.ndarray) -> tuple[float, float]:
    """``(-m, m)`` with ``m`` the largest finite magnitude, or 1 for a flat map."""
    finite = np.abs(values[np.isfinite(values)])
    bound = float(finite.max()) if finite.size else 0.0
    return (-bound, bound) if bound > 0 else (-1.0, 1.0)


def render_map(
    config: RunConfig,
    table: EffectsTable,
    values: np.ndarray,
    name: str,
    render: tuple[int, int],
    value_range: tuple[float, float] = (-1.0, 1.0),
) -> Path:
    axis, index = render
    filename = SLICE_FILENAME.format(name=name, axis="xyz"[axis], index=index)
    return render_pgm_slice(
        output_path(config, filename),
        table.to_volume(values, fill=0.0),
        axis,
        index,
        value_range,
        mask=table.mask_volume(),
    )


def fit_command(
    ctx: typer.Context,
    input_path: str = INPUT_OPTION,
    output_dir: str = OUTPUT_DIR_OPTION,
    grid_step: float = GRID_STEP_OPTION,
    top_k: int = TOP_K_OPTION,
    max_iter: int = MAX_ITER_OPTION,
    rel_tol: float = REL_TOL_OPTION,
    workers: int | None = WORKERS_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Fit the prevalence mixture at every voxel and write the parameter map."""
    cfg = resolve_config(
        ctx, config,
        output_dir=output_dir, grid_step=grid_step, top_k=top_k, max_iter=max_iter,
        rel_tol=rel_tol, workers=workers, log_level=log_level,
    )
    table = read_effects_table(input_path)
    fits = fit_effects(table, cfg)
    path = write_parameter_map(
        output_path(cfg, PARAMETER_MAP_FILENAME), build_records(table, fits)
    )
    n_thresholded = sum(1 for f in fits if f.thresholded)
    print_success(
        f"Fitted {table.n_voxels} voxels ({n_thresholded} thresholded to zero prevalence) → {path}"
    )


def significance_command(
    ctx: typer.Context,
    input_path: str = INPUT_OPTION,
    params: str | None = typer.Option(
        None, "--params", help="Parameter map to test (default: <output-dir>/parameter_map.csv)"
    ),
    output_dir: str = OUTPUT_DIR_OPTION,
    q_level: float = Q_OPTION,
    workers: int | None = WORKERS_OPTION,
    render_slice: str | None = RENDER_SLICE_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Test every voxel, apply BH-FDR and write the masked signed prevalence."""
    render = parse_render_slice(render_slice)
    cfg = resolve_config(
        ctx, config,
        output_dir=output_dir, q_level=q_level, workers=workers, log_level=log_level,
    )
    table = read_effects_table(input_path)
    map_path = Path(params) if params else output_path(cfg, PARAMETER_MAP_FILENAME)
    records = read_parameter_map(map_path)
    if [r.voxel_index for r in records] != [int(i) for i in table.voxel_index]:
        raise LengthMismatch(f"voxels in {map_path} do not match {input_path}")

    fits = [record_to_fit(r) for r in records]
    tests, fdr, signed = assess_effects(table, fits, cfg)
    path = write_parameter_map(
        output_path(cfg, PARAMETER_MAP_FILENAME),
        build_records(table, fits, tests, fdr, signed),
    )
    if render is not None:
        slice_path = render_map(cfg, table, signed, "signed_prevalence", render)
        print_info(f"Rendered {slice_path}")
    print_success(
        f"{fdr.n_rejected}/{table.n_voxels} voxels significant at q={cfg.q_level} → {path}"
    )
