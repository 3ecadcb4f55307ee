"""Goodness-of-fit comparison command."""

import typer
from rich.table import Table

from ...core.storage import read_effects_table, write_gof_summary, write_gof_table
from ...services.gof import CandidateFamily, gof_compare
from ...utils.constants import GOF_SUMMARY_FILENAME, GOF_TABLE_FILENAME
from ..utils import (
    CONFIG_OPTION,
    GRID_STEP_OPTION,
    INPUT_OPTION,
    LOG_LEVEL_OPTION,
    MAX_ITER_OPTION,
    OUTPUT_DIR_OPTION,
    REL_TOL_OPTION,
    SEED_OPTION,
    TOP_K_OPTION,
    WORKERS_OPTION,
    console,
    output_path,
    print_success,
    resolve_config,
)


def _parse_families(text: str | None) -> list[str] | None:
    if text is None:
        return None
    names = [name.strip() for name in text.split(",") if name.strip()]
    known = {f.value for f in CandidateFamily}
    unknown = [n for n in names if n not in known]
    if unknown or not names:
        raise typer.BadParameter(
            f"unknown families {unknown}; choose from {', '.join(sorted(known))}",
            param_hint="--families",
        )
    return names


def gof_command(
    ctx: typer.Context,
    input_path: str = INPUT_OPTION,
    output_dir: str = OUTPUT_DIR_OPTION,
    families: str | None = typer.Option(
        None, "--families", help="Comma-separated candidate families (default: all)"
    ),
    grid_step: float = GRID_STEP_OPTION,
    top_k: int = TOP_K_OPTION,
    max_iter: int = MAX_ITER_OPTION,
    rel_tol: float = REL_TOL_OPTION,
    seed: int = SEED_OPTION,
    workers: int | None = WORKERS_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Score candidate distributions per voxel by held-out KS distance."""
    cfg = resolve_config(
        ctx, config,
        output_dir=output_dir, families=_parse_families(families), grid_step=grid_step,
        top_k=top_k, max_iter=max_iter, rel_tol=rel_tol, seed=seed, workers=workers,
        log_level=log_level,
    )
    table = read_effects_table(input_path)
    result = gof_compare(
        table, cfg.families or None, cfg.seed, cfg.em_options(), cfg.workers
    )
    write_gof_table(output_path(cfg, GOF_TABLE_FILENAME), result)
    summaries = result.summaries()
    path = write_gof_summary(output_path(cfg, GOF_SUMMARY_FILENAME), summaries)

    view = Table(title="Held-out KS distance (sorted by median)")
    view.add_column("Family", style="cyan")
    view.add_column("Median", justify="right")
    view.add_column("IQR", justify="right")
    view.add_column("Missing", justify="right")
    for s in summaries:
        view.add_row(s.family.value, f"{s.median:.4f}", f"{s.q1:.4f}-{s.q3:.4f}", str(s.n_missing))
    console.print(view)
    print_success(f"KS comparison of {table.n_voxels} voxels → {path}")
