"""Region complexity and split-half stability command."""

import typer
from rich.table import Table

from ...core.storage import read_effects_table, write_agreement, write_region_table
from ...services.regions import (
    MapStatistic,
    label_components,
    region_summary,
    split_half_agreement,
    statistic_map,
    threshold_map,
)
from ...utils.constants import (
    AGREEMENT_FILENAME,
    DEFAULT_ACTIVE_FRACTION,
    DEFAULT_SPLITS,
    REGIONS_FILENAME,
)
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


def regions_command(
    ctx: typer.Context,
    input_path: str = INPUT_OPTION,
    output_dir: str = OUTPUT_DIR_OPTION,
    statistic: str = typer.Option("both", "--statistic", help="Map to threshold: t, prevalence or both"),
    active_fraction: float = typer.Option(
        DEFAULT_ACTIVE_FRACTION, "--active-fraction", help="Fraction of in-mask voxels marked active"
    ),
    splits: int = typer.Option(DEFAULT_SPLITS, "--splits", help="Random 50/50 subject splits for stability"),
    grid_step: float = GRID_STEP_OPTION,
    top_k: int = TOP_K_OPTION,
    max_iter: int = MAX_ITER_OPTION,
    rel_tol: float = REL_TOL_OPTION,
    seed: int = SEED_OPTION,
    workers: int | None = WORKERS_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Extract active regions, score their complexity and split-half agreement."""
    if statistic == "both":
        chosen = [MapStatistic.T, MapStatistic.PREVALENCE]
    else:
        try:
            chosen = [MapStatistic(statistic)]
        except ValueError as e:
            raise typer.BadParameter(
                f"expected t, prevalence or both, got '{statistic}'", param_hint="--statistic"
            ) from e
    cfg = resolve_config(
        ctx, config,
        output_dir=output_dir, active_fraction=active_fraction, splits=splits,
        grid_step=grid_step, top_k=top_k, max_iter=max_iter, rel_tol=rel_tol,
        seed=seed, workers=workers, log_level=log_level,
    )
    table = read_effects_table(input_path)
    em_opts = cfg.em_options()

    summary = Table(title="Active regions")
    summary.add_column("Statistic", style="cyan")
    summary.add_column("Regions", justify="right")
    summary.add_column("Singletons", justify="right")
    summary.add_column("Median complexity", justify="right")
    summary.add_column("Mean agreement", justify="right")

    agreement_rows = []
    for stat in chosen:
        values = statistic_map(table, stat, em_opts, cfg.workers)
        mask = threshold_map(table.to_volume(values), cfg.active_fraction, table.mask_volume())
        write_region_table(
            output_path(cfg, REGIONS_FILENAME.format(statistic=stat.value)),
            label_components(mask),
        )
        stats = region_summary(mask)

        dice = split_half_agreement(
            table, stat, cfg.active_fraction, cfg.splits, cfg.seed, em_opts, cfg.workers
        )
        agreement_rows.extend((split, stat.value, float(d)) for split, d in enumerate(dice))

        median = "-" if stats.median_complexity is None else f"{stats.median_complexity:.3f}"
        summary.add_row(
            stat.value, str(stats.n_regions), str(stats.n_singletons), median, f"{dice.mean():.3f}"
        )

    path = write_agreement(output_path(cfg, AGREEMENT_FILENAME), agreement_rows)
    console.print(summary)
    print_success(f"Region tables and split agreement written → {path.parent}")
