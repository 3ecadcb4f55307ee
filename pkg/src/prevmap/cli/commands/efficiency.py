"""Efficiency commands: Pitman ARE and Monte Carlo power."""

import typer
from rich.table import Table

from ...core.storage import write_are_report, write_power_curve
from ...services.efficiency import (
    NuisanceSpec,
    efficacy_signed_rank,
    efficacy_t,
    pitman_are,
    power_curve_mc,
)
from ...utils import constants
from ..utils import (
    CONFIG_OPTION,
    LOG_LEVEL_OPTION,
    OUTPUT_DIR_OPTION,
    SEED_OPTION,
    WORKERS_OPTION,
    console,
    output_path,
    parse_floats,
    print_success,
    resolve_config,
)

NULL_WEIGHTS_OPTION = typer.Option("0.88,0.12", "--null-weights", help="Null component weights q1,q2")
NULL_VARS_OPTION = typer.Option("0.15,1.0", "--null-vars", help="Null component variances v1,v2")
MU_OPTION = typer.Option(constants.TOY_ACTIVE_MU, "--mu", help="Mean of the active component")
ACTIVE_VAR_OPTION = typer.Option(constants.TOY_ACTIVE_VAR, "--active-var", help="Variance of the active component")


def _nuisance(null_weights: str, null_vars: str, mu: float, active_var: float) -> NuisanceSpec:
    q = parse_floats(null_weights, "--null-weights", 2)
    v = parse_floats(null_vars, "--null-vars", 2)
    return NuisanceSpec(
        null_weights=(q[0], q[1]), null_vars=(v[0], v[1]), active_mu=mu, active_var=active_var
    )


def are_command(
    ctx: typer.Context,
    output_dir: str = OUTPUT_DIR_OPTION,
    null_weights: str = NULL_WEIGHTS_OPTION,
    null_vars: str = NULL_VARS_OPTION,
    mu: float = MU_OPTION,
    active_var: float = ACTIVE_VAR_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Pitman efficiency of the signed-rank test relative to the t test."""
    cfg = resolve_config(ctx, config, output_dir=output_dir, log_level=log_level)
    spec = _nuisance(null_weights, null_vars, mu, active_var)
    c_t = efficacy_t(spec)
    c_w = efficacy_signed_rank(spec)
    are = pitman_are(spec)
    path = write_are_report(output_path(cfg, constants.ARE_FILENAME), are, c_t, c_w)
    if are == 0 or are == 1:
        favoured = "neither test"
    else:
        favoured = "the signed-rank test" if are > 1 else "the t test"
    console.print(f"efficacy t {c_t:.4f}, signed-rank {c_w:.4f}")
    console.print(
        f"ARE (c_W / c_T)^2 = {are:.4f}, favouring {favoured} "
        "(below 1 favours the t test, above 1 the signed-rank test)"
    )
    print_success(f"Efficiency report → {path}")


def power_command(
    ctx: typer.Context,
    output_dir: str = OUTPUT_DIR_OPTION,
    null_weights: str = NULL_WEIGHTS_OPTION,
    null_vars: str = NULL_VARS_OPTION,
    mu: float = MU_OPTION,
    active_var: float = ACTIVE_VAR_OPTION,
    n: int = typer.Option(constants.DEFAULT_POWER_N, "--n", help="Subjects per simulated voxel"),
    p_grid: str = typer.Option(
        ",".join(str(p) for p in constants.DEFAULT_P_GRID), "--p-grid", help="Prevalences to simulate"
    ),
    alpha: float = typer.Option(constants.DEFAULT_ALPHA, "--alpha", help="Test level"),
    reps: int = typer.Option(constants.DEFAULT_REPS, "--reps", help="Monte Carlo replications"),
    seed: int = SEED_OPTION,
    workers: int | None = WORKERS_OPTION,
    config: str | None = CONFIG_OPTION,
    log_level: str = LOG_LEVEL_OPTION,
) -> None:
    """Monte Carlo power of the t and signed-rank tests along a prevalence grid."""
    cfg = resolve_config(
        ctx, config,
        output_dir=output_dir, alpha=alpha, reps=reps, seed=seed, workers=workers,
        log_level=log_level,
    )
    spec = _nuisance(null_weights, null_vars, mu, active_var)
    points = power_curve_mc(
        spec, n, parse_floats(p_grid, "--p-grid"), cfg.alpha, cfg.reps, cfg.seed, cfg.workers
    )
    path = write_power_curve(output_path(cfg, constants.POWER_FILENAME), points)

    view = Table(title=f"Power at alpha={cfg.alpha}, n={n}, {cfg.reps} replications")
    view.add_column("p", justify="right", style="cyan")
    view.add_column("t test", justify="right")
    view.add_column("signed rank", justify="right")
    for pt in points:
        view.add_row(
            f"{pt.p:g}",
            f"{pt.power_t:.3f} ± {pt.se_t:.3f}",
            f"{pt.power_wilcoxon:.3f} ± {pt.se_wilcoxon:.3f}",
        )
    console.print(view)
    print_success(f"Power curve → {path}")
