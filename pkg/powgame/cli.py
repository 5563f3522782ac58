#!/usr/bin/env python
"""
CLI interface for powgame.

Every analysis is a subcommand driven by a scenario file. CSV goes to
--out (or stdout); human-readable summaries and logs go to stderr.

Exit codes: 0 ok, 2 configuration, 3 numeric, 4 infeasible controller.
"""

import sys
from contextlib import contextmanager
from typing import Dict, Iterator, List, NoReturn, Optional, Sequence, Tuple

import typer
from rich import box
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from powgame import __version__
from powgame.agents import aggregate_to_table, empirical_to_table, mean_field_gap
from powgame.controller import (
    ControllerSpec,
    OPEN_ENDPOINT_SHRINK,
    check_unstabilizable,
    eps_interval,
    gain_lower_bound,
    is_marginal_anchor,
    synthesize,
    trade_off_metrics,
    validate,
    zeta_roots,
)
from powgame.dynamics import (
    ConstantReward,
    FeedbackReward,
    RewardPolicy,
    hysteresis_sweep,
    integrate,
    sweep_to_table,
    trajectory_to_table,
)
from powgame.equilibrium import (
    EquilibriumPoint,
    Interval,
    bifurcation_branches,
    branch_rows_to_table,
    classify_equilibria,
    region_cells_to_table,
    region_map,
)
from powgame.exceptions import (
    ConfigError,
    InfeasibleControllerError,
    IntegrationError,
    ParameterError,
)
from powgame.game_core import ModelParams
from powgame.utils.config_loader import (
    dump_controller_spec,
    load_controller_spec,
    load_global_config,
    load_scenario,
)
from powgame.utils.file_utils import atomic_write_text, event_lines, provenance_lines, render_csv
from powgame.utils.logger import get_logger, setup_logging
from powgame.utils.validation import ControllerSection, RegionMapSection, ScenarioConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4

RUN_DEFAULT_KEYS = ("dt", "tol", "t_max", "max_steps")

app = typer.Typer(
    name="powgame",
    help="Evolutionary-game analysis of proof-of-work mining participation",
    add_completion=False,
)
controller_app = typer.Typer(help="Design and check reward-feedback controllers", add_completion=False)
app.add_typer(controller_app, name="controller")

console = Console(stderr=True)
logger = get_logger(__name__)


def _config_option() -> str:
    return typer.Option(..., "--config", "-c", help="Scenario YAML file or bundled scenario name")


def _out_option() -> Optional[str]:
    return typer.Option(None, "--out", "-o", help="Output file (stdout when omitted)")


def _set_option() -> Optional[List[str]]:
    return typer.Option(None, "--set", help="Override a scenario value: section.key=value")


def _verbose_option() -> bool:
    return typer.Option(False, "--verbose", "-v", help="Verbose output")


def _fail(message: str, code: int) -> NoReturn:
    console.print(f"[red]{escape(message)}[/red]")
    raise typer.Exit(code)


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map library errors onto the CLI exit-code scheme."""
    try:
        yield
    except ConfigError as e:
        _fail(f"Configuration error:\n{e}", EXIT_CONFIG)
    except InfeasibleControllerError as e:
        _fail(f"Infeasible controller: {e}", EXIT_INFEASIBLE)
    except (ParameterError, IntegrationError, OverflowError, FloatingPointError) as e:
        _fail(f"Numerical error: {e}", EXIT_NUMERIC)


def get_scenario(config: str, overrides: Optional[Sequence[str]], verbose: bool) -> ScenarioConfig:
    """Load global settings, configure logging and load the scenario.

    Run settings missing from the scenario come from the global numerics.
    """
    settings = load_global_config()
    setup_logging(level="DEBUG" if verbose else settings["logging"]["level"])
    defaults = {k: settings["numerics"][k] for k in RUN_DEFAULT_KEYS}
    scenario = load_scenario(config, overrides or (), defaults=defaults)
    logger.debug(f"[CLI] scenario {config} loaded (sha256 {scenario.digest()[:12]})")
    return scenario


def controller_spec_from(params: ModelParams, section: ControllerSection) -> ControllerSpec:
    """Spec from a controller block; missing K/eps are synthesized."""
    if section.K is None:
        if section.eps is not None:
            raise ConfigError("reward.controller.eps: requires reward.controller.K")
        return synthesize(params, section.R_star, section.x_bar, section.gain_margin, section.eps_fraction)
    eps = section.eps
    if eps is None:
        interval = eps_interval(params, section.R_star, section.x_bar, section.K)
        upper = interval.hi if interval.hi_closed else interval.hi - OPEN_ENDPOINT_SHRINK
        eps = section.eps_fraction * upper
    return ControllerSpec(params=params, R_star=section.R_star, x_bar=section.x_bar, K=section.K, eps=eps)


def build_policy(scenario: ScenarioConfig) -> Tuple[RewardPolicy, Optional[ControllerSpec]]:
    params = scenario.params()
    if scenario.reward.controller is None:
        return ConstantReward(scenario.reward.R), None
    spec = controller_spec_from(params, scenario.reward.controller)
    report = validate(spec)
    for line in report.lines():
        logger.warning(f"[CLI] controller violates {line}")
    return FeedbackReward(spec), spec


def nominal_reward(scenario: ScenarioConfig) -> float:
    if scenario.reward.controller is not None:
        return scenario.reward.controller.R_star
    return scenario.reward.R


def emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write_text(out, text)
        console.print(f"[green]Wrote {escape(out)}[/green]")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _csv(
    command: str,
    scenario: ScenarioConfig,
    columns: Sequence[str],
    rows: Sequence[Sequence[object]],
    footer: Sequence[str] = (),
    extra_header: Sequence[str] = (),
) -> str:
    header = provenance_lines(command, scenario.digest()) + list(extra_header)
    return render_csv(columns, rows, header_lines=header, footer_lines=footer)


def _basin(interval: Optional[Interval]) -> str:
    return "-" if interval is None else str(interval)


@app.command()
def equilibria(
    config: str = _config_option(),
    out: Optional[str] = _out_option(),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Equilibria, stability labels, region and basins at the scenario's reward."""
    with _exit_codes():
        scenario = get_scenario(config, overrides, verbose)
        params = scenario.params()
        report = classify_equilibria(params, nominal_reward(scenario))

        table = Table(title=f"Equilibria at R={report.R:g} (region {report.region.value})", box=box.ROUNDED)
        table.add_column("Equilibrium", style="cyan")
        table.add_column("x1", justify="right")
        table.add_column("Stability")
        table.add_column("In [0, 1]")
        table.add_column("Basin")
        points: List[Tuple[str, EquilibriumPoint, Optional[Interval]]] = [
            ("zero", report.eq_zero, report.basin_zero),
            ("one", report.eq_one, report.basin_one),
            ("interior", report.eq_interior, None),
        ]
        for name, point, basin in points:
            table.add_row(
                name,
                f"{point.value:.6g}",
                point.stability.value,
                "yes" if point.in_unit_interval else "no",
                escape(_basin(basin)),
            )
        console.print(table)

        rows = [
            [name, point.value, point.stability.value, str(point.in_unit_interval).lower(), _basin(basin)]
            for name, point, basin in points
        ]
        text = _csv(
            "equilibria",
            scenario,
            ["equilibrium", "x1_eq", "stability", "in_unit_interval", "basin"],
            rows,
            extra_header=[f"region: {report.region.value}", f"R: {report.R!r}"],
        )
        emit(text, out)


@app.command()
def simulate(
    config: str = _config_option(),
    out: Optional[str] = _out_option(),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Integrate the replicator ODE and write the (t, x1, R) trajectory."""
    with _exit_codes():
        scenario = get_scenario(config, overrides, verbose)
        params = scenario.params()
        policy, spec = build_policy(scenario)
        run = scenario.run

        trajectory = integrate(params, policy, run.x1_init, run.t_end, dt=run.dt, max_steps=run.max_steps)
        console.print(
            f"[cyan]{escape(repr(policy))}[/cyan]: x1 {run.x1_init:g} -> {trajectory.final_state:.6g} "
            f"at t={run.t_end:g} ({len(trajectory.times)} samples)"
        )
        if spec is not None:
            metrics = trade_off_metrics(trajectory, spec)
            console.print(
                f"state settle time: {metrics.state_settle_time}, "
                f"reward recovery time: {metrics.reward_recovery_time}"
            )

        events = [(e.time, e.kind.value) for e in trajectory.events]
        text = _csv(
            "simulate",
            scenario,
            ["t", "x1", "R"],
            trajectory_to_table(trajectory),
            footer=event_lines(events),
        )
        emit(text, out)


@app.command()
def bifurcate(
    config: str = _config_option(),
    out: Optional[str] = _out_option(),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Equilibrium branches over a reward range (needs a 'bifurcation' section)."""
    with _exit_codes():
        scenario = get_scenario(config, overrides, verbose)
        section = scenario.bifurcation
        if section is None:
            raise ConfigError("bifurcation: section required by the bifurcate command")
        rows = bifurcation_branches(scenario.params(), (section.R_from, section.R_to), section.samples)
        console.print(f"[cyan]{len(rows)} branch rows over R in [{section.R_from:g}, {section.R_to:g}][/cyan]")
        text = _csv("bifurcate", scenario, ["R", "x1_eq", "stability", "branch_id"], branch_rows_to_table(rows))
        emit(text, out)


@app.command("region-map")
def region_map_command(
    config: str = _config_option(),
    out: Optional[str] = _out_option(),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Tag the (m, R/d) plane with regions A, B and C."""
    with _exit_codes():
        scenario = get_scenario(config, overrides, verbose)
        section = scenario.region_map or RegionMapSection()
        cells = region_map(
            scenario.model.n,
            (section.m_from, section.m_to),
            (section.rd_from, section.rd_to),
            section.resolution,
        )
        counts: Dict[str, int] = {}
        for cell in cells:
            counts[cell.region.value] = counts.get(cell.region.value, 0) + 1
        console.print(f"[cyan]{len(cells)} cells[/cyan]: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
        text = _csv("region-map", scenario, ["m", "R_over_d", "region"], region_cells_to_table(cells))
        emit(text, out)


@app.command()
def sweep(
    config: str = _config_option(),
    out: Optional[str] = _out_option(),
    direction: Optional[str] = typer.Option(None, "--direction", "-d", help="up or down (overrides the scenario)"),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Quasi-static reward sweep; up and down runs expose hysteresis."""
    with _exit_codes():
        extra = list(overrides or [])
        if direction is not None:
            if direction not in ("up", "down"):
                raise ConfigError(f"--direction must be up or down, got: {direction}")
            extra.append(f"sweep.direction={direction}")
        scenario = get_scenario(config, extra, verbose)
        section = scenario.sweep
        if section is None:
            raise ConfigError("sweep: section required by the sweep command")
        run = scenario.run

        points = hysteresis_sweep(
            scenario.params(), section.path(), section.seed(), settle_tol=run.tol, t_max=run.t_max, dt=run.dt
        )
        console.print(
            f"[cyan]{section.direction}-sweep[/cyan]: {len(points)} legs, "
            f"final x1={points[-1].x1_settled:.6g} at R={points[-1].R:g}"
        )
        text = _csv(
            "sweep",
            scenario,
            ["leg", "R", "x1_settled", "settle_time"],
            sweep_to_table(points),
            extra_header=[f"direction: {section.direction}"],
        )
        emit(text, out)


@controller_app.command("synth")
def controller_synth(
    config: str = _config_option(),
    out: Optional[str] = _out_option(),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Synthesize gain and switch offset from the scenario's controller block."""
    with _exit_codes():
        scenario = get_scenario(config, overrides, verbose)
        section = scenario.reward.controller
        if section is None:
            raise ConfigError("reward.controller: section required by controller synth")
        params = scenario.params()

        infeasible = check_unstabilizable(params, section.R_star)
        if infeasible is not None:
            _fail(
                f"R*={section.R_star} < d/(m+n)={params.lower_threshold:g}: x1=1 cannot be stabilized "
                f"(boundary slope {infeasible.boundary_derivative:.6g} > 0)",
                EXIT_INFEASIBLE,
            )
        if is_marginal_anchor(params, section.R_star):
            console.print(f"[yellow]R*={section.R_star} equals d/(m+n): x1=1 is non-hyperbolic[/yellow]")

        K_min = gain_lower_bound(params, section.R_star, section.x_bar)
        spec = synthesize(params, section.R_star, section.x_bar, section.gain_margin, section.eps_fraction)
        interval = eps_interval(params, spec.R_star, spec.x_bar, spec.K)
        alpha, beta = zeta_roots(spec)

        table = Table(title="Controller synthesis", box=box.ROUNDED)
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", justify="right")
        table.add_row("x1*", f"{spec.x1_star:.12g}")
        table.add_row("K_min", f"{K_min:.12g}")
        table.add_row("K", f"{spec.K:.12g}")
        table.add_row("eps interval", escape(str(interval)))
        table.add_row("eps", f"{spec.eps:.12g}")
        table.add_row("alpha, beta", f"{alpha:.6g}, {beta:.6g}")
        table.add_row("continuous switch", "yes" if spec.is_continuous else "no")
        console.print(table)

        header = "".join(f"# {line}\n" for line in provenance_lines("controller synth", scenario.digest()))
        emit(header + dump_controller_spec(spec), out)


@controller_app.command("validate")
def controller_validate(
    config: Optional[str] = typer.Option(None, "--config", "-c", help="Scenario with a controller block"),
    spec_path: Optional[str] = typer.Option(None, "--spec", help="Controller spec YAML"),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Check a controller against every design condition; exit 4 when invalid."""
    with _exit_codes():
        if (config is None) == (spec_path is None):
            raise ConfigError("controller validate needs exactly one of --config or --spec")
        if spec_path is not None:
            setup_logging(level="DEBUG" if verbose else "INFO")
            spec = load_controller_spec(spec_path)
        else:
            scenario = get_scenario(config, overrides, verbose)
            section = scenario.reward.controller
            if section is None or section.K is None or section.eps is None:
                raise ConfigError("reward.controller: K and eps are required by controller validate")
            spec = controller_spec_from(scenario.params(), section)

        report = validate(spec)
        if report.valid:
            console.print(f"[green]valid[/green]: K={spec.K:g}, eps={spec.eps:g}")
            return
        for line in report.lines():
            console.print(f"[red]{escape(line)}[/red]")
    raise typer.Exit(EXIT_INFEASIBLE)


@app.command()
def agents(
    config: str = _config_option(),
    out: Optional[str] = _out_option(),
    aggregate_out: Optional[str] = typer.Option(None, "--aggregate-out", help="Per-sample mean/std CSV"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Base RNG seed (overrides agents.base_seed)"),
    overrides: Optional[List[str]] = _set_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Finite-population imitation runs compared against the replicator ODE."""
    with _exit_codes():
        extra = list(overrides or [])
        if seed is not None:
            extra.append(f"agents.base_seed={seed}")
        scenario = get_scenario(config, extra, verbose)
        section = scenario.agents
        if section is None:
            raise ConfigError("agents: section required by the agents command")
        params = scenario.params()
        policy, _ = build_policy(scenario)
        run = scenario.run
        seeds = list(range(section.base_seed, section.base_seed + section.seeds))

        gaps = mean_field_gap(
            params, policy, section.n_strategic, seeds, run.x1_init, section.horizon, section.sample_dt,
            ode_dt=run.dt, revision_rate=section.revision_rate, max_steps=run.max_steps,
        )

        table = Table(title="Mean-field gap", box=box.ROUNDED)
        table.add_column("n_strategic", justify="right", style="cyan")
        table.add_column("seeds", justify="right")
        table.add_column("sup |mean - ODE|", justify="right")

        empirical_rows: List[List[object]] = []
        aggregate_rows: List[List[object]] = []
        for n_strategic, gap in gaps.items():
            table.add_row(str(n_strategic), str(gap.n_seeds), f"{gap.sup_norm:.4g}")
            empirical_rows.extend(empirical_to_table(gap.runs))
            aggregate_rows.extend(aggregate_to_table(n_strategic, gap.aggregate))
        console.print(table)

        seed_line = [f"seeds: {seeds[0]}..{seeds[-1]}"]
        emit(
            _csv("agents", scenario, ["n_strategic", "t", "seed", "x1_empirical"], empirical_rows,
                 extra_header=seed_line),
            out,
        )
        if aggregate_out:
            emit(
                _csv("agents", scenario, ["n_strategic", "t", "mean_x1", "std_x1", "n_seeds"], aggregate_rows,
                     extra_header=seed_line),
                aggregate_out,
            )


@app.command()
def version() -> None:
    """Show the powgame version."""
    console.print(f"powgame {__version__}")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
