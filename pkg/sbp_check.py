#!/usr/bin/env python3
"""
sbp-check - ground states of the radial Schrödinger-Bopp-Podolsky system

Command-line front end for the solver, the a → 0 limit study and the probe
suite. Every run is described by a RunConfig (config file, then CLI flags on
top), executed, and persisted as a self-describing RunRecord in the run store.

Key Design Decisions:
1. JSON is the canonical output; CSV side files are plot-ready convenience exports
   - Column sets are frozen: solutions (r,u,phi), sweeps (a,d12_gap,alap_norm,h1_gap),
     probes (name,lhs,rhs,residual,passed)
2. Results payloads contain no timestamps
   - Identical configs (including the seed) give identical payload bytes
3. Every tolerance is self-certified
   - grid-study re-runs any command at N and 2N and reports Richardson estimates
4. The exit status reflects the outcome
   - 0 only when the run converged or every probe passed
"""

import csv
import json
import logging
import math
import os
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
from dotenv import load_dotenv
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table

from config_manager import (ConfigError, ConfigManager, ParamsConfig, RunConfig,
                            create_default_config_file, serialize_config, with_overrides)
from errors import RunError, SBPError
from limit_study import potential_limit, solution_limit
from radial_space import RadialGrid, gaussian_profile, random_profile
from run_store import RunRecord, config_hash, utc_now, write_record
from run_store import cli as runs_cli
from solver import Solution, solve_ground_state
from verify import ProbeReport, run_probe, run_suite, suite_probes

console = Console()
logger = logging.getLogger(__name__)

SOLUTION_COLUMNS = ["r", "u", "phi"]
SWEEP_COLUMNS = ["a", "d12_gap", "alap_norm", "h1_gap"]
PROBE_COLUMNS = ["name", "lhs", "rhs", "residual", "passed"]
GRID_STUDY_COLUMNS = ["quantity", "coarse", "fine", "difference", "richardson", "within_tolerance"]
GRID_STUDY_TOLERANCE = 1e-3

STATUS_OK = "ok"
STATUS_UNCONVERGED = "unconverged"
STATUS_FAILED = "failed"


def setup_logging(verbose: bool = False):
    """Setup logging configuration based on verbose flag"""
    if verbose:
        logging.basicConfig(
            level=logging.DEBUG,
            format='%(asctime)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
    else:
        logging.basicConfig(
            level=logging.INFO,
            format='%(asctime)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
    return logging.getLogger(__name__)


def display_configuration(cfg: RunConfig, source: Optional[str] = None):
    """Display the configuration as interpreted by the script"""
    console.print("\n[bold blue]sbp-check Configuration[/bold blue]")
    console.print("=" * 50)

    console.print(f"[bold]Command:[/bold] {cfg.command}")
    if cfg.command == "grid-study":
        console.print(f"[bold]Study command:[/bold] {cfg.study_command}")
    console.print(f"[bold]Seed:[/bold] {cfg.seed}")

    console.print(f"\n[bold]Parameters:[/bold]")
    console.print(f"  a={cfg.params.a}  omega={cfg.params.omega}  q={cfg.params.q}  p={cfg.params.p}")
    console.print(f"  Coulomb limit: {cfg.params.coulomb_limit}")

    console.print(f"\n[bold]Grid:[/bold]")
    console.print(f"  N={cfg.grid.n}  r_max={cfg.grid.r_max}  core scale={cfg.grid.core_scale}  "
                  f"derivative order={cfg.grid.derivative_order}")

    console.print(f"\n[bold]Solver:[/bold]")
    console.print(f"  Method: {cfg.solver.method}")
    console.print(f"  Max iterations: {cfg.solver.max_iter}  Gradient tolerance: {cfg.solver.grad_tol}")

    console.print(f"\n[bold]Sweep:[/bold]")
    console.print(f"  Mode: {cfg.sweep.mode}  a values: {cfg.sweep.a_values}")

    console.print(f"\n[bold]Probe:[/bold] {cfg.probe.name} ({cfg.probe.profile} profile)")
    console.print(f"[bold]Max Workers:[/bold] {cfg.parallelism.max_workers}")

    console.print(f"\n[bold]Output Settings:[/bold]")
    console.print(f"  JSON Report: {cfg.output.output_path or 'Not set'}")
    console.print(f"  CSV Report: {cfg.output.csv_path or 'Not set'}")
    console.print(f"  Run store: {cfg.output.run_store or os.environ.get('SBP_RUN_STORE') or 'runs'}")

    if source:
        console.print(f"\n[bold]Configuration Source:[/bold] {source}")
    else:
        console.print(f"\n[bold]Configuration Source:[/bold] Defaults and command line arguments")

    console.print("\n" + "=" * 50)


def build_grid(cfg: RunConfig, n: Optional[int] = None) -> RadialGrid:
    return RadialGrid.create(n=n or cfg.grid.n, r_max=cfg.grid.r_max,
                             core_scale=cfg.grid.core_scale,
                             derivative_order=cfg.grid.derivative_order)


# ---------------------------------------------------------------------------
# Command execution
# ---------------------------------------------------------------------------

Outcome = Tuple[Dict[str, Any], str, List[str], List[List[Any]]]


def _solution_rows(sol: Solution) -> List[List[Any]]:
    return [[float(r), float(u), float(phi)]
            for r, u, phi in zip(sol.u.grid.nodes, sol.u.values, sol.phi.values)]


def execute_solve(cfg: RunConfig, grid: RadialGrid) -> Outcome:
    prm = cfg.params.to_params()
    sol = solve_ground_state(prm, cfg.solver, grid=grid)
    results = {"kind": "solution", **sol.to_dict()}
    status = STATUS_OK if sol.converged else STATUS_UNCONVERGED
    return results, status, SOLUTION_COLUMNS, _solution_rows(sol)


def execute_sweep(cfg: RunConfig, grid: RadialGrid) -> Outcome:
    if cfg.sweep.mode == "fixed_source":
        profile = gaussian_profile(grid, width=cfg.sweep.source_width)
        report = potential_limit(profile.with_values(profile.values ** 2), cfg.sweep.a_values)
    else:
        report = solution_limit(cfg.params.to_params(), cfg.sweep.a_values, cfg.solver, grid=grid)
    results = {"kind": "limit_report", **report.to_dict()}
    status = STATUS_OK if report.converged else STATUS_UNCONVERGED
    rows = [[a, d12, alap, "" if h1 is None else h1] for a, d12, alap, h1 in report.rows()]
    return results, status, SWEEP_COLUMNS, rows


def _probe_outcome(reports: List[ProbeReport]) -> Outcome:
    results = {"kind": "probe_reports", "reports": [r.to_dict() for r in reports]}
    status = STATUS_OK if all(r.passed for r in reports) else STATUS_FAILED
    return results, status, PROBE_COLUMNS, [r.csv_row() for r in reports]


def execute_verify(cfg: RunConfig, grid: RadialGrid, show_progress: bool = True) -> Outcome:
    total = len(suite_probes(grid, cfg.seed, cfg.probe.count))
    if not show_progress:
        return _probe_outcome(run_suite(grid, cfg.seed, cfg.parallelism.max_workers,
                                        cfg.probe.count))

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        console=console
    ) as progress:
        task = progress.add_task("Running probes...", total=total)

        def advance(report: ProbeReport) -> None:
            progress.update(task, advance=1, description=f"Finished {report.name}")

        reports = run_suite(grid, cfg.seed, cfg.parallelism.max_workers, cfg.probe.count,
                            progress_callback=advance)
    return _probe_outcome(reports)


def execute_probe(cfg: RunConfig, grid: RadialGrid) -> Outcome:
    u = None
    if cfg.probe.profile == "random":
        u = random_profile(grid, np.random.default_rng(cfg.seed))
    # Default parameters select the suite setup of the probe
    prm = None if cfg.params == ParamsConfig() else cfg.params.to_params()
    report = run_probe(cfg.probe.name, u=u, prm=prm, grid=grid,
                       seed=cfg.seed, count=cfg.probe.count)
    return _probe_outcome([report])


def _quantities(results: Dict[str, Any]) -> Dict[str, float]:
    """Scalar quantities compared across resolutions."""
    kind = results["kind"]
    if kind == "solution":
        diag = results["diagnostics"]
        return {key: float(diag[key]) for key in
                ("j_value", "h1_norm", "lp_norm", "interaction", "nehari_residual", "pohozaev_residual")}
    if kind == "limit_report":
        values = {}
        for i, a in enumerate(results["a_values"]):
            values[f"d12_gap[a={a:g}]"] = results["d12_gaps"][i]
            values[f"alap_norm[a={a:g}]"] = results["alap_norms"][i]
            if results["h1_gaps"]:
                values[f"h1_gap[a={a:g}]"] = results["h1_gaps"][i]
        return values
    return {f"{r['name']}.lhs": r["lhs"] for r in results["reports"]}


def grid_study_rows(coarse: Dict[str, float], fine: Dict[str, float], order: int) -> List[Dict[str, Any]]:
    """Differences and Richardson estimates fine + (fine - coarse)/(2^order - 1)."""
    rows = []
    factor = 2.0 ** order - 1.0
    for quantity in sorted(coarse):
        c, f = coarse[quantity], fine[quantity]
        difference = f - c
        tolerance = GRID_STUDY_TOLERANCE * max(abs(c), abs(f), 1e-8)
        rows.append({
            "quantity": quantity,
            "coarse": c,
            "fine": f,
            "difference": difference,
            "richardson": f + difference / factor,
            "within_tolerance": bool(abs(difference) <= 0.5 * tolerance),
        })
    return rows


def execute_grid_study(cfg: RunConfig, show_progress: bool = True) -> Outcome:
    study = with_overrides(cfg, {"command": cfg.study_command})
    n_coarse, n_fine = cfg.grid.n, 2 * cfg.grid.n
    outcomes = []
    for n in (n_coarse, n_fine):
        console.print(f"[blue]Running {cfg.study_command} on N={n}[/blue]")
        outcomes.append(_dispatch(study, build_grid(cfg, n), show_progress))
    (coarse, coarse_status, _, _), (fine, fine_status, _, _) = outcomes

    rows = grid_study_rows(_quantities(coarse), _quantities(fine), cfg.grid.derivative_order)
    results = {"kind": "grid_study", "study_command": cfg.study_command,
               "n_coarse": n_coarse, "n_fine": n_fine, "rows": rows}
    ok = coarse_status == fine_status == STATUS_OK and all(r["within_tolerance"] for r in rows)
    csv_rows = [[r[c] for c in GRID_STUDY_COLUMNS] for r in rows]
    return results, STATUS_OK if ok else STATUS_UNCONVERGED, GRID_STUDY_COLUMNS, csv_rows


def _dispatch(cfg: RunConfig, grid: RadialGrid, show_progress: bool) -> Outcome:
    executors: Dict[str, Callable[[], Outcome]] = {
        "solve": lambda: execute_solve(cfg, grid),
        "sweep-a": lambda: execute_sweep(cfg, grid),
        "verify": lambda: execute_verify(cfg, grid, show_progress),
        "probe": lambda: execute_probe(cfg, grid),
    }
    return executors[cfg.command]()


def write_csv(path: str, columns: List[str], rows: List[List[Any]]) -> None:
    with open(path, 'w', newline='') as csvfile:
        writer = csv.writer(csvfile)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def run(cfg: RunConfig, show_progress: bool = True, persist: bool = True) -> RunRecord:
    """Execute a configuration and persist its RunRecord.

    Args:
        cfg: Validated configuration
        show_progress: Show rich progress bars for long fan-outs
        persist: Write the record to the run store

    Returns:
        The RunRecord; its status is ok, unconverged or failed

    Raises:
        RunError: Wrapping any library error, after a failed record was written
    """
    serialized = serialize_config(cfg)
    started = utc_now()

    def record(status: str, results: Dict[str, Any]) -> RunRecord:
        return RunRecord(command=cfg.command, config=json.loads(serialized),
                         config_hash=config_hash(serialized), started_at=started,
                         finished_at=utc_now(), status=status, results=results)

    try:
        if cfg.command == "grid-study":
            results, status, columns, rows = execute_grid_study(cfg, show_progress)
        else:
            results, status, columns, rows = _dispatch(cfg, build_grid(cfg), show_progress)
    except SBPError as e:
        logger.error(f"{cfg.command} failed: {e}")
        failed = record(STATUS_FAILED, {"kind": "failure", "error": f"{type(e).__name__}: {e}"})
        if persist:
            write_record(failed, cfg.output.run_store)
        raise RunError(cfg.command, str(e)) from e

    rec = record(status, results)
    if persist:
        path = write_record(rec, cfg.output.run_store)
        console.print(f"[green]Run record saved to {path}[/green]")
    if cfg.output.output_path:
        with open(cfg.output.output_path, 'w') as f:
            f.write(rec.to_json())
        console.print(f"[green]JSON report saved to {cfg.output.output_path}[/green]")
    if cfg.output.csv_path:
        write_csv(cfg.output.csv_path, columns, rows)
        console.print(f"[green]CSV report saved to {cfg.output.csv_path}[/green]")
    return rec


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6e}"
    return str(value)


def print_report(rec: RunRecord) -> None:
    results = rec.results
    kind = results["kind"]
    if kind == "solution":
        table = Table(title=f"Ground state ({results['method']})")
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="green")
        for key in ("j_value", "nehari_residual", "pohozaev_residual", "pohozaev_alt_residual",
                    "h1_norm", "lp_norm", "rel_grad"):
            table.add_row(key, _fmt(results["diagnostics"][key]))
        table.add_row("iterations", str(results["iterations"]))
        table.add_row("converged", str(results["converged"]))
    elif kind == "limit_report":
        table = Table(title=f"a → 0 sweep ({results['mode']})")
        for column, style in zip(SWEEP_COLUMNS, ("cyan", "green", "yellow", "magenta")):
            table.add_column(column, style=style)
        h1 = results["h1_gaps"] or [None] * len(results["a_values"])
        for a, d12, alap, h in zip(results["a_values"], results["d12_gaps"], results["alap_norms"], h1):
            table.add_row(_fmt(a), _fmt(d12), _fmt(alap), "-" if h is None else _fmt(h))
    elif kind == "probe_reports":
        table = Table(title="Probe reports")
        for column, style in zip(("name", "status", "lhs", "rhs", "residual"),
                                 ("cyan", "green", "yellow", "yellow", "magenta")):
            table.add_column(column, style=style)
        for r in results["reports"]:
            status = r["status"]
            colour = {"passed": "green", "failed": "red"}.get(status, "yellow")
            table.add_row(r["name"], f"[{colour}]{status}[/{colour}]", _fmt(r["lhs"]),
                          _fmt(r["rhs"]), _fmt(r["residual"]))
    else:
        table = Table(title=f"Grid study of {results['study_command']} "
                            f"(N={results['n_coarse']} vs {results['n_fine']})")
        for column in GRID_STUDY_COLUMNS:
            table.add_column(column)
        for r in results["rows"]:
            table.add_row(*[_fmt(r[c]) for c in GRID_STUDY_COLUMNS])
    console.print(table)
    colour = "green" if rec.status == STATUS_OK else "red"
    console.print(f"[bold {colour}]Status: {rec.status}[/bold {colour}]")


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def load_run_config(config_file: Optional[str]) -> Tuple[RunConfig, Optional[str]]:
    """Load the config file if given (or config.yaml if present), else defaults."""
    manager = ConfigManager(config_file)
    try:
        cfg = manager.load_config()
        return cfg, manager.config_file
    except FileNotFoundError:
        if config_file:
            raise
        return RunConfig(), None


def _execute(ctx: click.Context, command: str, overrides: Dict[str, Any]) -> None:
    try:
        cfg, source = load_run_config(ctx.obj.get("config"))
        cfg = with_overrides(cfg, {"command": command, **overrides})
    except FileNotFoundError as e:
        console.print(f"[red]{e}[/red]")
        ctx.exit(2)
    except ConfigError as e:
        console.print(f"[red]Configuration error: {e}[/red]")
        ctx.exit(2)
    _execute_config(ctx, cfg, source)


def _execute_config(ctx: click.Context, cfg: RunConfig, source: Optional[str]) -> None:
    if ctx.obj.get("show_config"):
        display_configuration(cfg, source)
        ctx.exit(0)
    try:
        rec = run(cfg, show_progress=not ctx.obj.get("quiet", False))
    except RunError as e:
        console.print(f"[red]Error: {e}[/red]")
        ctx.exit(1)
    print_report(rec)
    ctx.exit(0 if rec.status == STATUS_OK else 1)


def _parse_a_values(value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def param_options(f):
    """Options shared by every command that takes (a, ω, q, p) and a grid."""
    options = [
        click.option('--a', 'a', type=float, help='Bopp-Podolsky length a > 0'),
        click.option('--omega', type=float, help='Frequency ω > 0'),
        click.option('--q', 'q', type=float, help='Coupling q >= 0'),
        click.option('--p', 'p', type=float, help='Nonlinearity exponent p'),
        click.option('--n', 'n', type=int, help='Number of grid nodes (default: 512)'),
        click.option('--rmax', type=float, help='Truncation radius (default: 30)'),
        click.option('--seed', type=int, help='Random seed (default: 0)'),
        click.option('--output', '-o', help='Output file for the JSON record'),
        click.option('--csv', 'csv_path', help='Output file for the CSV export'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def solver_options(f):
    options = [
        click.option('--method', type=click.Choice(["nehari_descent", "scf"]), help='Solver method'),
        click.option('--max-iter', type=int, help='Iteration budget (default: 2000)'),
        click.option('--tol', type=float, help='Relative gradient tolerance (default: 1e-8)'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _common(a, omega, q, p, n, rmax, seed, output, csv_path) -> Dict[str, Any]:
    return {"a": a, "omega": omega, "q": q, "p": p, "n": n, "rmax": rmax, "seed": seed,
            "output_path": output, "csv_path": csv_path}


@click.group(invoke_without_command=True)
@click.option('--config', '-c', help='Path to configuration file (default: config.yaml)')
@click.option('--create-config', is_flag=True, help='Create a default configuration file and exit')
@click.option('--show-config', is_flag=True, help='Display the configuration as interpreted by the script and exit')
@click.option('--verbose', is_flag=True, help='Enable verbose logging of solver iterations')
@click.option('--quiet', is_flag=True, help='Hide progress bars')
@click.pass_context
def cli(ctx, config, create_config, show_config, verbose, quiet):
    """
    Ground states of the radial Schrödinger-Bopp-Podolsky system

    Solves for radial ground states, studies the a → 0 limit and runs the
    identity and sign probes. Every run is stored as a JSON record in the run
    store ($SBP_RUN_STORE, default runs/).
    """
    load_dotenv()
    logger = setup_logging(verbose)
    if verbose:
        logger.info("Verbose logging enabled - solver iterations will be shown")
    ctx.ensure_object(dict)
    ctx.obj.update({"config": config, "show_config": show_config, "quiet": quiet})

    if create_config:
        try:
            path = create_default_config_file(config)
            console.print(f"[green]Default configuration file created: {path}[/green]")
        except ConfigError as e:
            console.print(f"[red]Error creating configuration file: {str(e)}[/red]")
            ctx.exit(2)
        except OSError as e:
            console.print(f"[red]Error creating configuration file: {str(e)}[/red]")
            ctx.exit(1)
        ctx.exit(0)

    if ctx.invoked_subcommand is None:
        if show_config:
            try:
                cfg, source = load_run_config(config)
            except (FileNotFoundError, ConfigError) as e:
                console.print(f"[red]Error loading configuration: {str(e)}[/red]")
                ctx.exit(2)
            display_configuration(cfg, source)
            ctx.exit(0)
        click.echo(ctx.get_help())


@cli.command()
@param_options
@solver_options
@click.pass_context
def solve(ctx, a, omega, q, p, n, rmax, seed, output, csv_path, method, max_iter, tol):
    """Compute a radial ground state"""
    overrides = _common(a, omega, q, p, n, rmax, seed, output, csv_path)
    overrides.update({"method": method, "max_iter": max_iter, "tol": tol})
    _execute(ctx, "solve", overrides)


@cli.command(name="sweep-a")
@param_options
@solver_options
@click.option('--a-values', help='Comma-separated strictly decreasing a values')
@click.option('--mode', type=click.Choice(["full_solution", "fixed_source"]), help='Sweep mode')
@click.pass_context
def sweep_a(ctx, a, omega, q, p, n, rmax, seed, output, csv_path, method, max_iter, tol, a_values, mode):
    """Sweep a → 0 against the Coulomb limit"""
    overrides = _common(a, omega, q, p, n, rmax, seed, output, csv_path)
    overrides.update({"method": method, "max_iter": max_iter, "tol": tol,
                      "a_values": _parse_a_values(a_values), "mode": mode})
    _execute(ctx, "sweep-a", overrides)


@cli.command()
@click.option('--n', 'n', type=int, help='Number of grid nodes (default: 512)')
@click.option('--rmax', type=float, help='Truncation radius (default: 30)')
@click.option('--seed', type=int, help='Random seed (default: 0)')
@click.option('--max-workers', type=int, help='Maximum number of parallel probes (default: 4)')
@click.option('--output', '-o', help='Output file for the JSON record')
@click.option('--csv', 'csv_path', help='Output file for the CSV export')
@click.pass_context
def verify(ctx, n, rmax, seed, max_workers, output, csv_path):
    """Run the full probe suite"""
    _execute(ctx, "verify", {"n": n, "rmax": rmax, "seed": seed, "max_workers": max_workers,
                             "output_path": output, "csv_path": csv_path})


@cli.command()
@click.argument('name')
@param_options
@click.option('--profile', type=click.Choice(["gaussian", "random"]), help='Test profile')
@click.option('--count', type=int, help='Number of random samples for batch probes')
@click.pass_context
def probe(ctx, name, a, omega, q, p, n, rmax, seed, output, csv_path, profile, count):
    """Run one named probe with explicit parameters"""
    overrides = _common(a, omega, q, p, n, rmax, seed, output, csv_path)
    overrides.update({"probe_name": name, "profile": profile, "count": count})
    _execute(ctx, "probe", overrides)


@cli.command(name="grid-study")
@click.argument('study_command', type=click.Choice(["solve", "sweep-a", "verify", "probe"]))
@param_options
@click.pass_context
def grid_study(ctx, study_command, a, omega, q, p, n, rmax, seed, output, csv_path):
    """Re-run a command at N and 2N and report Richardson estimates"""
    overrides = _common(a, omega, q, p, n, rmax, seed, output, csv_path)
    overrides["study_command"] = study_command
    _execute(ctx, "grid-study", overrides)


@cli.command(name="run")
@click.argument('config_file', type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def run_command(ctx, config_file):
    """Execute a configuration document (JSON, TOML or YAML)"""
    try:
        cfg = ConfigManager(config_file).load_config()
    except ConfigError as e:
        console.print(f"[red]Configuration error: {e}[/red]")
        ctx.exit(2)
    _execute_config(ctx, cfg, config_file)


cli.add_command(runs_cli, name="runs")


if __name__ == '__main__':
    cli()
