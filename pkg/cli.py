#!/usr/bin/env python3
"""CLI for the coupled low-rank toolkit."""

import click
import logging
import sys
import json
import time
from functools import wraps
from pathlib import Path
from rich.console import Console
from rich.table import Table
from rich.progress import Progress, SpinnerColumn, TextColumn
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from src.config import settings
from src.errors import CoupledLowRankError, DegenerateIterateError
from src.models import FAMILY_PARAMS, InstanceSpec, RecognitionReport, RunConfig, SketchPlan
from src.io_formats import load_array, save_array
from src.testgen import generate
from src.facerec import evaluate, load_gallery, load_queries, synthetic_gallery
from src.harness import (
    CMTF_COMPARE_COLUMNS,
    PROJECTION_COMPARE_COLUMNS,
    SWEEP_COLUMNS,
    TABLE_COLUMNS,
    cmf_table,
    cmtf_table,
    compare_cmtf,
    compare_projections,
    projection_sweep,
    recognition_table,
    tensor_projection_sweep,
    write_rows,
)

console = Console()

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stdout),
    ]
)

if settings.log_file:
    file_handler = logging.FileHandler(settings.log_file)
    logging.getLogger().addHandler(file_handler)

logger = logging.getLogger(__name__)

PLAN_CHOICES = ['basic', 'simple', 'rsi', 'rbki']


def _fail(error: Exception):
    """Emit a structured error record on stderr and exit 1."""
    record: Dict[str, Any] = {"type": type(error).__name__, "message": str(error)}
    if isinstance(error, DegenerateIterateError):
        record.update(iteration=error.iteration, factor=error.factor)
    if isinstance(error, ValidationError):
        record["details"] = [
            {"loc": list(e["loc"]), "msg": e["msg"]} for e in error.errors()
        ]
    logger.error(f"{record['type']}: {record['message']}")
    click.echo(json.dumps({"error": record}), err=True)
    sys.exit(1)


def run_command(func):
    """Map library and validation errors to the structured error record."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (CoupledLowRankError, ValidationError, OSError, np.linalg.LinAlgError) as e:
            _fail(e)
    return wrapper


def output_options(func):
    """--seed/--out/--format, accepted on the group and on every subcommand."""
    func = click.option('--format', 'output_format', type=click.Choice(['csv', 'json']),
                        default=None, help='Output format (csv or json)')(func)
    func = click.option('--out', type=click.Path(), default=None, help='Output path')(func)
    func = click.option('--seed', type=int, default=None, help='Random seed')(func)
    return func


def _resolve(ctx: click.Context, seed: Optional[int], out: Optional[str],
             output_format: Optional[str]) -> Dict[str, Any]:
    group = ctx.obj or {}
    return {
        "seed": seed if seed is not None else group.get("seed", settings.default_seed),
        "out": out if out is not None else group.get("out"),
        "format": output_format or group.get("format") or "csv",
    }


def _output_path(opts: Dict[str, Any], stem: str) -> Path:
    if opts["out"]:
        return Path(opts["out"])
    return Path(settings.output_dir) / f"{stem}.{opts['format']}"


def _plan(name: str, q: int, ell: Optional[int], seed: int,
          trunc_tol: Optional[float]) -> SketchPlan:
    fields: Dict[str, Any] = {"strategy": name, "q": q, "ell": ell, "seed": seed}
    if trunc_tol is not None:
        fields["trunc_tol"] = trunc_tol
    return SketchPlan(**fields)


def _parse_range(text: str, name: str) -> List[int]:
    """"1,2,5" or "15:71" (inclusive) or "15:71:4"."""
    values: List[int] = []
    try:
        for part in text.split(','):
            part = part.strip()
            if not part:
                continue
            if ':' in part:
                bounds = [int(b) for b in part.split(':')]
                start, stop = bounds[0], bounds[1]
                step = bounds[2] if len(bounds) > 2 else 1
                if step < 1:
                    raise ValueError(f"step must be positive, got {step}")
                values.extend(range(start, stop + 1, step))
            else:
                values.append(int(part))
    except ValueError as e:
        raise click.BadParameter(f"cannot parse {text!r}: {e}", param_hint=f"--{name}")
    if not values:
        raise click.BadParameter(f"empty sweep range {text!r}", param_hint=f"--{name}")
    return values


def _print_rows(title: str, rows: Sequence[Dict[str, Any]], columns: Sequence[str]):
    """Render result rows as a rich table."""
    table = Table(title=title, show_header=True, header_style="bold magenta")
    for column in columns:
        table.add_column(column, justify="right" if column != "algorithm" else "left")
    for row in rows:
        cells = []
        for column in columns:
            value = row.get(column)
            if value is None:
                cells.append("-")
            elif isinstance(value, float):
                cells.append(f"{value:.6g}")
            else:
                cells.append(str(value))
        table.add_row(*cells)
    console.print(table)


def _finish(paths: Sequence[Path]):
    missing = [str(p) for p in paths if not Path(p).exists()]
    if missing:
        _fail(OSError(f"outputs not written: {', '.join(missing)}"))
    for p in paths:
        console.print(f"[green]✓[/green] Wrote {p}")


@click.group()
@output_options
@click.pass_context
def cli(ctx: click.Context, seed: Optional[int], out: Optional[str], output_format: Optional[str]):
    """Coupled matrix and matrix-tensor factorization toolkit."""
    ctx.obj = {"seed": seed if seed is not None else settings.default_seed,
               "out": out, "format": output_format}


@cli.command()
@click.option('--family', type=click.Choice(list(FAMILY_PARAMS)), required=True, help='Generator family')
@click.option('--m', type=int, default=None)
@click.option('--n', type=int, default=None)
@click.option('--n1', type=int, default=None)
@click.option('--n2', type=int, default=None)
@click.option('--n3', type=int, default=None)
@click.option('--r', type=int, default=None)
@click.option('--r1', type=int, default=None)
@click.option('--r2', type=int, default=None)
@click.option('--r3', type=int, default=None)
@click.option('--d', type=float, default=None, help='Spectral decay exponent or base')
@click.option('--c', type=int, default=None, help='Shared singular directions')
@click.option('--shared', type=int, default=None, help='Shared left columns (synthetic5)')
@click.option('--text', is_flag=True, help='Write text (.dmt/.dtt) instead of binary files')
@output_options
@click.pass_context
@run_command
def gen(ctx: click.Context, family: str, text: bool, seed: Optional[int], out: Optional[str],
        output_format: Optional[str], **params):
    """Generate a synthetic instance plus manifest.json into --out (a directory)."""
    opts = _resolve(ctx, seed, out, output_format)
    spec = InstanceSpec(family=family, seed=opts["seed"],
                        **{k: v for k, v in params.items() if v is not None})
    out_dir = Path(opts["out"] or settings.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    console.print(f"\n[bold blue]Generating {family}[/bold blue] (seed={spec.seed})")
    arrays = generate(spec)
    written = []
    for name, array in arrays.items():
        ext = ('.dtt' if text else '.dtb') if array.ndim == 3 else ('.dmt' if text else '.dmb')
        written.append(save_array(out_dir / f"{name}{ext}", array))

    config = RunConfig(subcommand="gen", instance=spec, seed=spec.seed,
                       outputs={p.stem: str(p) for p in written},
                       output_format=opts["format"])
    manifest = {"family": family, "params": spec.params(), "seed": spec.seed,
                "files": [p.name for p in written], "config": config.model_dump(mode="json")}
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    _finish(written + [manifest_path])


def plan_options(func):
    func = click.option('--trunc-tol', type=float, default=None,
                        help='Rank-revealing QR drop tolerance')(func)
    func = click.option('--ell', type=int, default=None, help='Block size (rbki)')(func)
    func = click.option('--q', type=int, default=1, show_default=True,
                        help='Iteration depth (rsi, rbki)')(func)
    func = click.option('--plan', 'plans', type=click.Choice(PLAN_CHOICES), multiple=True,
                        default=('basic',), show_default=True, help='Algorithm; repeatable')(func)
    func = click.option('--k', type=int, required=True, help='Approximation rank')(func)
    return func


def _plans(names: Sequence[str], q: int, ell: Optional[int], seed: int,
           trunc_tol: Optional[float], repeat: int) -> List[SketchPlan]:
    plans = []
    for name in names:
        runs = repeat if name != 'basic' else 1
        plans.extend(_plan(name, q, ell, seed + i, trunc_tol) for i in range(runs))
    return plans


def _save_factors(factors_dir: Optional[str], label: str, **factors) -> List[Path]:
    if not factors_dir:
        return []
    folder = Path(factors_dir)
    folder.mkdir(parents=True, exist_ok=True)
    return [save_array(folder / f"{label}_{name}.dmb", value) for name, value in factors.items()]


@cli.command('cmf')
@click.option('--x', 'x_path', type=click.Path(exists=True, dir_okay=False), required=True, help='X matrix file')
@click.option('--y', 'y_path', type=click.Path(exists=True, dir_okay=False), required=True, help='Y matrix file')
@plan_options
@click.option('--repeat', type=int, default=1, show_default=True, help='Runs per randomized plan (seed, seed+1, ...)')
@click.option('--factors-dir', type=click.Path(file_okay=False), default=None, help='Also write U, V, W')
@output_options
@click.pass_context
@run_command
def cmf_command(ctx: click.Context, x_path: str, y_path: str, k: int, plans: Sequence[str],
                q: int, ell: Optional[int], trunc_tol: Optional[float], repeat: int,
                factors_dir: Optional[str], seed: Optional[int], out: Optional[str],
                output_format: Optional[str]):
    """Coupled matrix factorization of X and Y; one table row per plan."""
    opts = _resolve(ctx, seed, out, output_format)
    X, Y = load_array(x_path), load_array(y_path)
    sketch_plans = _plans(plans, q, ell, opts["seed"], trunc_tol, repeat)
    extra: List[Path] = []

    def save(plan: SketchPlan, result):
        label = f"{plan.label()}_s{plan.seed}" if plan.is_randomized else plan.label()
        extra.extend(_save_factors(factors_dir, label, U=result.U, V=result.V, W=result.W))

    console.print(f"\n[bold blue]CMF[/bold blue] X{X.shape} Y{Y.shape}, k={k}")
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  console=console) as progress:
        progress.add_task(description="Factorizing...", total=None)
        rows = cmf_table(X, Y, k, sketch_plans, on_result=save if factors_dir else None)

    path = _output_path(opts, "cmf")
    config = RunConfig(subcommand="cmf", inputs={"X": x_path, "Y": y_path},
                       params={"k": k}, plans=sketch_plans, outputs={"table": str(path)},
                       repeat=repeat, seed=opts["seed"], output_format=opts["format"])
    _print_rows("CMF", rows, TABLE_COLUMNS)
    _finish(write_rows(path, rows, TABLE_COLUMNS, opts["format"], config) + extra)


@cli.command('cmtf')
@click.option('--t', 't_path', type=click.Path(exists=True, dir_okay=False), required=True, help='Tensor file')
@click.option('--y', 'y_path', type=click.Path(exists=True, dir_okay=False), required=True, help='Y matrix file')
@plan_options
@click.option('--form', type=click.Choice(['tucker', 'cp_als']), default='tucker', show_default=True,
              help='Tensor factor format')
@click.option('--init-seed', type=int, default=0, show_default=True, help='CP-ALS initialization seed')
@click.option('--max-iters', type=int, default=None, help='CP-ALS iteration cap')
@click.option('--rel-tol', type=float, default=None, help='CP-ALS relative-change tolerance')
@click.option('--repeat', type=int, default=1, show_default=True, help='Runs per randomized plan')
@output_options
@click.pass_context
@run_command
def cmtf_command(ctx: click.Context, t_path: str, y_path: str, k: int, plans: Sequence[str],
                 q: int, ell: Optional[int], trunc_tol: Optional[float], form: str,
                 init_seed: int, max_iters: Optional[int], rel_tol: Optional[float],
                 repeat: int, seed: Optional[int], out: Optional[str],
                 output_format: Optional[str]):
    """Coupled matrix-tensor factorization (mode-1 coupling); one row per plan."""
    opts = _resolve(ctx, seed, out, output_format)
    T, Y = load_array(t_path), load_array(y_path)
    sketch_plans = _plans(plans, q, ell, opts["seed"], trunc_tol, repeat)
    max_iters = settings.als_max_iters if max_iters is None else max_iters
    rel_tol = settings.als_rel_tol if rel_tol is None else rel_tol

    console.print(f"\n[bold blue]CMTF ({form})[/bold blue] T{T.shape} Y{Y.shape}, k={k}")
    rows = cmtf_table(T, Y, k, sketch_plans, fmt=form, init_seed=init_seed,
                      max_iters=max_iters, rel_tol=rel_tol)

    path = _output_path(opts, "cmtf")
    config = RunConfig(subcommand="cmtf", inputs={"T": t_path, "Y": y_path},
                       params={"k": k, "form": form, "init_seed": init_seed,
                               "max_iters": max_iters, "rel_tol": rel_tol},
                       plans=sketch_plans, outputs={"table": str(path)}, repeat=repeat,
                       seed=opts["seed"], output_format=opts["format"])
    _print_rows(f"CMTF ({form})", rows, TABLE_COLUMNS)
    _finish(write_rows(path, rows, TABLE_COLUMNS, opts["format"], config))


@cli.command()
@click.option('--x', 'x_path', type=click.Path(exists=True, dir_okay=False), default=None, help='X matrix file')
@click.option('--t', 't_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Tensor file, swept through its mode-1 unfolding instead of X')
@click.option('--y', 'y_path', type=click.Path(exists=True, dir_okay=False), required=True, help='Y matrix file')
@click.option('--k', type=int, required=True, help='Approximation rank')
@click.option('--ell', 'ell_range', default='1', show_default=True, help='Block sizes, e.g. "1,2" or "1:4"')
@click.option('--q', 'q_range', required=True, help='Depths, e.g. "15:71" or "15:71:4"')
@click.option('--trunc-tol', type=float, default=None, help='Rank-revealing QR drop tolerance')
@click.option('--repeat', type=int, default=1, show_default=True, help='Seeds per point (seed, seed+1, ...)')
@output_options
@click.pass_context
@run_command
def bench(ctx: click.Context, x_path: Optional[str], t_path: Optional[str], y_path: str, k: int,
          ell_range: str, q_range: str, trunc_tol: Optional[float], repeat: int,
          seed: Optional[int], out: Optional[str], output_format: Optional[str]):
    """Block Krylov sweep of errors against projection-subspace dimension."""
    if (x_path is None) == (t_path is None):
        raise click.UsageError("give exactly one of --x and --t")
    opts = _resolve(ctx, seed, out, output_format)
    ell_values = _parse_range(ell_range, 'ell')
    q_values = _parse_range(q_range, 'q')
    if repeat < 1:
        raise click.BadParameter(f"must be >= 1, got {repeat}", param_hint='--repeat')
    seeds = [opts["seed"] + i for i in range(repeat)]
    trunc_tol = settings.trunc_tol if trunc_tol is None else trunc_tol
    Y = load_array(y_path)

    console.print(f"\n[bold blue]Sweep[/bold blue] ell={ell_values} q={q_values[0]}..{q_values[-1]} "
                  f"x {len(seeds)} seeds (threads={settings.threads})")
    started = time.perf_counter()
    if t_path is not None:
        inputs = {"T": t_path, "Y": y_path}
        rows = tensor_projection_sweep(load_array(t_path), Y, k, ell_values, q_values, seeds,
                                       trunc_tol=trunc_tol)
    else:
        inputs = {"X": x_path, "Y": y_path}
        rows = projection_sweep(load_array(x_path), Y, k, ell_values, q_values, seeds,
                                trunc_tol=trunc_tol)
    elapsed = time.perf_counter() - started

    path = _output_path(opts, "bench")
    config = RunConfig(subcommand="bench", inputs=inputs,
                       params={"k": k, "ell": ell_values, "q": q_values, "trunc_tol": trunc_tol},
                       outputs={"table": str(path)}, repeat=repeat, seed=opts["seed"],
                       output_format=opts["format"])
    _print_rows("Projection sweep", rows[:1] + rows[1:21], SWEEP_COLUMNS)
    console.print(f"[dim]{len(rows) - 1} sweep points in {elapsed:.2f}s[/dim]")
    _finish(write_rows(path, rows, SWEEP_COLUMNS, opts["format"], config))


@cli.command()
@click.option('--experiment', type=click.Choice(['projection', 'cmtf']), required=True,
              help='projection: joint basis vs augmented sketch; cmtf: Tucker vs CP-ALS')
@click.option('--trials', type=int, default=100, show_default=True)
@click.option('--m', type=int, default=None)
@click.option('--n', type=int, default=None)
@click.option('--n1', type=int, default=None)
@click.option('--n2', type=int, default=None)
@click.option('--n3', type=int, default=None)
@click.option('--r', type=int, default=None)
@click.option('--r1', type=int, default=None)
@click.option('--r2', type=int, default=None)
@click.option('--k', type=int, default=None)
@output_options
@click.pass_context
@run_command
def compare(ctx: click.Context, experiment: str, trials: int, seed: Optional[int],
            out: Optional[str], output_format: Optional[str], **dims):
    """Paired per-trial objectives of two approaches."""
    opts = _resolve(ctx, seed, out, output_format)
    allowed = (('m', 'n1', 'n2', 'r1', 'r2', 'k') if experiment == 'projection'
               else ('m', 'n2', 'n3', 'n', 'r', 'k'))
    ignored = [name for name, v in dims.items() if v is not None and name not in allowed]
    if ignored:
        raise click.BadParameter(f"not used by the {experiment} experiment: {', '.join(ignored)}")
    kwargs = {name: v for name, v in dims.items() if v is not None}

    console.print(f"\n[bold blue]Compare ({experiment})[/bold blue] {trials} trials")
    if experiment == 'projection':
        rows = compare_projections(trials, seed=opts["seed"], **kwargs)
        columns = PROJECTION_COMPARE_COLUMNS
        first, second = "joint_objective", "augmented_objective"
    else:
        rows = compare_cmtf(trials, seed=opts["seed"], **kwargs)
        columns = CMTF_COMPARE_COLUMNS
        first, second = "tucker_objective", "cp_als_objective"

    wins = sum(1 for row in rows if row[second] is None or row[first] <= row[second])
    console.print(f"{first} <= {second} on {wins}/{len(rows)} trials")

    path = _output_path(opts, f"compare_{experiment}")
    config = RunConfig(subcommand="compare", params={"experiment": experiment, "trials": trials, **kwargs},
                       outputs={"table": str(path)}, repeat=trials, seed=opts["seed"],
                       output_format=opts["format"])
    _finish(write_rows(path, rows, columns, opts["format"], config))


@cli.command()
@click.option('--gallery', 'gallery_dir', type=click.Path(exists=True, file_okay=False), default=None,
              help='Gallery directory (<person>/<img>.pgm)')
@click.option('--queries', 'queries_dir', type=click.Path(exists=True, file_okay=False), default=None,
              help='Query directory (<person>/<img>.pgm)')
@click.option('--synthetic', is_flag=True, help='Use a seeded synthetic 5-person gallery')
@click.option('--mode', type=click.Choice(['cmf', 'cmtf-tucker', 'cmtf-cp']), default='cmf', show_default=True)
@click.option('--plan', 'plan_name', type=click.Choice(PLAN_CHOICES), default='basic', show_default=True)
@click.option('--k', type=int, default=5, show_default=True, help='Approximation rank')
@click.option('--q', type=int, default=2, show_default=True)
@click.option('--ell', type=int, default=5, show_default=True)
@click.option('--init-seed', type=int, default=0, show_default=True, help='CP-ALS initialization seed')
@click.option('--table', 'all_variants', is_flag=True, help='Run all 12 mode/plan variants instead')
@output_options
@click.pass_context
@run_command
def facerec(ctx: click.Context, gallery_dir: Optional[str], queries_dir: Optional[str],
            synthetic: bool, mode: str, plan_name: str, k: int, q: int, ell: int,
            init_seed: int, all_variants: bool, seed: Optional[int], out: Optional[str],
            output_format: Optional[str]):
    """Classify query faces by coupled-approximation error."""
    opts = _resolve(ctx, seed, out, output_format)
    if synthetic:
        gallery, queries = synthetic_gallery(seed=opts["seed"])
    elif gallery_dir and queries_dir:
        gallery, queries = load_gallery(gallery_dir), load_queries(queries_dir)
    else:
        raise click.UsageError("give --gallery and --queries, or --synthetic")

    console.print(f"\n[bold blue]Face recognition[/bold blue] {len(gallery.persons)} persons, "
                  f"{len(queries)} queries")
    inputs = {"gallery": gallery_dir or "synthetic", "queries": queries_dir or "synthetic"}

    if all_variants:
        rows = recognition_table(gallery, queries, k=k, q=q, ell=ell, seed=opts["seed"], init_seed=init_seed)
        path = _output_path(opts, "facerec_table")
        config = RunConfig(subcommand="facerec", inputs=inputs,
                           params={"k": k, "q": q, "ell": ell, "init_seed": init_seed, "table": True},
                           outputs={"table": str(path)}, seed=opts["seed"], output_format=opts["format"])
        columns = ["algorithm"] + gallery.persons + ["total"]
        _print_rows("Success rates (%)", rows, columns)
        _finish(write_rows(path, rows, columns, opts["format"], config))
        return

    plan = SketchPlan(strategy=plan_name, q=q, ell=ell, seed=opts["seed"])
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  console=console) as progress:
        progress.add_task(description=f"Classifying ({mode}, {plan.label()})...", total=None)
        report: RecognitionReport = evaluate(gallery, queries, k, plan, mode, init_seed=init_seed)

    path = Path(opts["out"]) if opts["out"] else Path(settings.output_dir) / "report.json"
    config = RunConfig(subcommand="facerec", inputs=inputs, params=dict(report.params),
                       plans=[plan], outputs={"report": str(path)}, seed=opts["seed"],
                       output_format="json")
    report.params["run"] = config.model_dump(mode="json")
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Person", style="cyan")
    table.add_column("Success", justify="right")
    for person, rate in report.per_person.items():
        table.add_row(person, f"{rate:.0%}")
    table.add_row("[bold]Total[/bold]", f"[bold]{report.total_rate:.1%}[/bold]")
    console.print(table)
    _finish([path])


if __name__ == '__main__':
    cli()
