"""Benchmark harness: error/timing tables, projection sweeps and paired comparisons.

Rows are plain dicts keyed by column name; `write_rows` renders them as
RFC-4180 CSV (floats at settings.csv_digits significant digits) or JSON, and
records the resolved run configuration next to them.
"""

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cmf import CmfResult, cmf, cmf_basic, cmf_objective, relative_errors
from .cmtf import (
    cmtf_cp_als,
    cmtf_cp_als_randomized,
    cmtf_errors,
    cmtf_tucker,
    cp_objective,
    tucker_objective,
)
from .config import settings
from .errors import DegenerateIterateError, ParameterError
from .facerec import Gallery, evaluate
from .models import RunConfig, SketchPlan
from .sketching import gaussian, make_rng, thin_qr
from .testgen import planted_cp, synthetic1

logger = logging.getLogger(__name__)

Row = Dict[str, Any]

TABLE_COLUMNS = ["algorithm", "p", "ell", "q", "err_X", "err_Y", "total_time_s", "cmf_time_s"]
SWEEP_COLUMNS = ["algorithm", "ell", "q", "seed", "p", "subspace_dim", "max_dim", "err_X", "err_Y"]
PROJECTION_COMPARE_COLUMNS = ["trial", "seed", "joint_objective", "augmented_objective"]
CMTF_COMPARE_COLUMNS = ["trial", "seed", "tucker_objective", "cp_als_objective", "cp_als_iterations"]


def _parallel_map(func: Callable, items: Sequence) -> List:
    """Map over independent tasks, at most settings.threads at a time."""
    if settings.threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(func, items))


def table_row(plan: SketchPlan, achieved_p: int, err_x: float, err_y: float,
              total_s: float, core_s: float) -> Row:
    """One row of an error/timing table; basic runs leave p, ell and q empty."""
    randomized = plan.is_randomized
    return {
        "algorithm": plan.label(),
        "p": achieved_p if randomized else None,
        "ell": plan.ell if plan.strategy == "rbki" else None,
        "q": plan.q if plan.strategy in ("rsi", "rbki") else None,
        "err_X": err_x,
        "err_Y": err_y,
        "total_time_s": total_s,
        "cmf_time_s": core_s,
    }


def cmf_table(
    X: np.ndarray,
    Y: np.ndarray,
    k: int,
    plans: Iterable[SketchPlan],
    on_result: Optional[Callable[[SketchPlan, CmfResult], None]] = None
) -> List[Row]:
    """Run each plan's CMF variant and tabulate errors and timings.

    `on_result` sees every (plan, result) pair, e.g. to persist the factors.
    """
    rows = []
    for plan in plans:
        result = cmf(X, Y, k, plan)
        if on_result is not None:
            on_result(plan, result)
        err_x, err_y = relative_errors(X, Y, result)
        rows.append(table_row(plan, result.achieved_p, err_x, err_y,
                              result.elapsed_total_s, result.elapsed_core_s))
        logger.info(f"{plan.label()}: err_X={err_x:.6e} err_Y={err_y:.6e}")
    return rows


def cmtf_table(
    T: np.ndarray,
    Y: np.ndarray,
    k: int,
    plans: Iterable[SketchPlan],
    fmt: str = "tucker",
    init_seed: int = 0,
    max_iters: Optional[int] = None,
    rel_tol: Optional[float] = None
) -> List[Row]:
    """Run each plan's CMTF variant (Tucker or CP-ALS) and tabulate errors and timings."""
    rows = []
    for plan in plans:
        if fmt == "tucker":
            result = cmtf_tucker(T, Y, k, plan)
        elif plan.is_randomized:
            result = cmtf_cp_als_randomized(T, Y, k, plan, init_seed=init_seed,
                                            max_iters=max_iters, rel_tol=rel_tol)
        else:
            result = cmtf_cp_als(T, Y, k, init_seed=init_seed, max_iters=max_iters, rel_tol=rel_tol)
        err_x, err_y = cmtf_errors(T, Y, result)
        rows.append(table_row(plan, result.achieved_p, err_x, err_y,
                              result.elapsed_total_s, result.elapsed_core_s))
    return rows


def _rbki_sweep(
    solve: Callable[[SketchPlan], Any],
    errors: Callable[[Any], Tuple[float, float]],
    k: int,
    m: int,
    ell_values: Sequence[int],
    q_values: Sequence[int],
    seeds: Sequence[int],
    trunc_tol: Optional[float]
) -> List[Row]:
    if not ell_values or not q_values or not seeds:
        raise ParameterError("sweep ranges must be non-empty")
    trunc_tol = settings.trunc_tol if trunc_tol is None else trunc_tol

    bx, by = errors(solve(SketchPlan(strategy="none")))
    rows = [{"algorithm": "basic", "ell": None, "q": None, "seed": None, "p": None,
             "subspace_dim": None, "max_dim": None, "err_X": bx, "err_Y": by}]

    tasks = [(ell, q, seed) for ell, q, seed in product(ell_values, q_values, seeds)
             if k <= ell * q <= m]
    skipped = len(ell_values) * len(q_values) * len(seeds) - len(tasks)
    if skipped:
        logger.info(f"Skipping {skipped} sweep points with ell*q outside [k, m]")
    if not tasks:
        raise ParameterError("no sweep point satisfies k <= ell*q <= m")

    def run(task) -> Row:
        ell, q, seed = task
        plan = SketchPlan(strategy="rbki", ell=ell, q=q, seed=seed, trunc_tol=trunc_tol)
        result = solve(plan)
        ex, ey = errors(result)
        return {"algorithm": "RBKI", "ell": ell, "q": q, "seed": seed, "p": result.achieved_p,
                "subspace_dim": result.basis_cols, "max_dim": 2 * ell * q,
                "err_X": ex, "err_Y": ey}

    rows.extend(_parallel_map(run, tasks))
    return rows


def projection_sweep(
    X: np.ndarray,
    Y: np.ndarray,
    k: int,
    ell_values: Sequence[int],
    q_values: Sequence[int],
    seeds: Sequence[int],
    trunc_tol: Optional[float] = None
) -> List[Row]:
    """Block Krylov errors against projection-subspace dimension.

    The first row is the basic-algorithm benchmark. Each further row reports
    the rank-revealed subspace dimension next to the maximal one, 2*ell*q.
    """
    return _rbki_sweep(lambda plan: cmf(X, Y, k, plan),
                       lambda result: relative_errors(X, Y, result),
                       k, X.shape[0], ell_values, q_values, seeds, trunc_tol)


def tensor_projection_sweep(
    T: np.ndarray,
    Y: np.ndarray,
    k: int,
    ell_values: Sequence[int],
    q_values: Sequence[int],
    seeds: Sequence[int],
    trunc_tol: Optional[float] = None
) -> List[Row]:
    """Same sweep for a tensor coupled in mode 1, solved in Tucker form.

    err_X is the relative error of the rebuilt tensor.
    """
    return _rbki_sweep(lambda plan: cmtf_tucker(T, Y, k, plan),
                       lambda result: cmtf_errors(T, Y, result),
                       k, T.shape[0], ell_values, q_values, seeds, trunc_tol)


def _augmented_cmf(X: np.ndarray, Y: np.ndarray, k: int, seed: int) -> CmfResult:
    """Baseline: one k-column sketch of the augmented matrix [X Y]."""
    rng = make_rng(seed)
    XY = np.hstack([X, Y])
    Q = thin_qr(XY @ gaussian(XY.shape[1], k, rng))[0]
    projected = cmf_basic(Q.T @ X, Q.T @ Y, k)
    return CmfResult(U=Q @ projected.U, V=projected.V, W=projected.W)


def compare_projections(
    trials: int,
    m: int = 500,
    n1: int = 200,
    n2: int = 300,
    r1: int = 100,
    r2: int = 150,
    k: int = 30,
    seed: int = 0
) -> List[Row]:
    """Joint-basis sketching against the single augmented sketch, per trial."""
    if trials < 1:
        raise ParameterError(f"trial count must be >= 1, got {trials}")

    def run(trial: int) -> Row:
        instance_seed = seed + trial
        X, Y = synthetic1(m, n1, n2, r1, r2, instance_seed)
        joint = cmf(X, Y, k, SketchPlan(strategy="simple", seed=instance_seed))
        augmented = _augmented_cmf(X, Y, k, instance_seed)
        return {"trial": trial + 1, "seed": instance_seed,
                "joint_objective": cmf_objective(X, Y, joint),
                "augmented_objective": cmf_objective(X, Y, augmented)}

    return _parallel_map(run, list(range(trials)))


def compare_cmtf(
    trials: int,
    m: int = 100,
    n2: int = 50,
    n3: int = 20,
    n: int = 30,
    r: int = 3,
    k: int = 3,
    seed: int = 0,
    max_iters: Optional[int] = None,
    rel_tol: Optional[float] = None
) -> List[Row]:
    """Tucker (SVD) against CP-ALS objectives on planted CP instances, per trial."""
    if trials < 1:
        raise ParameterError(f"trial count must be >= 1, got {trials}")

    def run(trial: int) -> Row:
        instance_seed = seed + trial
        T, Y = planted_cp(m, n2, n3, n, r, instance_seed)
        tucker = cmtf_tucker(T, Y, k)
        try:
            als = cmtf_cp_als(T, Y, k, init_seed=instance_seed, max_iters=max_iters, rel_tol=rel_tol)
            als_objective, iterations = cp_objective(T, Y, als), als.iterations
        except DegenerateIterateError as e:
            logger.warning(f"Trial {trial + 1}: {e}")
            als_objective, iterations = None, e.iteration
        return {"trial": trial + 1, "seed": instance_seed,
                "tucker_objective": tucker_objective(T, Y, tucker),
                "cp_als_objective": als_objective, "cp_als_iterations": iterations}

    return _parallel_map(run, list(range(trials)))


RECOGNITION_MODES = [("CMF", "cmf"), ("CMTF-Tucker", "cmtf-tucker"), ("CMTF-CP ALS", "cmtf-cp")]


def recognition_plans(q: int = 2, ell: int = 5, seed: int = 0) -> List[SketchPlan]:
    """Basic, simple, RSI and RBKI plans with the face-recognition parameters."""
    return [
        SketchPlan(strategy="none", seed=seed),
        SketchPlan(strategy="simple", seed=seed),
        SketchPlan(strategy="rsi", q=q, seed=seed),
        SketchPlan(strategy="rbki", ell=ell, q=q, seed=seed),
    ]


def recognition_table(
    gallery: Gallery,
    queries,
    k: int = 5,
    q: int = 2,
    ell: int = 5,
    seed: int = 0,
    init_seed: int = 0
) -> List[Row]:
    """Success rates of all 12 recognition variants (3 modes x 4 plans)."""
    rows = []
    for mode_label, mode in RECOGNITION_MODES:
        for plan in recognition_plans(q, ell, seed):
            report = evaluate(gallery, queries, k, plan, mode, init_seed=init_seed)
            name = mode_label if not plan.is_randomized else f"{plan.label()} {mode_label}"
            row: Row = {"algorithm": name}
            row.update({person: 100.0 * rate for person, rate in report.per_person.items()})
            row["total"] = 100.0 * report.total_rate
            rows.append(row)
    return rows


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
        return settings.float_format() % value
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_rows(
    path: Union[str, Path],
    rows: List[Row],
    columns: Optional[Sequence[str]] = None,
    fmt: str = "csv",
    config: Optional[RunConfig] = None
) -> List[Path]:
    """Write rows as CSV (plus a <out>.run.json config sidecar) or JSON.

    Returns:
        Paths of every file written
    """
    path = Path(path)
    if columns is None:
        columns = list(dict.fromkeys(key for row in rows for key in row))
    written = [path]

    if fmt == "json":
        payload = {"config": config.model_dump(mode="json") if config else None,
                   "columns": list(columns),
                   "rows": [{c: _json_safe(row.get(c)) for c in columns} for row in rows]}
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format_cell(row.get(c)) for c in columns])
        if config is not None:
            sidecar = path.with_name(path.name + ".run.json")
            sidecar.write_text(config.model_dump_json(indent=2), encoding="utf-8")
            written.append(sidecar)
    else:
        raise ParameterError(f"unknown output format {fmt!r}")

    logger.info(f"Wrote {len(rows)} rows to {path}")
    return written
