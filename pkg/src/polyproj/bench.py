"""Instance generators and the benchmark runner.

Instances come from numpy's Philox4x64 counter-based generator, seeded
with a 64-bit integer, so a seed maps to the same cloud on any platform.
Per-run seeds are derived from ``(master seed, kind, d, ell, trial)``
through ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .distance import DistanceOptions, distance
from .nearest import ProjectOptions, project
from .solvers import SolverTimeout

CSV_COLUMNS = ("d", "ell", "solver", "accelerated", "trial", "seed", "wall_time", "outer_iters", "inner_iters",
               "result_value")
_KIND_CODE = {"nearest": 0, "distance": 1}


@dataclass(frozen=True)
class ProblemInstance:
    kind: str
    clouds: tuple
    z: np.ndarray | None
    seed: int
    generator_name: str
    d: int
    ell: int
    m: int = 0


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _compressed(rng, d, ell, first):
    pts = rng.uniform(-1.0, 1.0, size=(ell, d))
    pts[:, 0] = first + 0.01 * pts[:, 0]
    return pts


def gen_compressed_cube(d: int, ell: int, seed: int) -> ProblemInstance:
    """``ell`` points of ``[-1, 1]^d`` with the first axis squeezed into ``[0.99, 1.01]``; ``z = 0``."""
    if d < 1 or ell < 1:
        raise ValueError("d and ell must be positive")
    pts = _compressed(_rng(seed), d, ell, 1.0)
    return ProblemInstance("nearest", (pts,), np.zeros(d), int(seed), "compressed_cube/philox4x64", d, ell)


def gen_two_cubes(d: int, ell: int, seed: int) -> ProblemInstance:
    """Two squeezed cubes centred at ``x1 = +1`` and ``x1 = -1``; their hulls are at least 1.98 apart."""
    if d < 1 or ell < 1:
        raise ValueError("d and ell must be positive")
    rng = _rng(seed)
    P = _compressed(rng, d, ell, 1.0)
    Q = _compressed(rng, d, ell, -1.0)
    return ProblemInstance("distance", (P, Q), None, int(seed), "two_cubes/philox4x64", d, ell, ell)


GENERATORS = {"nearest": gen_compressed_cube, "distance": gen_two_cubes}


def derive_seed(master: int, kind: str, d: int, ell: int, trial: int) -> int:
    ss = np.random.SeedSequence([int(master), _KIND_CODE[kind], int(d), int(ell), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class BenchRecord:
    d: int
    ell: int
    solver: str
    accelerated: bool
    trial: int
    seed: int
    wall_time: float
    outer_iters: int
    inner_iters: int
    result_value: float
    kind: str = field(default="nearest", compare=False)
    status: str = field(default="optimal_eta", compare=False)
    final_criterion_value: float = field(default=math.nan, compare=False)
    corrections: int = field(default=0, compare=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


@dataclass(frozen=True)
class BenchConfig:
    kind: str = "nearest"
    d_values: tuple = (3,)
    ell_values: tuple = (100,)
    trials: int = 10
    solvers: tuple = ("qp",)
    modes: tuple = (True, False)  # accelerated on / off
    eta: float | None = None
    seed: int = 0
    timeout: float | None = 60.0
    serial: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.kind not in GENERATORS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")


def _run_one(config: BenchConfig, instance: ProblemInstance, solver: str, accelerated: bool, trial: int):
    deadline = None
    start = time.perf_counter()
    if config.timeout is not None:
        deadline = time.monotonic() + config.timeout
    common = dict(d=instance.d, ell=instance.ell, solver=solver, accelerated=accelerated, trial=trial,
                  seed=instance.seed, kind=instance.kind)
    try:
        if instance.kind == "nearest":
            rep = project(instance.z, instance.clouds[0],
                          ProjectOptions(solver=solver, eta=config.eta, accelerate=accelerated, deadline=deadline))
            value = float(np.linalg.norm(rep.projection - instance.z))
            crit = rep.final_worst_value
            corrections = rep.corrections_step3 + rep.corrections_step4
        else:
            rep = distance(*instance.clouds,
                           DistanceOptions(solver=solver, eta=config.eta, accelerate=accelerated, deadline=deadline))
            value = rep.distance
            crit = min(rep.rho_x, rep.rho_y)
            corrections = rep.corrections
        elapsed = time.perf_counter() - start
        return BenchRecord(**common, wall_time=elapsed, outer_iters=rep.outer_iterations,
                           inner_iters=rep.inner_iterations, result_value=value, status=rep.termination.value,
                           final_criterion_value=crit, corrections=corrections)
    except SolverTimeout:
        status = "timeout"
    except Exception as exc:  # a failed run is recorded, the suite goes on
        status = f"error: {type(exc).__name__}: {exc}"
    return BenchRecord(**common, wall_time=time.perf_counter() - start, outer_iters=0, inner_iters=0,
                       result_value=math.nan, status=status)


def run_suite(config: BenchConfig, progress=None) -> list:
    """Every (d, ell, trial) instance is solved by each solver in each mode; records come back in that order."""
    gen = GENERATORS[config.kind]
    jobs = []
    for d in config.d_values:
        for ell in config.ell_values:
            for trial in range(config.trials):
                inst = gen(d, ell, derive_seed(config.seed, config.kind, d, ell, trial))
                for solver in config.solvers:
                    for accelerated in config.modes:
                        jobs.append((inst, solver, accelerated, trial))

    def work(job):
        rec = _run_one(config, *job)
        if progress is not None:
            progress(rec)
        return rec

    if config.serial:
        return [work(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(work, jobs))


def aggregate(records) -> list:
    """Per-cell means over finished runs, keyed by (d, ell, solver, accelerated)."""
    cells = defaultdict(list)
    for r in records:
        cells[(r.d, r.ell, r.solver, r.accelerated)].append(r)
    out = []
    for (d, ell, solver, acc), rs in sorted(cells.items()):
        ok = [r for r in rs if r.status == "optimal_eta"]
        out.append({
            "d": d, "ell": ell, "solver": solver, "accelerated": acc, "runs": len(rs), "finished": len(ok),
            "mean_time": float(np.mean([r.wall_time for r in ok])) if ok else math.nan,
            "mean_outer": float(np.mean([r.outer_iters for r in ok])) if ok else math.nan,
            "mean_result": float(np.mean([r.result_value for r in ok])) if ok else math.nan,
        })
    return out


def emit_csv(records, path) -> None:
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in records:
            row = r.row()
            row["wall_time"] = repr(r.wall_time)
            row["result_value"] = repr(r.result_value)
            writer.writerow(row)


def read_csv(path) -> list:
    types = {f.name: f.type for f in fields(BenchRecord)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            vals = {}
            for k in CSV_COLUMNS:
                if k == "accelerated":
                    vals[k] = row[k] == "True"
                elif types[k] == "int":
                    vals[k] = int(row[k])
                elif types[k] == "float":
                    vals[k] = float(row[k])
                else:
                    vals[k] = row[k]
            out.append(BenchRecord(**vals))
    return out


def plot_series(records) -> list:
    """Mean wall time and outer iterations per ``ell``, one series per (d, solver, mode)."""
    series = defaultdict(lambda: defaultdict(list))
    for r in records:
        if r.status == "optimal_eta":
            series[(r.d, r.solver, r.accelerated)][r.ell].append(r)
    out = []
    for (d, solver, acc), by_ell in sorted(series.items()):
        ells = sorted(by_ell)
        out.append({
            "d": d, "solver": solver, "accelerated": acc, "ell": ells,
            "mean_time": [float(np.mean([r.wall_time for r in by_ell[e]])) for e in ells],
            "mean_outer": [float(np.mean([r.outer_iters for r in by_ell[e]])) for e in ells],
        })
    return out


def emit_plotdata(records, path) -> None:
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    Path(path).write_text(json.dumps(plot_series(records), indent=1))


def speedup(records, d: int, ell: int, solver: str) -> float:
    """Ratio of mean plain time to mean accelerated time for one cell."""
    cells = {(c["accelerated"]): c for c in aggregate(records)
             if c["d"] == d and c["ell"] == ell and c["solver"] == solver}
    return cells[False]["mean_time"] / cells[True]["mean_time"]


def config_dict(config: BenchConfig) -> dict:
    return asdict(config)
