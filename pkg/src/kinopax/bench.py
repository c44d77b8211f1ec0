"""Benchmark harness: seeded trial batches, statistics, sweeps, export.

Trials run with consecutive seeds (seed + trial index). Structured outputs
are line-delimited JSON records plus a summary document; every solved
trajectory is re-validated with an independent checker at 10x finer
resolution and violations are reported in the summary.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import (ConfigError, Environment, PlannerConfig, PlanResult)
from .dynamics import DynamicsModel
from .planner import KinoPax, IterationTrace
from .rrt import rrt_plan
from .validity import ValidityChecker

PLANNERS = ("kinopax", "rrt")


@dataclass
class TrialRecord:
    trial: int
    seed: int
    status: str
    wall_time_ms: float
    tree_size: int
    iterations: int
    solution_duration_s: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class StatsTable:
    planner: str
    model: str
    environment: str
    trials: int
    solved: int
    success_pct: float
    mean_ms_solved: Optional[float]
    median_ms_solved: Optional[float]
    mean_ms_all: float
    median_ms_all: float
    revalidation_failures: int

    def format_row(self) -> str:
        med = "-" if self.median_ms_solved is None else f"{self.median_ms_solved:10.1f}"
        mean = "-" if self.mean_ms_solved is None else f"{self.mean_ms_solved:10.1f}"
        return (f"{self.planner:<8} {self.model:<8} {self.environment:<22} "
                f"{mean:>10} {med:>10} {self.success_pct:7.1f} {self.trials:6d}")

    @staticmethod
    def header() -> str:
        return (f"{'planner':<8} {'model':<8} {'environment':<22} "
                f"{'mean ms':>10} {'median ms':>10} {'succ %':>7} {'trials':>6}")


def summarize(planner: str, model_name: str, env_name: str,
              records: list[TrialRecord], revalidation_failures: int = 0) -> StatsTable:
    solved = [r for r in records if r.status == "solved"]
    times_solved = [r.wall_time_ms for r in solved]
    times_all = [r.wall_time_ms for r in records]
    return StatsTable(
        planner=planner,
        model=model_name,
        environment=env_name,
        trials=len(records),
        solved=len(solved),
        success_pct=100.0 * len(solved) / len(records) if records else 0.0,
        mean_ms_solved=statistics.fmean(times_solved) if times_solved else None,
        median_ms_solved=statistics.median(times_solved) if times_solved else None,
        mean_ms_all=statistics.fmean(times_all) if times_all else 0.0,
        median_ms_all=statistics.median(times_all) if times_all else 0.0,
        revalidation_failures=revalidation_failures,
    )


def _run_one(cfg: PlannerConfig, env: Environment, model: DynamicsModel,
             planner: str, check_resolution: float, backend: Optional[str],
             trace_fn: Optional[Callable[[IterationTrace], None]] = None,
             dump_regions_path=None) -> PlanResult:
    if planner == "kinopax":
        engine = KinoPax(cfg, env, model, check_resolution, backend)
        result = engine.solve(trace_fn=trace_fn)
        if dump_regions_path is not None:
            dump_regions(engine, dump_regions_path)
        return result
    if planner == "rrt":
        return rrt_plan(cfg, env, model, check_resolution)
    raise ConfigError(f"unknown planner '{planner}' (choose from {PLANNERS})")


def run_trials(cfg: PlannerConfig, env: Environment, model: DynamicsModel,
               planner: str = "kinopax", n_trials: int = 1,
               check_resolution: float = 0.05, backend: Optional[str] = None,
               out_dir=None, revalidate: bool = True,
               parallel_trials: bool = False,
               trace_fn: Optional[Callable[[IterationTrace], None]] = None,
               dump_regions_dir=None,
               quiet: bool = True) -> tuple[StatsTable, list[TrialRecord]]:
    """Run n_trials seeded queries and aggregate statistics.

    Trial i uses seed cfg.seed + i. ``parallel_trials`` runs whole trials on
    worker threads and is allowed for the baseline planner only (the parallel
    planner already uses its workers internally).
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if parallel_trials and planner != "rrt":
        raise ConfigError("--parallel-trials applies to the rrt baseline only")

    fine = ValidityChecker(env, model, check_resolution / 10.0)
    results: list[Optional[PlanResult]] = [None] * n_trials

    def one(i: int) -> PlanResult:
        trial_cfg = cfg.with_seed(cfg.seed + i)
        dump = None
        if dump_regions_dir is not None:
            dump = Path(dump_regions_dir) / f"regions_trial{i:03d}.csv"
        return _run_one(trial_cfg, env, model, planner, check_resolution,
                        backend, trace_fn if i == 0 else None, dump)

    if parallel_trials and n_trials > 1:
        with ThreadPoolExecutor(max_workers=min(8, n_trials)) as pool:
            for i, res in enumerate(pool.map(one, range(n_trials))):
                results[i] = res
    else:
        for i in range(n_trials):
            results[i] = one(i)

    records: list[TrialRecord] = []
    violations = 0
    for i, res in enumerate(results):
        records.append(TrialRecord(
            trial=i, seed=cfg.seed + i, status=res.status.value,
            wall_time_ms=res.stats.wall_time_ms, tree_size=res.stats.tree_size,
            iterations=res.stats.iterations,
            solution_duration_s=res.stats.solution_duration_s))
        if revalidate and res.solved:
            if not fine.trajectory_valid(res.trajectory, start=env.start):
                violations += 1

    table = summarize(planner, model.name, env.name, records, violations)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "records.jsonl", "w") as fh:
            for r in records:
                fh.write(r.to_json() + "\n")
        (out / "summary.json").write_text(json.dumps(asdict(table), sort_keys=True,
                                                     indent=2) + "\n")
        first_solved = next((r for r in results if r.solved), None)
        if first_solved is not None and first_solved.trajectory:
            export_trajectory(first_solved, out / "trajectory.csv")
    if not quiet:
        print(StatsTable.header())
        print(table.format_row())
    return table, records


def sweep_te(cfg: PlannerConfig, env: Environment, model: DynamicsModel,
             te_values: list[int], n_trials: int,
             check_resolution: float = 0.05, backend: Optional[str] = None,
             out_dir=None, quiet: bool = True) -> list[dict]:
    """Failure counts and runtime statistics across tree-capacity values."""
    if sorted(te_values) != list(te_values) or len(set(te_values)) != len(te_values):
        raise ConfigError("te values must be strictly increasing")
    rows = []
    for te in te_values:
        te_cfg = replace(cfg, t_e=int(te))
        _, records = run_trials(te_cfg, env, model, "kinopax", n_trials,
                                check_resolution, backend)
        solved_times = [r.wall_time_ms for r in records if r.status == "solved"]
        rows.append({
            "t_e": int(te),
            "trials": n_trials,
            "failures": sum(1 for r in records if r.status != "solved"),
            "mean_ms": statistics.fmean(solved_times) if solved_times else math.nan,
            "var_ms": statistics.pvariance(solved_times) if len(solved_times) > 1 else 0.0,
        })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.jsonl", "w") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    if not quiet:
        print(f"{'t_e':>10} {'failures':>9} {'mean ms':>12} {'var ms':>14}")
        for row in rows:
            print(f"{row['t_e']:>10} {row['failures']:>9} "
                  f"{row['mean_ms']:>12.1f} {row['var_ms']:>14.1f}")
    return rows


def export_trajectory(result: PlanResult, path) -> None:
    """Write the solution as a CSV table plus a JSON summary sidecar.

    One row per integrator substep endpoint: cumulative time, the full state
    vector, then the control held over that substep.
    """
    if not result.solved:
        raise ValueError("cannot export an unsolved result")
    path = Path(path)
    segments = result.trajectory
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if segments:
            n = len(segments[0].end_state)
            nu = len(segments[0].control)
            writer.writerow(["t"] + [f"x{i}" for i in range(n)]
                            + [f"u{i}" for i in range(nu)])
            t_base = 0.0
            for seg in segments:
                substeps = len(seg.sampled_states) - 1
                step_dt = seg.dt / substeps
                for k in range(1, substeps + 1):
                    writer.writerow(
                        [repr(float(t_base + k * step_dt))]
                        + [repr(float(v)) for v in seg.sampled_states[k]]
                        + [repr(float(v)) for v in seg.control])
                    rows += 1
                t_base += seg.dt
        else:
            writer.writerow(["t"])
    summary = {
        "duration_s": result.stats.solution_duration_s,
        "segments": len(segments),
        "rows": rows,
    }
    Path(str(path) + ".summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")


def dump_regions(engine: KinoPax, path) -> None:
    """Write per-region counters and metrics of a finished run to CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = engine.decomp.dump_rows()
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "region", "n_valid", "n_invalid", "cov", "free_vol", "score", "p_accept"])
        writer.writeheader()
        writer.writerows(rows)
