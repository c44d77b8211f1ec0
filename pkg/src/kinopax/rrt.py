"""Serial kinodynamic RRT used as the benchmark baseline.

Classic loop: sample a state (with a small goal bias), find the nearest
tree node under a weighted metric, extend it with one random control held
for a random duration, keep the segment if it validates. No steering
function. A coarse-grained parallel mode grows independent seeded instances
on worker threads and returns the first solution; that mode is intentionally
first-finish nondeterministic and used only as a baseline.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from typing import Optional

import numpy as np

from .core import (ConfigError, Environment, PlannerConfig, PlanResult,
                   PlanStats, PlanStatus, TrajectorySegment)
from .dynamics import (KIND_ANGLE, KIND_POSITION, KIND_VELOCITY, DynamicsModel,
                       propagate_ode, sample_control, sample_duration)
from .rng import PHASE_GENERIC, RngStream, mix64
from .validity import ValidityChecker, in_goal

GOAL_BIAS = 0.05
_KIND_WEIGHTS = {KIND_POSITION: 1.0, KIND_VELOCITY: 0.1, KIND_ANGLE: 0.3}


def distance_weights(model: DynamicsModel) -> np.ndarray:
    return np.array([_KIND_WEIGHTS[int(k)] for k in model.dim_kinds])


def nearest(states: np.ndarray, x: np.ndarray, weights: np.ndarray,
            wrap_dims: tuple[int, ...]) -> int:
    """Brute-force argmin of weighted squared distance; lowest index wins ties."""
    if len(states) == 0:
        raise ValueError("tree is empty")
    d = states - x
    for dim in wrap_dims:
        d[:, dim] = np.mod(d[:, dim] + np.pi, 2.0 * np.pi) - np.pi
    return int(np.argmin((d * d) @ weights))


def _single_rrt(cfg: PlannerConfig, env: Environment, model: DynamicsModel,
                checker: ValidityChecker, seed: int,
                stop: Optional[threading.Event], t0: float) -> PlanResult:
    rng = RngStream(seed, phase=PHASE_GENERIC)
    cap = cfg.t_e
    n = model.n
    states = np.zeros((cap, n))
    parent = np.full(cap, -1, dtype=np.int64)
    controls = np.zeros((cap, model.control_dim))
    dts = np.zeros(cap)
    states[0] = env.start
    size = 1
    weights = distance_weights(model)
    lo, hi = checker.state_lo, checker.state_hi
    goal = env.goal
    iterations = 0

    def result(status: PlanStatus, goal_index: Optional[int] = None) -> PlanResult:
        trajectory: list[TrajectorySegment] = []
        duration = 0.0
        if status is PlanStatus.SOLVED and goal_index is not None and goal_index > 0:
            chain = []
            c = goal_index
            while c != 0:
                chain.append(c)
                c = int(parent[c])
            chain.reverse()
            trajectory = [
                propagate_ode(model, states[int(parent[c])], controls[c], float(dts[c]))
                for c in chain
            ]
            duration = float(sum(seg.dt for seg in trajectory))
        return PlanResult(
            status=status,
            trajectory=trajectory,
            stats=PlanStats(
                iterations=iterations,
                tree_size=size,
                wall_time_ms=(time.perf_counter() - t0) * 1e3,
                solution_duration_s=duration,
            ),
        )

    if in_goal(env.start, goal, model.position_dims):
        return result(PlanStatus.SOLVED, 0)

    while (time.perf_counter() - t0) < cfg.t_max:
        if stop is not None and stop.is_set():
            return result(PlanStatus.TIMEOUT)
        if size >= cap:
            return result(PlanStatus.CAPACITY_EXHAUSTED)
        iterations += 1

        x_rand = np.empty(n)
        biased = rng.uniform() < GOAL_BIAS
        for d in range(n):
            x_rand[d] = rng.uniform_in(lo[d], hi[d])
        if biased:
            x_rand[list(model.position_dims)] = goal.center

        i_near = nearest(states[:size], x_rand, weights, model.wrap_dims)
        u = sample_control(model, rng)
        dt = sample_duration(rng, cfg.t_prop)
        seg = propagate_ode(model, states[i_near], u, dt)
        if not checker.segment_valid(seg):
            continue
        states[size] = seg.end_state
        parent[size] = i_near
        controls[size] = u
        dts[size] = dt
        size += 1
        if in_goal(seg.end_state, goal, model.position_dims):
            return result(PlanStatus.SOLVED, size - 1)

    return result(PlanStatus.TIMEOUT)


def rrt_plan(cfg: PlannerConfig, env: Environment, model: DynamicsModel,
             check_resolution: float = 0.05) -> PlanResult:
    """Plan with the baseline RRT.

    With cfg.threads > 1, that many independent instances race and the first
    solution wins (coarse-grained parallelism; nondeterministic).
    """
    if cfg.t_e < 1:
        raise ConfigError("t_e must be >= 1")
    checker = ValidityChecker(env, model, check_resolution)
    if not checker.state_valid(env.start):
        raise ConfigError("start state is not valid in this environment")
    t0 = time.perf_counter()
    if cfg.threads <= 1:
        return _single_rrt(cfg, env, model, checker, cfg.seed, None, t0)

    stop = threading.Event()
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = [
            pool.submit(_single_rrt, cfg, env, model, checker,
                        mix64(cfg.seed ^ (k + 1)), stop, t0)
            for k in range(cfg.threads)
        ]
        pending = set(futures)
        winner: Optional[PlanResult] = None
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for f in done:
                res = f.result()
                if res.solved and winner is None:
                    winner = res
                    stop.set()
        if winner is not None:
            return winner
        return futures[0].result()
