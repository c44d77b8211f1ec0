"""Parallel tree planner: pre-allocated arena and three bulk passes.

Each iteration runs propagation (every expansion slot extended lambda times
in parallel), a two-sweep region-estimate update, and a node-set update that
demotes stale expansion slots, appends staged candidates in a fixed order,
and reactivates promising open slots. Passes are separated by barriers;
within a pass, work items are independent.

Staged candidates are appended in (parent slot, extension index) order, so
slot numbering -- and therefore every downstream random stream -- is
reproducible for any worker count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .backend import Batch, PlanContext, get_backend
from .core import (CheckedConfig, ConfigError, Environment, PlannerConfig,
                   PlanResult, PlanStats, PlanStatus, TrajectorySegment,
                   validate_config)
from .decomposition import Decomposition
from .dynamics import DynamicsModel, propagate_ode
from .rng import PHASE_DEMOTE, PHASE_PROMOTE, stream_keys_np, uniforms_np
from .validity import ValidityChecker, in_goal

TAG_EMPTY = 0
TAG_EXPAND = 1      # V_E: flagged for extension this iteration
TAG_OPEN = 2        # V_O: inactive, eligible for reactivation
TAG_UNEXPLORED = 3  # V_U: staged but not yet appended (transient)


def compute_branching_factor(t_e: int, tree_size: int, ve_size: int,
                             lambda_max: int) -> int:
    """Extensions per expansion slot this iteration, floored at 1.

    The raw quotient (t_e - |tree|) / |V_E| can reach 0 near capacity, which
    would stall the loop, so it is clamped from below.
    """
    if ve_size < 1:
        raise ValueError("ve_size must be >= 1")
    if tree_size > t_e:
        raise ValueError("tree_size exceeds capacity")
    return max(1, min(lambda_max, (t_e - tree_size) // ve_size))


class TreeArena:
    """Fixed-capacity node store with boolean-mask set tags."""

    def __init__(self, capacity: int, n: int, control_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, n), dtype=np.float64)
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.control = np.zeros((capacity, control_dim), dtype=np.float64)
        self.dt = np.zeros(capacity, dtype=np.float64)
        self.tag = np.zeros(capacity, dtype=np.uint8)
        self.region = np.zeros(capacity, dtype=np.int64)
        self.size = 0

    def init_root(self, state: np.ndarray, region: int) -> None:
        self.states[0] = state
        self.parent[0] = -1
        self.tag[0] = TAG_EXPAND
        self.region[0] = region
        self.size = 1

    def slots_with_tag(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.tag[: self.size] == tag)

    @property
    def remaining(self) -> int:
        return self.capacity - self.size

    def append_batch(self, parents, controls, dts, ends, regions) -> np.ndarray:
        k = len(parents)
        if k > self.remaining:
            raise ValueError("arena overflow")
        slots = np.arange(self.size, self.size + k, dtype=np.int64)
        self.parent[slots] = parents
        self.control[slots] = controls
        self.dt[slots] = dts
        self.states[slots] = ends
        self.region[slots] = regions
        self.tag[slots] = TAG_EXPAND
        self.size += k
        return slots

    def snapshot(self) -> dict:
        s = self.size
        return {
            "size": s,
            "states": self.states[:s].copy(),
            "parent": self.parent[:s].copy(),
            "control": self.control[:s].copy(),
            "dt": self.dt[:s].copy(),
            "tag": self.tag[:s].copy(),
            "region": self.region[:s].copy(),
        }


@dataclass
class StagedCandidates:
    """Candidates surviving the acceptance gate, in deterministic item order."""

    parent_slot: np.ndarray
    control: np.ndarray
    dt: np.ndarray
    end: np.ndarray
    region: np.ndarray
    attempted: int = 0
    valid_count: int = 0

    def __len__(self) -> int:
        return len(self.parent_slot)


@dataclass
class IterationTrace:
    iteration: int
    branching: int
    ve_size: int
    vo_size: int
    attempted: int
    staged: int
    appended: int
    tree_size: int
    elapsed_s: float


class KinoPax:
    """One planning run; create per query."""

    def __init__(self, cfg: PlannerConfig, env: Environment, model: DynamicsModel,
                 check_resolution: float = 0.05, backend: Optional[str] = None):
        self.checked: CheckedConfig = validate_config(cfg, model)
        self.cfg = cfg
        self.env = env
        self.model = model
        self.checker = ValidityChecker(env, model, check_resolution)
        if not self.checker.state_valid(env.start):
            raise ConfigError("start state is not valid in this environment")
        self.decomp = Decomposition(
            self.checker.state_lo, self.checker.state_hi,
            cfg.cells_per_dim, cfg.subcells_per_dim, delta=cfg.delta,
            position_dims=model.position_dims,
        )
        self.arena = TreeArena(cfg.t_e, model.n, model.control_dim)
        self.backend = get_backend(backend, model)
        self.ctx = PlanContext(
            model=model,
            seed=cfg.seed,
            t_prop=cfg.t_prop,
            state_lo=self.checker.state_lo,
            state_hi=self.checker.state_hi,
            obs_min=env.obstacles_min,
            obs_max=env.obstacles_max,
            check_res=check_resolution,
            grid_lo=self.decomp.lo,
            grid_width=self.decomp.widths,
            grid_cells=self.decomp.cells,
            grid_strides=self.decomp.strides,
            subcells=self.decomp.subcells,
            threads=cfg.threads,
        )
        root_region = self.decomp.region_index(env.start)
        self.arena.init_root(np.asarray(env.start, dtype=np.float64), root_region)
        self.decomp.make_available(np.array([root_region]))
        self.iteration = 0

    # -- pass 1: parallel propagation + acceptance gate -----------------------

    def propagate_pass(self, branching: int) -> StagedCandidates:
        arena = self.arena
        e_slots = arena.slots_with_tag(TAG_EXPAND)
        batch: Batch = self.backend.propagate_batch(
            self.ctx, arena.states, e_slots, branching, self.iteration)
        valid = batch.valid.astype(bool)

        # Outcome counters; invalid items with a non-finite end state carry
        # region -1 and are not attributable.
        self.decomp.record_outcomes(batch.region, valid)

        v_regions = batch.region[valid]
        v_subs = batch.sub[valid]
        first = self.decomp.first_visits(v_regions, v_subs)
        accepted = batch.accept_u[valid] < self.decomp.p_accept[v_regions]
        keep = first | accepted

        item_idx = np.flatnonzero(valid)[keep]
        return StagedCandidates(
            parent_slot=e_slots[item_idx // branching],
            control=batch.control[item_idx],
            dt=batch.dt[item_idx],
            end=batch.end[item_idx],
            region=batch.region[item_idx],
            attempted=batch.items,
            valid_count=int(valid.sum()),
        )

    # -- pass 2: region estimates ----------------------------------------------

    def update_estimates_pass(self) -> None:
        self.decomp.update_all_estimates()
        self.decomp.update_accept(self.cfg.epsilon)

    # -- pass 3: node-set update -------------------------------------------------

    def update_node_sets_pass(self, staged: StagedCandidates
                              ) -> tuple[Optional[int], bool, int]:
        """Demote, append, promote; returns (solution slot, exhausted, appended)."""
        arena = self.arena
        decomp = self.decomp
        cfg = self.cfg

        # Phase A: drop expansion slots with probability 1 - p_accept.
        e_slots = arena.slots_with_tag(TAG_EXPAND)
        if len(e_slots):
            keys = stream_keys_np(cfg.seed, self.iteration, e_slots, 0, PHASE_DEMOTE)
            u = uniforms_np(keys, 0)
            demote = u >= decomp.p_accept[arena.region[e_slots]]
            arena.tag[e_slots[demote]] = TAG_OPEN

        # Phase B: append staged candidates in order; overflow is dropped.
        solution_slot: Optional[int] = None
        exhausted = False
        appended = 0
        k = len(staged)
        if k:
            take = min(k, arena.remaining)
            if take == 0:
                exhausted = True
            else:
                goal = self.env.goal
                pos = staged.end[:take][:, list(self.model.position_dims)]
                d = pos - goal.center
                hit = np.sqrt(np.einsum("ij,ij->i", d, d)) <= goal.radius
                hits = np.flatnonzero(hit)
                n_app = int(hits[0]) + 1 if len(hits) else take
                slots = arena.append_batch(
                    staged.parent_slot[:n_app], staged.control[:n_app],
                    staged.dt[:n_app], staged.end[:n_app], staged.region[:n_app])
                decomp.make_available(staged.region[:n_app])
                appended = n_app
                if len(hits):
                    solution_slot = int(slots[-1])

        # Phase C: reactivate open slots with probability p_accept.
        o_slots = arena.slots_with_tag(TAG_OPEN)
        if len(o_slots):
            keys = stream_keys_np(cfg.seed, self.iteration, o_slots, 0, PHASE_PROMOTE)
            u = uniforms_np(keys, 0)
            promote = u < decomp.p_accept[arena.region[o_slots]]
            arena.tag[o_slots[promote]] = TAG_EXPAND

        # An empty expansion set would stall the loop; force-promote the open
        # slot with the best acceptance probability (lowest slot on ties).
        if len(arena.slots_with_tag(TAG_EXPAND)) == 0:
            o_slots = arena.slots_with_tag(TAG_OPEN)
            if len(o_slots):
                best = int(o_slots[np.argmax(decomp.p_accept[arena.region[o_slots]])])
                arena.tag[best] = TAG_EXPAND

        return solution_slot, exhausted, appended

    # -- driver -----------------------------------------------------------------

    def solve(self, trace_fn: Optional[Callable[[IterationTrace], None]] = None,
              capture_tree: bool = False) -> PlanResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        status = PlanStatus.TIMEOUT
        solution_slot: Optional[int] = None

        if in_goal(self.env.start, self.env.goal, self.model.position_dims):
            status = PlanStatus.SOLVED
            solution_slot = 0
        else:
            while (time.perf_counter() - t0) < cfg.t_max:
                self.iteration += 1
                ve = len(self.arena.slots_with_tag(TAG_EXPAND))
                branching = compute_branching_factor(
                    cfg.t_e, self.arena.size, ve, cfg.lambda_max)
                staged = self.propagate_pass(branching)
                self.update_estimates_pass()
                slot, exhausted, appended = self.update_node_sets_pass(staged)
                if trace_fn is not None:
                    trace_fn(IterationTrace(
                        iteration=self.iteration, branching=branching, ve_size=ve,
                        vo_size=len(self.arena.slots_with_tag(TAG_OPEN)),
                        attempted=staged.attempted, staged=len(staged),
                        appended=appended, tree_size=self.arena.size,
                        elapsed_s=time.perf_counter() - t0))
                if slot is not None:
                    status = PlanStatus.SOLVED
                    solution_slot = slot
                    break
                if exhausted:
                    status = PlanStatus.CAPACITY_EXHAUSTED
                    break

        trajectory: list[TrajectorySegment] = []
        duration = 0.0
        if status is PlanStatus.SOLVED and solution_slot is not None:
            trajectory = extract_trajectory(self.arena, solution_slot, self.model)
            duration = float(sum(seg.dt for seg in trajectory))
        result = PlanResult(
            status=status,
            trajectory=trajectory,
            stats=PlanStats(
                iterations=self.iteration,
                tree_size=self.arena.size,
                wall_time_ms=(time.perf_counter() - t0) * 1e3,
                solution_duration_s=duration,
            ),
        )
        if capture_tree:
            result.tree_snapshot = self.arena.snapshot()
        return result


def extract_trajectory(arena: TreeArena, slot: int,
                       model: DynamicsModel) -> list[TrajectorySegment]:
    """Re-propagate the parent chain root -> slot into materialized segments."""
    chain = []
    s = slot
    while s != 0:
        p = int(arena.parent[s])
        if p < 0 or p >= arena.size:
            raise RuntimeError(f"corrupted parent chain at slot {s}")
        chain.append(s)
        s = p
    chain.reverse()
    return [
        propagate_ode(model, arena.states[int(arena.parent[c])],
                      arena.control[c], float(arena.dt[c]))
        for c in chain
    ]


def plan(cfg: PlannerConfig, env: Environment, model: DynamicsModel,
         check_resolution: float = 0.05, backend: Optional[str] = None,
         trace_fn: Optional[Callable[[IterationTrace], None]] = None,
         capture_tree: bool = False) -> PlanResult:
    """Run one planning query end to end."""
    return KinoPax(cfg, env, model, check_resolution, backend).solve(
        trace_fn=trace_fn, capture_tree=capture_tree)
