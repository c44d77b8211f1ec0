"""State-constraint and collision checking for states and trajectory segments.

Collision checking is discretized: between integrator substep endpoints,
states are linearly interpolated so consecutive checked positions are at
most ``check_resolution`` apart. The interpolation count is rounded up to a
power of two, so refining the resolution only ever adds check points; a
segment can never flip from invalid to valid under a finer resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Environment, GoalBall, TrajectorySegment
from .dynamics import DynamicsModel


def in_goal(x: np.ndarray, goal: GoalBall, position_dims=(0, 1, 2)) -> bool:
    """True iff the workspace projection of x lies in the closed goal ball."""
    return goal.contains(np.asarray(x)[list(position_dims)])


def densify_steps(dist: float, resolution: float) -> int:
    """Smallest power-of-two interval count with spacing <= resolution."""
    m = 1
    while m * resolution < dist:
        m <<= 1
    return m


@dataclass
class ValidityChecker:
    """Checks states and segments against one environment and model."""

    environment: Environment
    model: DynamicsModel
    check_resolution: float = 0.05

    def __post_init__(self) -> None:
        if self.check_resolution <= 0.0:
            raise ValueError("check_resolution must be > 0")
        env = self.environment
        lo, hi = self.model.state_bounds(env.workspace_lo, env.workspace_hi)
        if env.state_lo is not None:
            lo, hi = env.state_lo.copy(), env.state_hi.copy()
            pos = list(self.model.position_dims)
            # Position bounds can only tighten the workspace, never escape it.
            lo[pos] = np.maximum(lo[pos], env.workspace_lo)
            hi[pos] = np.minimum(hi[pos], env.workspace_hi)
        self.state_lo = lo
        self.state_hi = hi

    def position_free(self, position: np.ndarray) -> bool:
        return not self.environment.position_in_collision(position)

    def state_valid(self, x: np.ndarray) -> bool:
        """Box constraints, workspace containment, and obstacle clearance."""
        x = np.asarray(x)
        if x.shape != (self.model.n,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.model.n},)")
        if not np.all(np.isfinite(x)):
            return False
        if np.any(x < self.state_lo) or np.any(x > self.state_hi):
            return False
        return self.position_free(x[list(self.model.position_dims)])

    def state_valid_batch(self, states: np.ndarray) -> np.ndarray:
        """Vectorized state_valid over the rows of a (m, n) array."""
        states = np.asarray(states)
        ok = np.all(np.isfinite(states), axis=1)
        ok &= np.all((states >= self.state_lo) & (states <= self.state_hi), axis=1)
        env = self.environment
        if env.n_obstacles:
            pos = states[:, list(self.model.position_dims)]
            hit = np.zeros(len(states), dtype=bool)
            for k in range(env.n_obstacles):
                hit |= np.all(
                    (pos >= env.obstacles_min[k]) & (pos <= env.obstacles_max[k]), axis=1
                )
            ok &= ~hit
        return ok

    def segment_valid(self, seg: TrajectorySegment) -> bool:
        """Check every substep endpoint plus densified interpolants."""
        states = seg.sampled_states
        if len(states) == 0:
            raise ValueError("segment has no sampled states")
        if not np.all(self.state_valid_batch(states)):
            return False
        pos_dims = list(self.model.position_dims)
        res = self.check_resolution
        interp = []
        for i in range(len(states) - 1):
            a, b = states[i], states[i + 1]
            d = b[pos_dims] - a[pos_dims]
            dist = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
            m = densify_steps(dist, res)
            if m > 1:
                t = np.arange(1, m, dtype=np.float64) / m
                interp.append(a + t[:, None] * (b - a))
        if interp:
            return bool(np.all(self.state_valid_batch(np.concatenate(interp))))
        return True

    def trajectory_valid(self, segments: list[TrajectorySegment],
                         start: np.ndarray | None = None) -> bool:
        """Full-solution check: chaining, per-segment validity, goal entry."""
        if start is not None:
            if not self.state_valid(start):
                return False
            if not segments:
                return in_goal(start, self.environment.goal, self.model.position_dims)
            if not np.allclose(segments[0].start_state, start, atol=1e-9):
                return False
        for prev, cur in zip(segments, segments[1:]):
            if not np.allclose(prev.end_state, cur.start_state, atol=1e-9):
                return False
        for seg in segments:
            if not self.segment_valid(seg):
                return False
        return in_goal(segments[-1].end_state, self.environment.goal,
                       self.model.position_dims)
