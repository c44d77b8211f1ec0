"""Shared domain types, planner configuration, and environment file I/O.

States and controls are plain float64 NumPy vectors; the classes here are
thin immutable containers around them. Environments live in JSON files (SI
units, IEEE doubles) and are fully validated at load time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

#: Hard cap on the number of grid regions a configuration may request.
REGION_COUNT_CAP = 2_000_000


class KinopaxError(Exception):
    """Base class for structured errors raised by this package."""


class EnvironmentFormatError(KinopaxError):
    """Environment file is malformed or violates an invariant."""


class EnvironmentIOError(KinopaxError):
    """Environment file cannot be read or written."""


class ConfigError(KinopaxError):
    """Planner configuration violates an invariant."""


@dataclass(frozen=True)
class GoalBall:
    """Closed workspace ball; boundary contact counts as reaching the goal."""

    center: np.ndarray  # (3,) position, meters
    radius: float

    def contains(self, position: np.ndarray) -> bool:
        d = position - self.center
        return float(np.sqrt(np.dot(d, d))) <= self.radius


@dataclass(frozen=True)
class Environment:
    """A 3D workspace with axis-aligned box obstacles, a start, and a goal.

    ``obstacles_min``/``obstacles_max`` are (k, 3) arrays; obstacles are
    closed sets, so touching a face already counts as a collision.
    ``state_lo``/``state_hi`` optionally override the model's default
    state-constraint box.
    """

    name: str
    workspace_lo: np.ndarray
    workspace_hi: np.ndarray
    obstacles_min: np.ndarray
    obstacles_max: np.ndarray
    start: np.ndarray
    goal: GoalBall
    state_lo: Optional[np.ndarray] = None
    state_hi: Optional[np.ndarray] = None

    @property
    def n_obstacles(self) -> int:
        return self.obstacles_min.shape[0]

    def position_in_collision(self, position: np.ndarray) -> bool:
        """True if the position touches or enters any obstacle box."""
        if self.n_obstacles == 0:
            return False
        inside = np.all(
            (position >= self.obstacles_min) & (position <= self.obstacles_max),
            axis=1,
        )
        return bool(inside.any())


class PlanStatus(Enum):
    SOLVED = "solved"
    TIMEOUT = "timeout"
    CAPACITY_EXHAUSTED = "capacity_exhausted"
    ERROR = "error"


@dataclass(frozen=True)
class TrajectorySegment:
    """One tree edge: a control held for dt, integrated from the parent state.

    ``sampled_states`` has one row per integrator substep endpoint, with the
    segment's start state prepended at row 0; the last row equals
    ``end_state``.
    """

    control: np.ndarray
    dt: float
    end_state: np.ndarray
    sampled_states: np.ndarray  # (substeps + 1, n)

    @property
    def start_state(self) -> np.ndarray:
        return self.sampled_states[0]


@dataclass
class PlanStats:
    iterations: int = 0
    tree_size: int = 0
    wall_time_ms: float = 0.0
    solution_duration_s: float = 0.0


@dataclass
class PlanResult:
    status: PlanStatus
    trajectory: list[TrajectorySegment] = field(default_factory=list)
    stats: PlanStats = field(default_factory=PlanStats)
    # Optional snapshot of the final tree arrays for determinism checks.
    tree_snapshot: Optional[dict] = None

    @property
    def solved(self) -> bool:
        return self.status is PlanStatus.SOLVED


@dataclass(frozen=True)
class PlannerConfig:
    """Tuning knobs of the parallel planner.

    t_e is the pre-allocated tree capacity and the main tuning parameter;
    epsilon is the floor on every region's acceptance probability; delta is
    the free-volume prior weight.
    """

    t_e: int
    lambda_max: int = 32
    t_prop: float = 1.0
    epsilon: float = 0.005
    delta: float = 1.0
    cells_per_dim: int = 4
    subcells_per_dim: int = 4
    t_max: float = 60.0
    seed: int = 0
    threads: int = 1

    def with_seed(self, seed: int) -> "PlannerConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class CheckedConfig:
    """A PlannerConfig whose invariants were verified against a model."""

    cfg: PlannerConfig
    state_dim: int
    region_count: int
    subregions_per_region: int

    @property
    def subregion_count(self) -> int:
        return self.region_count * self.subregions_per_region


def suggest_cells_per_dim(state_dim: int, cap: int = REGION_COUNT_CAP) -> int:
    """Largest per-dimension cell count whose total region count fits the cap."""
    c = max(1, int(round(cap ** (1.0 / state_dim))))
    while c > 1 and c**state_dim > cap:
        c -= 1
    while (c + 1) ** state_dim <= cap:
        c += 1
    return c


def validate_config(cfg: PlannerConfig, model) -> CheckedConfig:
    """Check every config invariant; raise ConfigError with a usable message."""
    if cfg.t_e < 1:
        raise ConfigError("t_e must be a positive integer (tree capacity)")
    if cfg.lambda_max < 1:
        raise ConfigError("lambda_max must be >= 1")
    if not (0.0 < cfg.epsilon < 1.0):
        raise ConfigError(f"epsilon must lie in (0, 1), got {cfg.epsilon}")
    if cfg.delta <= 0.0:
        raise ConfigError(f"delta must be > 0, got {cfg.delta}")
    if cfg.t_prop <= 0.0:
        raise ConfigError(f"t_prop must be > 0, got {cfg.t_prop}")
    if cfg.cells_per_dim < 1:
        raise ConfigError("cells_per_dim must be >= 1")
    if cfg.subcells_per_dim < 1:
        raise ConfigError("subcells_per_dim must be >= 1")
    if cfg.t_max < 0.0:
        raise ConfigError("t_max must be >= 0")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")

    n = model.n
    region_count = cfg.cells_per_dim**n
    if region_count > REGION_COUNT_CAP:
        suggestion = suggest_cells_per_dim(n)
        raise ConfigError(
            f"cells_per_dim={cfg.cells_per_dim} gives {region_count} regions for a "
            f"{n}D state space, exceeding the cap of {REGION_COUNT_CAP}; "
            f"try cells_per_dim={suggestion} ({suggestion**n} regions)"
        )
    subs = cfg.subcells_per_dim**3  # refinement over the 3 workspace dims
    return CheckedConfig(cfg=cfg, state_dim=n, region_count=region_count,
                         subregions_per_region=subs)


# ---------------------------------------------------------------------------
# Environment file I/O
# ---------------------------------------------------------------------------


def _as_vector(value, length: int, what: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise EnvironmentFormatError(f"{what} must be a list of {length} numbers")
    try:
        arr = np.asarray([float(v) for v in value], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise EnvironmentFormatError(f"{what} contains a non-numeric entry") from exc
    if not np.all(np.isfinite(arr)):
        raise EnvironmentFormatError(f"{what} contains a non-finite entry")
    return arr


def environment_from_dict(doc: dict) -> Environment:
    """Build and validate an Environment from its JSON document form."""
    if not isinstance(doc, dict):
        raise EnvironmentFormatError("environment document must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise EnvironmentFormatError("missing or empty 'name'")
    ws = doc.get("workspace")
    if not isinstance(ws, dict):
        raise EnvironmentFormatError("missing 'workspace' object")
    ws_lo = _as_vector(ws.get("lo"), 3, "workspace.lo")
    ws_hi = _as_vector(ws.get("hi"), 3, "workspace.hi")
    if not np.all(ws_lo < ws_hi):
        raise EnvironmentFormatError("workspace.lo must be strictly below workspace.hi")

    raw_obstacles = doc.get("obstacles", [])
    if not isinstance(raw_obstacles, list):
        raise EnvironmentFormatError("'obstacles' must be a list")
    mins, maxs = [], []
    for i, ob in enumerate(raw_obstacles):
        if not isinstance(ob, dict):
            raise EnvironmentFormatError(f"obstacle {i} must be an object")
        lo = _as_vector(ob.get("min"), 3, f"obstacle {i}.min")
        hi = _as_vector(ob.get("max"), 3, f"obstacle {i}.max")
        if not np.all(lo <= hi):
            raise EnvironmentFormatError(f"obstacle {i} has min > max")
        if np.any(lo < ws_lo) or np.any(hi > ws_hi):
            raise EnvironmentFormatError(f"obstacle {i} extends outside the workspace")
        mins.append(lo)
        maxs.append(hi)
    obstacles_min = np.array(mins, dtype=np.float64).reshape(len(mins), 3)
    obstacles_max = np.array(maxs, dtype=np.float64).reshape(len(maxs), 3)

    start_raw = doc.get("start")
    if not isinstance(start_raw, (list, tuple)) or len(start_raw) < 3:
        raise EnvironmentFormatError("'start' must be a state vector of length >= 3")
    start = _as_vector(start_raw, len(start_raw), "start")

    goal_doc = doc.get("goal")
    if not isinstance(goal_doc, dict):
        raise EnvironmentFormatError("missing 'goal' object")
    center = _as_vector(goal_doc.get("center"), 3, "goal.center")
    try:
        radius = float(goal_doc.get("radius"))
    except (TypeError, ValueError) as exc:
        raise EnvironmentFormatError("goal.radius must be a number") from exc
    if not math.isfinite(radius) or radius <= 0.0:
        raise EnvironmentFormatError("goal.radius must be a positive finite number")
    # Ball must intersect the workspace: distance from center to the box <= radius.
    gap = np.maximum(ws_lo - center, 0.0) + np.maximum(center - ws_hi, 0.0)
    if float(np.sqrt(np.dot(gap, gap))) > radius:
        raise EnvironmentFormatError("goal ball does not intersect the workspace")

    state_lo = state_hi = None
    if "state_bounds" in doc and doc["state_bounds"] is not None:
        sb = doc["state_bounds"]
        if not isinstance(sb, dict):
            raise EnvironmentFormatError("'state_bounds' must be an object")
        state_lo = _as_vector(sb.get("lo"), len(start), "state_bounds.lo")
        state_hi = _as_vector(sb.get("hi"), len(start), "state_bounds.hi")
        if not np.all(state_lo < state_hi):
            raise EnvironmentFormatError("state_bounds.lo must be strictly below .hi")

    env = Environment(
        name=name,
        workspace_lo=ws_lo,
        workspace_hi=ws_hi,
        obstacles_min=obstacles_min,
        obstacles_max=obstacles_max,
        start=start,
        goal=GoalBall(center=center, radius=radius),
        state_lo=state_lo,
        state_hi=state_hi,
    )

    pos = start[:3]
    if np.any(pos < ws_lo) or np.any(pos > ws_hi):
        raise EnvironmentFormatError("start position lies outside the workspace")
    if env.position_in_collision(pos):
        raise EnvironmentFormatError("start position collides with an obstacle")
    return env


def environment_to_dict(env: Environment) -> dict:
    doc = {
        "name": env.name,
        "workspace": {"lo": env.workspace_lo.tolist(), "hi": env.workspace_hi.tolist()},
        "obstacles": [
            {"min": env.obstacles_min[i].tolist(), "max": env.obstacles_max[i].tolist()}
            for i in range(env.n_obstacles)
        ],
        "start": env.start.tolist(),
        "goal": {"center": env.goal.center.tolist(), "radius": env.goal.radius},
    }
    if env.state_lo is not None:
        doc["state_bounds"] = {"lo": env.state_lo.tolist(), "hi": env.state_hi.tolist()}
    return doc


def load_environment(path) -> Environment:
    """Load and validate an environment JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise EnvironmentIOError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EnvironmentFormatError(f"{path} is not valid JSON: {exc}") from exc
    return environment_from_dict(doc)


def save_environment(env: Environment, path) -> None:
    """Write an environment file that round-trips componentwise exactly."""
    Path(path).write_text(json.dumps(environment_to_dict(env), indent=2) + "\n")
