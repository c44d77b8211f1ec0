"""Procedural benchmark scenes: forest, narrow passage, building.

All scenes live in a 10 m cube. Geometry depends only on (kind, seed,
params); the start state additionally depends on the model (dimension and
initial heading), so one seed reproduces the same scene for every system.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Environment, KinopaxError, environment_from_dict, save_environment
from .dynamics import DynamicsModel, get_model
from .rng import PHASE_ENVGEN, RngStream

WORKSPACE_LO = (0.0, 0.0, 0.0)
WORKSPACE_HI = (10.0, 10.0, 10.0)

ENV_KINDS = ("forest", "narrow", "building")


class GenerationError(KinopaxError):
    """Scene parameters produce an unusable environment."""


def _box(lo, hi) -> dict:
    return {"min": [float(v) for v in lo], "max": [float(v) for v in hi]}


def _forest_obstacles(seed: int, pillars: int, pillar_size: float,
                      start_xy, goal_xy, goal_radius: float) -> list[dict]:
    rng = RngStream(seed, phase=PHASE_ENVGEN)
    half = pillar_size / 2.0
    boxes = []
    attempts = 0
    while len(boxes) < pillars:
        attempts += 1
        if attempts > 200 * max(1, pillars):
            raise GenerationError("could not place forest pillars; relax parameters")
        cx = rng.uniform_in(1.0 + half, 9.0 - half)
        cy = rng.uniform_in(1.0 + half, 9.0 - half)
        # Keep the start column and the goal column clear.
        if max(abs(cx - start_xy[0]), abs(cy - start_xy[1])) < half + 0.8:
            continue
        if math.hypot(cx - goal_xy[0], cy - goal_xy[1]) < half + goal_radius + 0.4:
            continue
        if any(
            abs(cx - b["min"][0] - half) < pillar_size + 0.2
            and abs(cy - b["min"][1] - half) < pillar_size + 0.2
            for b in boxes
        ):
            continue
        boxes.append(_box((cx - half, cy - half, 0.0), (cx + half, cy + half, 10.0)))
    return boxes


def _narrow_obstacles(gap: float, thickness: float, gap_floor: float) -> list[dict]:
    """Two overlapping wall slabs whose complement is one off-axis opening.

    The first wall spans all heights up to y = 10 - gap; the second covers
    the remaining y band below z = gap_floor. The free passage is the
    gap-wide, (10 - gap_floor)-tall notch near the far top corner, well away
    from the straight start-goal line.
    """
    if gap <= 0.0:
        raise GenerationError("narrow passage gap must be > 0")
    if gap >= 10.0:
        raise GenerationError("narrow passage gap must be smaller than the workspace")
    if not (0.0 < gap_floor < 10.0):
        raise GenerationError("narrow passage gap_floor must lie inside the workspace")
    x0, x1 = 5.0 - thickness / 2.0, 5.0 + thickness / 2.0
    return [
        _box((x0, 0.0, 0.0), (x1, 10.0 - gap, 10.0)),
        _box((x0, 10.0 - gap, 0.0), (x1, 10.0, gap_floor)),
    ]


def _wall_with_doors(thin_axis: int, span_axis: int, thin_lo: float, thin_hi: float,
                     doors: list[tuple[float, float, float, float]]) -> list[dict]:
    """Full 10 m wall perpendicular to thin_axis, minus rectangular doorways.

    Each door is (span_lo, span_hi, z_lo, z_hi); doors must not overlap in
    the span axis. Returns the wall as a set of boxes.
    """
    boxes = []
    doors = sorted(doors)
    cursor = 0.0

    def add(span_lo, span_hi, z_lo, z_hi):
        if span_hi - span_lo <= 0.0 or z_hi - z_lo <= 0.0:
            return
        lo = [0.0, 0.0, z_lo]
        hi = [0.0, 0.0, z_hi]
        lo[thin_axis], hi[thin_axis] = thin_lo, thin_hi
        lo[span_axis], hi[span_axis] = span_lo, span_hi
        boxes.append(_box(lo, hi))

    for span_lo, span_hi, z_lo, z_hi in doors:
        add(cursor, span_lo, 0.0, 10.0)
        add(span_lo, span_hi, 0.0, z_lo)       # below the doorway
        add(span_lo, span_hi, z_hi, 10.0)       # above the doorway
        cursor = span_hi
    add(cursor, 10.0, 0.0, 10.0)
    return boxes


def _building_obstacles(thickness: float) -> list[dict]:
    t0, t1 = 5.0 - thickness / 2.0, 5.0 + thickness / 2.0
    # Wall splitting x: doorways in the low-y and high-y rooms.
    boxes = _wall_with_doors(0, 1, t0, t1,
                             [(1.4, 3.8, 0.8, 4.0), (6.2, 8.6, 5.0, 8.4)])
    # Wall splitting y: doorways in the low-x and high-x rooms.
    boxes += _wall_with_doors(1, 0, t0, t1,
                              [(1.4, 3.8, 0.8, 4.0), (6.2, 8.6, 5.0, 8.4)])
    return boxes


_SCENES = {
    "forest": {"start": (1.0, 1.0, 1.0), "goal": (9.0, 9.0, 9.0), "radius": 1.3},
    "narrow": {"start": (1.5, 5.0, 5.0), "goal": (8.5, 5.0, 5.0), "radius": 1.3},
    "building": {"start": (1.2, 1.2, 1.2), "goal": (8.8, 8.8, 8.8), "radius": 1.3},
}


def gen_environment(kind: str, model: DynamicsModel | str, seed: int = 0,
                    path=None, pillars: int = 14, pillar_size: float = 0.6,
                    gap: float = 1.0, gap_floor: float = 6.5,
                    wall_thickness: float = 0.5) -> Environment:
    """Generate a benchmark scene; optionally write it to a JSON file."""
    if isinstance(model, str):
        model = get_model(model)
    if kind not in _SCENES:
        raise GenerationError(f"unknown environment kind '{kind}' (choose from {ENV_KINDS})")
    scene = _SCENES[kind]
    start_pos = np.array(scene["start"])
    goal_pos = np.array(scene["goal"])

    if kind == "forest":
        obstacles = _forest_obstacles(seed, pillars, pillar_size,
                                      start_pos[:2], goal_pos[:2], scene["radius"])
    elif kind == "narrow":
        obstacles = _narrow_obstacles(gap, wall_thickness, gap_floor)
    else:
        obstacles = _building_obstacles(wall_thickness)

    heading = math.atan2(goal_pos[1] - start_pos[1], goal_pos[0] - start_pos[0])
    start = model.make_start(start_pos, heading=heading)
    doc = {
        "name": f"{kind}-{model.name}-s{seed}",
        "workspace": {"lo": list(WORKSPACE_LO), "hi": list(WORKSPACE_HI)},
        "obstacles": obstacles,
        "start": start.tolist(),
        "goal": {"center": goal_pos.tolist(), "radius": scene["radius"]},
    }
    try:
        env = environment_from_dict(doc)
    except KinopaxError as exc:
        raise GenerationError(f"generated scene is invalid: {exc}") from exc
    if path is not None:
        save_environment(env, path)
    return env
