"""Vector fields, control sampling, and fixed-step RK4 propagation.

Three benchmark systems are provided: a 6D double integrator, a 6D Dubins
airplane, and a 12D rigid-body quadcopter. All operations are pure and
deterministic; RNG streams are caller-supplied and never shared.

The scalar arithmetic here deliberately mirrors the compiled kernel
operation for operation (same evaluation order, same libm calls), so both
backends produce bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import TrajectorySegment
from .rng import RngStream

#: Integrator substep target length in seconds.
SUBSTEP_DT = 0.02
#: Minimum number of substeps per segment.
MIN_SUBSTEPS = 4

_TWO_PI = 2.0 * math.pi

# Dimension kinds used for weighted distances in the baseline planner.
KIND_POSITION = 0
KIND_VELOCITY = 1
KIND_ANGLE = 2


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = math.fmod(a + math.pi, _TWO_PI)
    if t <= 0.0:
        t += _TWO_PI
    return t - math.pi


@dataclass(frozen=True)
class DynamicsModel:
    """A control-affine-or-not system ẋ = f(x, u) with box bounds.

    ``state_lo``/``state_hi`` cover the non-position dimensions; position
    bounds come from the environment workspace via ``state_bounds``. f is
    assumed Lipschitz in both arguments (documented, not enforced).
    """

    name: str
    n: int
    control_dim: int
    control_lo: np.ndarray
    control_hi: np.ndarray
    nonposition_lo: np.ndarray  # (n,) with NaN on the 3 position dims
    nonposition_hi: np.ndarray
    deriv_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], None]
    wrap_dims: tuple[int, ...]
    dim_kinds: np.ndarray
    kernel_id: Optional[int]
    default_t_e: int
    default_cells_per_dim: int
    default_t_prop: float

    position_dims: tuple[int, int, int] = (0, 1, 2)

    def state_bounds(self, workspace_lo: np.ndarray,
                     workspace_hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full state box: workspace bounds on position dims, model defaults elsewhere."""
        lo = self.nonposition_lo.copy()
        hi = self.nonposition_hi.copy()
        lo[list(self.position_dims)] = workspace_lo
        hi[list(self.position_dims)] = workspace_hi
        return lo, hi

    def wrap_state(self, x: np.ndarray) -> None:
        for d in self.wrap_dims:
            x[d] = wrap_angle(x[d])

    def make_start(self, position, heading: float = 0.0) -> np.ndarray:
        x = np.zeros(self.n)
        x[:3] = position
        if self.name == "dubins6":
            x[3] = 1.0  # cruise speed inside the [0.5, 3] box
            x[4] = wrap_angle(heading)
        return x


def derivative(model: DynamicsModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Evaluate f(x, u). Pure; raises ValueError on dimension mismatch."""
    if len(x) != model.n:
        raise ValueError(f"state has length {len(x)}, model {model.name} needs {model.n}")
    if len(u) != model.control_dim:
        raise ValueError(
            f"control has length {len(u)}, model {model.name} needs {model.control_dim}"
        )
    out = np.empty(model.n)
    model.deriv_fn(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64), out)
    return out


def _deriv_di6(x: np.ndarray, u: np.ndarray, out: np.ndarray) -> None:
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = u[0]
    out[4] = u[1]
    out[5] = u[2]


def _deriv_dubins6(x: np.ndarray, u: np.ndarray, out: np.ndarray) -> None:
    v = x[3]
    ct = math.cos(x[4])
    st = math.sin(x[4])
    cg = math.cos(x[5])
    sg = math.sin(x[5])
    out[0] = v * ct * cg
    out[1] = v * st * cg
    out[2] = v * sg
    out[3] = u[0]
    out[4] = u[1]
    out[5] = u[2]


# Quadcopter rigid-body constants: unit mass, diagonal inertia, gravity.
QUAD_MASS = 1.0
QUAD_JX = 0.01
QUAD_JY = 0.01
QUAD_JZ = 0.02
GRAVITY = 9.81


def _deriv_quad12(x: np.ndarray, u: np.ndarray, out: np.ndarray) -> None:
    cphi = math.cos(x[6])
    sphi = math.sin(x[6])
    cth = math.cos(x[7])
    sth = math.sin(x[7])
    cpsi = math.cos(x[8])
    spsi = math.sin(x[8])
    p = x[9]
    q = x[10]
    r = x[11]
    acc = u[0] / QUAD_MASS
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = acc * (cphi * sth * cpsi + sphi * spsi)
    out[4] = acc * (cphi * sth * spsi - sphi * cpsi)
    out[5] = acc * (cphi * cth) - GRAVITY
    sw = q * sphi + r * cphi
    out[6] = p + sw * (sth / cth)
    out[7] = q * cphi - r * sphi
    out[8] = sw / cth
    out[9] = (u[1] - (QUAD_JZ - QUAD_JY) * q * r) / QUAD_JX
    out[10] = (u[2] - (QUAD_JX - QUAD_JZ) * p * r) / QUAD_JY
    out[11] = (u[3] - (QUAD_JY - QUAD_JX) * p * q) / QUAD_JZ


_NAN3 = [math.nan] * 3

DOUBLE_INTEGRATOR_6D = DynamicsModel(
    name="di6",
    n=6,
    control_dim=3,
    control_lo=np.array([-2.0, -2.0, -2.0]),
    control_hi=np.array([2.0, 2.0, 2.0]),
    nonposition_lo=np.array(_NAN3 + [-5.0, -5.0, -5.0]),
    nonposition_hi=np.array(_NAN3 + [5.0, 5.0, 5.0]),
    deriv_fn=_deriv_di6,
    wrap_dims=(),
    dim_kinds=np.array([KIND_POSITION] * 3 + [KIND_VELOCITY] * 3),
    kernel_id=0,
    default_t_e=200_000,
    default_cells_per_dim=4,
    default_t_prop=1.0,
)

DUBINS_AIRPLANE_6D = DynamicsModel(
    name="dubins6",
    n=6,
    control_dim=3,
    control_lo=np.array([-1.0, -1.0, -0.5]),
    control_hi=np.array([1.0, 1.0, 0.5]),
    nonposition_lo=np.array(_NAN3 + [0.5, -math.pi, -math.pi / 4]),
    nonposition_hi=np.array(_NAN3 + [3.0, math.pi, math.pi / 4]),
    deriv_fn=_deriv_dubins6,
    wrap_dims=(4,),
    dim_kinds=np.array([KIND_POSITION] * 3 + [KIND_VELOCITY, KIND_ANGLE, KIND_ANGLE]),
    kernel_id=1,
    default_t_e=200_000,
    default_cells_per_dim=4,
    default_t_prop=1.0,
)

QUADCOPTER_12D = DynamicsModel(
    name="quad12",
    n=12,
    control_dim=4,
    # Thrust range brackets hover (m*g = 9.81 N) so random controls keep a
    # useful fraction of samples airborne.
    control_lo=np.array([5.0, -0.05, -0.05, -0.05]),
    control_hi=np.array([15.0, 0.05, 0.05, 0.05]),
    nonposition_lo=np.array(
        _NAN3 + [-5.0] * 3 + [-1.0, -1.0, -math.pi] + [-3.0] * 3
    ),
    nonposition_hi=np.array(
        _NAN3 + [5.0] * 3 + [1.0, 1.0, math.pi] + [3.0] * 3
    ),
    deriv_fn=_deriv_quad12,
    wrap_dims=(6, 7, 8),
    dim_kinds=np.array(
        [KIND_POSITION] * 3 + [KIND_VELOCITY] * 3 + [KIND_ANGLE] * 3 + [KIND_VELOCITY] * 3
    ),
    kernel_id=2,
    default_t_e=400_000,
    default_cells_per_dim=3,
    default_t_prop=0.5,
)

_MODELS = {m.name: m for m in (DOUBLE_INTEGRATOR_6D, DUBINS_AIRPLANE_6D, QUADCOPTER_12D)}


def get_model(name: str) -> DynamicsModel:
    try:
        return _MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model '{name}' (choose from {sorted(_MODELS)})") from None


def model_names() -> list[str]:
    return sorted(_MODELS)


def default_substeps(dt: float) -> int:
    """ceil(dt / SUBSTEP_DT), floored at MIN_SUBSTEPS."""
    return max(MIN_SUBSTEPS, int(math.ceil(dt / SUBSTEP_DT)))


def propagate_ode(model: DynamicsModel, x: np.ndarray, u: np.ndarray, dt: float,
                  substeps: Optional[int] = None) -> TrajectorySegment:
    """Integrate ẋ = f(x, u) for dt seconds with fixed-step RK4.

    The control is held constant over the segment (zero-order hold). Wrapped
    angle dimensions are renormalized after every substep. Row 0 of
    ``sampled_states`` is the start state; row k the k-th substep endpoint.
    Non-finite states are recorded as-is and fail validity checking later.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if substeps is None:
        substeps = default_substeps(dt)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if len(x) != model.n or len(u) != model.control_dim:
        raise ValueError("state/control dimension mismatch")

    h = dt / substeps
    half_h = 0.5 * h
    h6 = h / 6.0
    n = model.n
    states = np.empty((substeps + 1, n))
    states[0] = x
    cur = x.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    f = model.deriv_fn
    for s in range(substeps):
        f(cur, u, k1)
        f(cur + half_h * k1, u, k2)
        f(cur + half_h * k2, u, k3)
        f(cur + h * k3, u, k4)
        cur = cur + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        model.wrap_state(cur)
        states[s + 1] = cur
    return TrajectorySegment(control=u.copy(), dt=float(dt), end_state=states[-1].copy(),
                             sampled_states=states)


def sample_control(model: DynamicsModel, rng: RngStream) -> np.ndarray:
    """Sample each control component uniformly within its bounds."""
    u = np.empty(model.control_dim)
    for i in range(model.control_dim):
        u[i] = rng.uniform_in(model.control_lo[i], model.control_hi[i])
    return u


def sample_duration(rng: RngStream, t_prop: float) -> float:
    """Sample a propagation duration uniformly from (0, t_prop]."""
    if t_prop <= 0.0:
        raise ValueError(f"t_prop must be positive, got {t_prop}")
    return rng.duration(t_prop)
