"""Backend selection for the hot propagation kernel.

Two interchangeable implementations exist: a compiled Cython/OpenMP kernel
and a pure-Python/NumPy fallback. The compiled one is chosen at import when
available (it is typically 100-1000x faster); set KINOPAX_BACKEND=python or
=compiled to force a choice. Models without a kernel id always run on the
Python backend.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _purepy
from .core import ConfigError
from .dynamics import DynamicsModel

try:
    from . import _kernel
except ImportError:  # pragma: no cover - depends on the build environment
    _kernel = None


@dataclass(frozen=True)
class PlanContext:
    """Static per-run arrays shared by every propagation batch."""

    model: DynamicsModel
    seed: int
    t_prop: float
    state_lo: np.ndarray
    state_hi: np.ndarray
    obs_min: np.ndarray
    obs_max: np.ndarray
    check_res: float
    grid_lo: np.ndarray
    grid_width: np.ndarray
    grid_cells: np.ndarray
    grid_strides: np.ndarray
    subcells: int
    threads: int


@dataclass
class Batch:
    """Per-item results of one propagation batch (item = slot x extension)."""

    valid: np.ndarray     # uint8
    region: np.ndarray    # int64, -1 when the end state is non-finite
    sub: np.ndarray       # int64, meaningful only where valid
    end: np.ndarray       # (items, n) float64
    control: np.ndarray   # (items, nu) float64
    dt: np.ndarray        # float64
    accept_u: np.ndarray  # float64 acceptance-gate draws

    @property
    def items(self) -> int:
        return len(self.valid)


class PythonBackend:
    name = "python"

    def propagate_batch(self, ctx: PlanContext, states: np.ndarray,
                        e_slots: np.ndarray, lam: int, iteration: int) -> Batch:
        out = _purepy.propagate_batch(
            states, e_slots, lam, ctx.seed, iteration, ctx.model,
            ctx.t_prop, ctx.state_lo, ctx.state_hi, ctx.obs_min, ctx.obs_max,
            ctx.check_res, ctx.grid_lo, ctx.grid_width, ctx.grid_cells,
            ctx.grid_strides, ctx.subcells, ctx.threads)
        return Batch(**out)


class CompiledBackend:
    name = "compiled"

    def propagate_batch(self, ctx: PlanContext, states: np.ndarray,
                        e_slots: np.ndarray, lam: int, iteration: int) -> Batch:
        out = _kernel.propagate_batch(
            states, np.ascontiguousarray(e_slots, dtype=np.int64), lam,
            ctx.seed & 0xFFFFFFFFFFFFFFFF, iteration, ctx.model.kernel_id,
            ctx.model.control_lo, ctx.model.control_hi, ctx.t_prop,
            ctx.state_lo, ctx.state_hi, ctx.obs_min, ctx.obs_max,
            ctx.check_res, ctx.grid_lo, ctx.grid_width, ctx.grid_cells,
            ctx.grid_strides, ctx.subcells, ctx.threads)
        return Batch(**out)


def compiled_available() -> bool:
    return _kernel is not None


def available_backends() -> list[str]:
    names = ["python"]
    if compiled_available():
        names.insert(0, "compiled")
    return names


def get_backend(name: str | None = None, model: DynamicsModel | None = None):
    """Resolve a backend by name, env override, or model capability."""
    if name is None:
        name = os.environ.get("KINOPAX_BACKEND")
    if name is None:
        if compiled_available() and (model is None or model.kernel_id is not None):
            name = "compiled"
        else:
            name = "python"
    if name == "compiled":
        if not compiled_available():
            raise ConfigError("compiled backend requested but the extension is not built")
        if model is not None and model.kernel_id is None:
            raise ConfigError(
                f"model '{model.name}' has no compiled kernel; use the python backend"
            )
        return CompiledBackend()
    if name == "python":
        return PythonBackend()
    raise ConfigError(f"unknown backend '{name}' (choose from {available_backends()})")
