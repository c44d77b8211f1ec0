"""Parallel kinodynamic sampling-based motion planning.

A tree of trajectory segments is grown by three barrier-separated bulk
passes per iteration; a uniform state-space grid with per-region
exploration metrics guides which samples join the tree and which nodes keep
expanding. The hot propagation kernel runs either compiled (Cython/OpenMP)
or in pure Python, selected at import.
"""

from .backend import available_backends, compiled_available, get_backend
from .core import (ConfigError, Environment, EnvironmentFormatError,
                   EnvironmentIOError, GoalBall, KinopaxError, PlannerConfig,
                   PlanResult, PlanStats, PlanStatus, TrajectorySegment,
                   load_environment, save_environment, validate_config)
from .decomposition import Decomposition, RegionRecord
from .dynamics import (DOUBLE_INTEGRATOR_6D, DUBINS_AIRPLANE_6D,
                       QUADCOPTER_12D, DynamicsModel, derivative, get_model,
                       model_names, propagate_ode, sample_control,
                       sample_duration)
from .envgen import GenerationError, gen_environment
from .planner import KinoPax, compute_branching_factor, extract_trajectory, plan
from .rng import RngStream
from .rrt import nearest, rrt_plan
from .validity import ValidityChecker, in_goal

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Decomposition", "DynamicsModel", "Environment",
    "EnvironmentFormatError", "EnvironmentIOError", "GenerationError",
    "GoalBall", "KinoPax", "KinopaxError", "PlannerConfig", "PlanResult",
    "PlanStats", "PlanStatus", "RegionRecord", "RngStream",
    "TrajectorySegment", "ValidityChecker", "available_backends",
    "compiled_available", "compute_branching_factor", "derivative",
    "extract_trajectory", "gen_environment", "get_backend", "get_model",
    "in_goal", "load_environment", "model_names", "nearest", "plan",
    "propagate_ode", "rrt_plan", "sample_control", "sample_duration",
    "save_environment", "validate_config",
    "DOUBLE_INTEGRATOR_6D", "DUBINS_AIRPLANE_6D", "QUADCOPTER_12D",
]
