import numpy as np
import pytest

from kinopax import PlannerConfig, gen_environment, get_model
from kinopax.core import Environment, GoalBall


@pytest.fixture(scope="session")
def di6():
    return get_model("di6")


@pytest.fixture(scope="session")
def dubins6():
    return get_model("dubins6")


@pytest.fixture(scope="session")
def quad12():
    return get_model("quad12")


def make_empty_env(n: int = 6, goal_center=(9.0, 9.0, 9.0), radius=1.3,
                   start_pos=(1.0, 1.0, 1.0)) -> Environment:
    """Obstacle-free 10 m cube with a start at rest."""
    start = np.zeros(n)
    start[:3] = start_pos
    return Environment(
        name="empty",
        workspace_lo=np.zeros(3),
        workspace_hi=np.full(3, 10.0),
        obstacles_min=np.zeros((0, 3)),
        obstacles_max=np.zeros((0, 3)),
        start=start,
        goal=GoalBall(center=np.asarray(goal_center, dtype=float), radius=radius),
    )


@pytest.fixture
def empty_env6():
    return make_empty_env(6)


@pytest.fixture(scope="session")
def forest_di6():
    return gen_environment("forest", "di6", seed=0)


def small_cfg(model, t_e=20000, seed=1, t_max=60.0, threads=1) -> PlannerConfig:
    return PlannerConfig(
        t_e=t_e,
        t_prop=model.default_t_prop,
        cells_per_dim=model.default_cells_per_dim,
        seed=seed,
        t_max=t_max,
        threads=threads,
    )
