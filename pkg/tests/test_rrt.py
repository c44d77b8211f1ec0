"""Baseline kinodynamic RRT and its nearest-neighbor metric."""

import math

import numpy as np
import pytest

from kinopax import PlanStatus, ValidityChecker, get_model, rrt_plan
from kinopax.rrt import distance_weights, nearest

from conftest import make_empty_env, small_cfg


class TestNearest:
    def test_single_node(self, di6):
        w = distance_weights(di6)
        assert nearest(np.zeros((1, 6)), np.ones(6), w, di6.wrap_dims) == 0

    def test_exact_match_wins(self, di6):
        w = distance_weights(di6)
        states = np.array([[0, 0, 0, 0, 0, 0], [1, 2, 3, 0, 0, 0],
                           [4, 4, 4, 0, 0, 0.0]])
        assert nearest(states, np.array([1, 2, 3, 0, 0, 0.0]), w, ()) == 1

    def test_three_node_line(self, di6):
        w = distance_weights(di6)
        states = np.array([[0, 0, 0, 0, 0, 0], [5, 0, 0, 0, 0, 0],
                           [10, 0, 0, 0, 0, 0.0]])
        q = np.array([5.6, 0, 0, 0, 0, 0.0])
        assert nearest(states, q, w, ()) == 1

    def test_tie_breaks_to_lowest_index(self, di6):
        w = distance_weights(di6)
        states = np.array([[1, 0, 0, 0, 0, 0], [1, 0, 0, 0, 0, 0],
                           [9, 9, 9, 0, 0, 0.0]])
        assert nearest(states, np.array([0, 0, 0, 0, 0, 0.0]), w, ()) == 0

    def test_wrapped_heading_difference(self, dubins6):
        w = distance_weights(dubins6)
        # Headings 3.1 and -3.1 are 0.083 rad apart through the wrap, far
        # apart naively; position identical.
        states = np.array([[5, 5, 5, 1, 3.1, 0], [5, 5, 5, 1, 0.0, 0]])
        q = np.array([5, 5, 5, 1, -3.1, 0.0])
        assert nearest(states, q, w, dubins6.wrap_dims) == 0

    def test_weighted_metric_measures_kinds(self, quad12):
        w = distance_weights(quad12)
        assert w[:3].tolist() == [1.0] * 3
        assert w[3:6].tolist() == [0.1] * 3
        assert w[6:9].tolist() == [0.3] * 3

    def test_agrees_with_explicit_scan(self, dubins6):
        # nearest *is* a brute-force scan; this guards future optimization.
        rng = np.random.default_rng(0)
        w = distance_weights(dubins6)
        states = rng.uniform(-1, 1, size=(200, 6))
        for _ in range(50):
            q = rng.uniform(-1, 1, size=6)
            best, best_d = 0, math.inf
            for i, s in enumerate(states):
                d = s - q
                for dim in dubins6.wrap_dims:
                    d[dim] = (d[dim] + math.pi) % (2 * math.pi) - math.pi
                dist = float(np.sum(w * d * d))
                if dist < best_d - 1e-15:
                    best, best_d = i, dist
            assert nearest(states.copy(), q, w, dubins6.wrap_dims) == best

    def test_empty_tree_rejected(self, di6):
        with pytest.raises(ValueError):
            nearest(np.zeros((0, 6)), np.zeros(6), distance_weights(di6),
                    di6.wrap_dims)


class TestRrtPlan:
    def test_start_in_goal(self, di6):
        env = make_empty_env(6, goal_center=(1.0, 1.0, 1.0), radius=0.5)
        res = rrt_plan(small_cfg(di6, t_e=100), env, di6)
        assert res.status is PlanStatus.SOLVED
        assert res.trajectory == []

    def test_empty_workspace_solves_and_revalidates(self, di6, empty_env6):
        res = rrt_plan(small_cfg(di6, t_e=20000, seed=2), empty_env6, di6)
        assert res.status is PlanStatus.SOLVED
        fine = ValidityChecker(empty_env6, di6, check_resolution=0.005)
        assert fine.trajectory_valid(res.trajectory, start=empty_env6.start)

    def test_unreachable_goal_times_out(self, di6):
        from kinopax.core import Environment, GoalBall
        env = Environment(
            name="sealed", workspace_lo=np.zeros(3), workspace_hi=np.full(3, 10.0),
            obstacles_min=np.array([[7.5, 7.5, 7.5]]),
            obstacles_max=np.array([[10.0, 10.0, 10.0]]),
            start=np.array([1, 1, 1, 0, 0, 0.0]),
            goal=GoalBall(center=np.array([9.0, 9.0, 9.0]), radius=0.5))
        res = rrt_plan(small_cfg(di6, t_e=100000, seed=3, t_max=0.4), env, di6)
        assert res.status is PlanStatus.TIMEOUT

    def test_deterministic_when_serial(self, di6, empty_env6):
        cfg = small_cfg(di6, t_e=5000, seed=4)
        a = rrt_plan(cfg, empty_env6, di6)
        b = rrt_plan(cfg, empty_env6, di6)
        assert a.stats.iterations == b.stats.iterations
        assert a.stats.tree_size == b.stats.tree_size
        assert len(a.trajectory) == len(b.trajectory)
        for sa, sb in zip(a.trajectory, b.trajectory):
            assert np.array_equal(sa.end_state, sb.end_state)

    def test_node_cap_reported(self, di6):
        env = make_empty_env(6, goal_center=(9.0, 9.0, 9.0), radius=0.2)
        res = rrt_plan(small_cfg(di6, t_e=25, seed=5), env, di6)
        assert res.status in (PlanStatus.CAPACITY_EXHAUSTED, PlanStatus.TIMEOUT)

    def test_racing_instances_return_a_solution(self, di6, empty_env6):
        cfg = small_cfg(di6, t_e=20000, seed=6, threads=3)
        res = rrt_plan(cfg, empty_env6, di6)
        assert res.status is PlanStatus.SOLVED
