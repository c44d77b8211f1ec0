"""Planner passes, driver states, and structural invariants."""

import numpy as np
import pytest

from kinopax import (PlannerConfig, PlanStatus, ValidityChecker, get_model,
                     plan, propagate_ode)
from kinopax.core import ConfigError, Environment, GoalBall
from kinopax.planner import (TAG_EMPTY, TAG_EXPAND, TAG_OPEN, KinoPax,
                             compute_branching_factor, extract_trajectory)
from kinopax.rng import PHASE_DEMOTE, PHASE_PROMOTE, stream_keys_np, uniforms_np

from conftest import make_empty_env, small_cfg


class TestBranchingFactor:
    def test_fresh_tree_saturates_at_lambda_max(self):
        assert compute_branching_factor(200_000, 1, 1, 32) == 32

    def test_mid_growth_quotient(self):
        assert compute_branching_factor(10, 4, 3, 32) == 2

    def test_clamped_to_one_at_capacity(self):
        assert compute_branching_factor(100, 100, 10, 32) == 1

    def test_rejects_empty_expansion_set(self):
        with pytest.raises(ValueError):
            compute_branching_factor(100, 10, 0, 32)


def pinned_velocity_env(n=6):
    """State bounds that invalidate any motion (velocity box ~ degenerate)."""
    start = np.zeros(n)
    start[:3] = 5.0
    eps = 1e-12
    lo = np.array([0, 0, 0, -eps, -eps, -eps])
    hi = np.array([10, 10, 10, eps, eps, eps])
    return Environment(
        name="pinned", workspace_lo=np.zeros(3), workspace_hi=np.full(3, 10.0),
        obstacles_min=np.zeros((0, 3)), obstacles_max=np.zeros((0, 3)),
        start=start, goal=GoalBall(center=np.array([9.0, 9.0, 9.0]), radius=0.5),
        state_lo=lo, state_hi=hi)


class TestPropagatePass:
    def test_root_attempts_exactly_lambda(self, di6, empty_env6):
        eng = KinoPax(small_cfg(di6, t_e=100), empty_env6, di6)
        eng.iteration = 1
        staged = eng.propagate_pass(4)
        assert staged.attempted == 4

    def test_fully_blocked_root_counts_invalid(self, di6):
        eng = KinoPax(small_cfg(di6, t_e=100), pinned_velocity_env(), di6)
        eng.iteration = 1
        staged = eng.propagate_pass(8)
        assert len(staged) == 0
        assert int(eng.decomp.n_invalid.sum()) == 8
        assert int(eng.decomp.n_valid.sum()) == 0

    def test_gate_matches_hand_replay(self, di6, forest_di6):
        # Replay the acceptance gate serially from the raw batch and the
        # decomposition state captured before the pass.
        eng = KinoPax(small_cfg(di6, t_e=4000, seed=9), forest_di6, di6)
        for it in range(1, 5):
            eng.iteration = it
            e_slots = eng.arena.slots_with_tag(TAG_EXPAND)
            visited_before = eng.decomp.visited.copy()
            p_before = eng.decomp.p_accept.copy()
            batch = eng.backend.propagate_batch(eng.ctx, eng.arena.states,
                                                e_slots, 4, it)
            staged = eng.propagate_pass(4)  # identical draws: same keys
            expect = []
            seen = set()
            for w in range(batch.items):
                if not batch.valid[w]:
                    continue
                pair = (int(batch.region[w]), int(batch.sub[w]))
                bit = pair[0] * eng.decomp.subs_per_region + pair[1]
                first = not visited_before[bit] and pair not in seen
                seen.add(pair)
                if first or batch.accept_u[w] < p_before[batch.region[w]]:
                    expect.append(w)
            assert len(staged) == len(expect)
            assert np.array_equal(staged.parent_slot,
                                  e_slots[np.array(expect, dtype=int) // 4])
            assert np.array_equal(staged.dt, batch.dt[expect])
            eng.update_estimates_pass()
            eng.update_node_sets_pass(staged)

    def test_single_fresh_subregion_stages_first_then_gates(self, di6):
        # All extensions land in one fresh sub-region: item 0 is staged by
        # first-visit; later ones pass only the probability gate.
        eng = KinoPax(small_cfg(di6, t_e=100, seed=4), make_empty_env(), di6)
        eng.iteration = 1
        e_slots = eng.arena.slots_with_tag(TAG_EXPAND)
        batch = eng.backend.propagate_batch(eng.ctx, eng.arena.states, e_slots, 6, 1)
        regions = np.full(batch.items, int(batch.region[0]), dtype=np.int64)
        subs = np.full(batch.items, int(batch.sub[0]), dtype=np.int64)
        first = eng.decomp.first_visits(regions, subs)
        assert first.tolist() == [True] + [False] * (batch.items - 1)


class TestUpdateNodeSets:
    def test_goal_candidate_returns_solution(self, di6):
        env = make_empty_env(6, goal_center=(3.5, 1.0, 1.0), radius=1.0)
        cfg = small_cfg(di6, t_e=1000, seed=1)
        res = plan(cfg, env, di6)
        assert res.status is PlanStatus.SOLVED
        assert len(res.trajectory) >= 1
        assert env.goal.contains(res.trajectory[-1].end_state[:3])

    def test_p_accept_one_keeps_everything_expanding(self, di6, empty_env6):
        eng = KinoPax(small_cfg(di6, t_e=1000, seed=2), empty_env6, di6)
        eng.iteration = 1
        staged = eng.propagate_pass(8)
        eng.decomp.p_accept[:] = 1.0  # forced: no demotion, full promotion
        eng.arena.tag[0] = TAG_OPEN   # an open slot that must be promoted
        eng.update_node_sets_pass(staged)
        assert len(eng.arena.slots_with_tag(TAG_OPEN)) == 0

    def test_demotion_matches_recorded_uniforms(self, di6, empty_env6):
        cfg = small_cfg(di6, t_e=1000, seed=3)
        eng = KinoPax(cfg, empty_env6, di6)
        eng.iteration = 1
        staged = eng.propagate_pass(8)
        eng.update_estimates_pass()
        eng.decomp.p_accept[eng.decomp.avail_ids] = 0.25
        e_slots = eng.arena.slots_with_tag(TAG_EXPAND)
        keys = stream_keys_np(cfg.seed, 1, e_slots, 0, PHASE_DEMOTE)
        u = uniforms_np(keys, 0)
        expect_demoted = set(e_slots[u >= 0.25].tolist())
        # Promotions would re-activate demoted slots; suppress by zeroing
        # the promote draws' success via p_accept after Phase A is what the
        # pass reads, so instead replay Phase C as well.
        eng.update_node_sets_pass(staged)
        o_slots = set(eng.arena.slots_with_tag(TAG_OPEN).tolist())
        promote_keys = stream_keys_np(cfg.seed, 1, np.array(sorted(expect_demoted),
                                                            dtype=np.int64),
                                      0, PHASE_PROMOTE)
        pu = uniforms_np(promote_keys, 0)
        expect_open = {s for s, up in zip(sorted(expect_demoted), pu)
                       if up >= 0.25}
        assert o_slots == expect_open

    def test_capacity_exhaustion_signalled(self, di6):
        env = make_empty_env(6, goal_center=(9.0, 9.0, 9.0), radius=0.3)
        res = plan(small_cfg(di6, t_e=40, seed=5), env, di6)
        assert res.status is PlanStatus.CAPACITY_EXHAUSTED
        assert res.stats.tree_size <= 40


class TestPlan:
    def test_start_inside_goal(self, di6):
        env = make_empty_env(6, goal_center=(1.0, 1.0, 1.0), radius=0.5)
        res = plan(small_cfg(di6, t_e=100), env, di6)
        assert res.status is PlanStatus.SOLVED
        assert res.trajectory == []
        assert res.stats.iterations == 0

    def test_empty_workspace_solves_and_revalidates(self, di6, empty_env6):
        cfg = small_cfg(di6, t_e=20000, seed=6)
        res = plan(cfg, env=empty_env6, model=di6)
        assert res.status is PlanStatus.SOLVED
        fine = ValidityChecker(empty_env6, di6, check_resolution=0.005)
        assert fine.trajectory_valid(res.trajectory, start=empty_env6.start)

    def test_enclosed_goal_never_solves(self, di6):
        env = Environment(
            name="sealed", workspace_lo=np.zeros(3), workspace_hi=np.full(3, 10.0),
            obstacles_min=np.array([[7.5, 7.5, 7.5]]),
            obstacles_max=np.array([[10.0, 10.0, 10.0]]),
            start=np.array([1, 1, 1, 0, 0, 0.0]),
            goal=GoalBall(center=np.array([9.0, 9.0, 9.0]), radius=0.5))
        res = plan(small_cfg(di6, t_e=5000, seed=7, t_max=0.5), env, di6)
        assert res.status in (PlanStatus.TIMEOUT, PlanStatus.CAPACITY_EXHAUSTED)

    def test_invalid_start_rejected(self, di6):
        env = make_empty_env(6, start_pos=(1, 1, 1))
        bad = Environment(**{**env.__dict__, "start": np.array([1, 1, 1, 99, 0, 0.0])})
        with pytest.raises(ConfigError, match="start"):
            plan(small_cfg(di6, t_e=100), bad, di6)

    def test_structural_invariants_during_run(self, di6, forest_di6):
        cfg = small_cfg(di6, t_e=3000, seed=8)
        eng = KinoPax(cfg, forest_di6, di6)
        for it in range(1, 8):
            eng.iteration = it
            ve = len(eng.arena.slots_with_tag(TAG_EXPAND))
            lam = compute_branching_factor(cfg.t_e, eng.arena.size, ve, cfg.lambda_max)
            size_before = eng.arena.size
            staged = eng.propagate_pass(lam)
            assert staged.attempted == ve * lam
            eng.update_estimates_pass()
            eng.update_node_sets_pass(staged)
            arena = eng.arena
            assert arena.size >= size_before
            assert arena.size <= cfg.t_e
            tags = arena.tag[: arena.size]
            assert np.all((tags == TAG_EXPAND) | (tags == TAG_OPEN))
            assert np.all(arena.tag[arena.size:] == TAG_EMPTY)
            parents = arena.parent[1: arena.size]
            assert np.all(parents >= 0)
            assert np.all(parents < np.arange(1, arena.size))
            # Lemma floor after the estimate pass
            avail = eng.decomp.avail_ids
            assert np.all(eng.decomp.p_accept[avail] >= cfg.epsilon)

    def test_expansion_set_never_dies(self, di6):
        # Even with every region forced to the epsilon floor, the rescue
        # rule keeps at least one expansion slot alive.
        env = make_empty_env(6, goal_center=(9, 9, 9), radius=0.2)
        cfg = small_cfg(di6, t_e=400, seed=11)
        eng = KinoPax(cfg, env, di6)
        for it in range(1, 30):
            eng.iteration = it
            ve = eng.arena.slots_with_tag(TAG_EXPAND)
            assert len(ve) >= 1
            staged = eng.propagate_pass(1)
            eng.update_estimates_pass()
            eng.decomp.p_accept[eng.decomp.avail_ids] = 1e-9
            eng.update_node_sets_pass(staged)


class TestExtractTrajectory:
    def build_chain(self, di6, depth=3):
        eng = KinoPax(small_cfg(di6, t_e=100), make_empty_env(), di6)
        arena = eng.arena
        state = arena.states[0]
        rngs = np.random.default_rng(0)
        for k in range(depth):
            u = rngs.uniform(-1, 1, 3)
            dt = float(rngs.uniform(0.2, 0.8))
            seg = propagate_ode(di6, state, u, dt)
            arena.append_batch(np.array([arena.size - 1 if k else 0]),
                               u[None, :], np.array([dt]),
                               seg.end_state[None, :], np.array([0]))
            state = seg.end_state
        return eng

    def test_root_slot_gives_empty_list(self, di6):
        eng = self.build_chain(di6, depth=2)
        assert extract_trajectory(eng.arena, 0, di6) == []

    def test_depth_three_chain(self, di6):
        eng = self.build_chain(di6, depth=3)
        segs = extract_trajectory(eng.arena, 3, di6)
        assert len(segs) == 3
        assert np.array_equal(segs[0].start_state, eng.arena.states[0])

    def test_repropagation_matches_stored_states(self, di6):
        eng = self.build_chain(di6, depth=4)
        segs = extract_trajectory(eng.arena, 4, di6)
        for slot, seg in zip(range(1, 5), segs):
            assert np.max(np.abs(seg.end_state - eng.arena.states[slot])) <= 1e-12

    def test_corrupted_parent_chain_detected(self, di6):
        eng = self.build_chain(di6, depth=2)
        eng.arena.parent[2] = 9  # out of the live range
        with pytest.raises(RuntimeError, match="parent"):
            extract_trajectory(eng.arena, 2, di6)
