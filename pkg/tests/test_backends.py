"""Compiled kernel vs pure-Python fallback: same draws, same decisions,
same trajectories (bit-exact for the double integrator, libm-tolerance for
the trig models)."""

import numpy as np
import pytest

from kinopax import PlannerConfig, gen_environment, get_model, plan
from kinopax.backend import (CompiledBackend, PythonBackend,
                             compiled_available, get_backend)
from kinopax.core import ConfigError
from kinopax.dynamics import propagate_ode
from kinopax.planner import TAG_EXPAND, KinoPax

from conftest import small_cfg

needs_kernel = pytest.mark.skipif(not compiled_available(),
                                  reason="compiled kernel not built")


def grown_engine(model_name, t_e=8000, iters=5, seed=0):
    model = get_model(model_name)
    env = gen_environment("forest", model, seed=0)
    cfg = small_cfg(model, t_e=t_e, seed=seed)
    eng = KinoPax(cfg, env, model)
    for _ in range(iters):
        eng.iteration += 1
        ve = len(eng.arena.slots_with_tag(TAG_EXPAND))
        staged = eng.propagate_pass(min(8, max(1, (t_e - eng.arena.size) // ve)))
        eng.update_estimates_pass()
        eng.update_node_sets_pass(staged)
    return eng


@needs_kernel
@pytest.mark.parametrize("model_name", ["di6", "dubins6", "quad12"])
def test_batch_parity(model_name):
    eng = grown_engine(model_name)
    e_slots = eng.arena.slots_with_tag(TAG_EXPAND)
    a = CompiledBackend().propagate_batch(eng.ctx, eng.arena.states, e_slots, 4,
                                          eng.iteration + 1)
    b = PythonBackend().propagate_batch(eng.ctx, eng.arena.states, e_slots, 4,
                                        eng.iteration + 1)
    assert np.array_equal(a.control, b.control)      # sampling is bit-exact
    assert np.array_equal(a.dt, b.dt)
    assert np.array_equal(a.accept_u, b.accept_u)
    assert np.array_equal(a.valid, b.valid)          # identical decisions
    assert np.array_equal(a.region, b.region)
    assert np.array_equal(a.sub, b.sub)
    if model_name == "di6":
        assert np.array_equal(a.end, b.end)
    else:
        assert np.max(np.abs(a.end - b.end)) < 1e-12


@needs_kernel
def test_kernel_end_states_match_propagate_ode():
    # The kernel's inlined integrator must reproduce the reference one.
    eng = grown_engine("dubins6", iters=3)
    model = eng.model
    e_slots = eng.arena.slots_with_tag(TAG_EXPAND)
    batch = CompiledBackend().propagate_batch(eng.ctx, eng.arena.states, e_slots, 2,
                                              eng.iteration + 1)
    for w in range(batch.items):
        if not batch.valid[w]:
            continue
        parent = eng.arena.states[e_slots[w // 2]]
        seg = propagate_ode(model, parent, batch.control[w], float(batch.dt[w]))
        assert np.max(np.abs(seg.end_state - batch.end[w])) < 1e-12


@needs_kernel
def test_end_to_end_solution_parity_di6():
    from conftest import make_empty_env

    model = get_model("di6")
    env = make_empty_env(6, goal_center=(4.0, 4.0, 4.0))
    cfg = small_cfg(model, t_e=4000, seed=3)
    a = plan(cfg, env, model, backend="compiled", capture_tree=True)
    b = plan(cfg, env, model, backend="python", capture_tree=True)
    assert a.status == b.status
    sa, sb = a.tree_snapshot, b.tree_snapshot
    assert sa["size"] == sb["size"]
    for key in ("states", "parent", "control", "dt", "tag", "region"):
        assert np.array_equal(sa[key], sb[key]), key


def test_python_backend_threads_deterministic():
    model = get_model("di6")
    env = gen_environment("narrow", model, seed=0)
    snaps = []
    for threads in (1, 4):
        cfg = small_cfg(model, t_e=3000, seed=2, threads=threads)
        res = plan(cfg, env, model, backend="python", capture_tree=True)
        snaps.append(res.tree_snapshot)
    assert np.array_equal(snaps[0]["states"], snaps[1]["states"])
    assert np.array_equal(snaps[0]["tag"], snaps[1]["tag"])


def test_backend_selection():
    assert get_backend("python").name == "python"
    if compiled_available():
        assert get_backend(None, get_model("di6")).name == "compiled"
    with pytest.raises(ConfigError):
        get_backend("no-such-backend")


def test_env_override(monkeypatch):
    monkeypatch.setenv("KINOPAX_BACKEND", "python")
    assert get_backend(None, get_model("di6")).name == "python"


@needs_kernel
class TestAtomics:
    def test_add_returns_old_value(self):
        from kinopax._kernel import atomic_add_i64
        arr = np.zeros(4, dtype=np.int64)
        assert atomic_add_i64(arr, 2, 5) == 0
        assert atomic_add_i64(arr, 2, 1) == 5
        assert arr[2] == 6

    def test_exchange(self):
        from kinopax._kernel import atomic_exchange_u8
        arr = np.zeros(4, dtype=np.uint8)
        assert atomic_exchange_u8(arr, 1, 1) == 0
        assert atomic_exchange_u8(arr, 1, 1) == 1
