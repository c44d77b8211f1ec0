"""Benchmark the compiled kernel against the pure-Python fallback.

Runs identical propagation batches through both backends, reports
throughput, and checks that their outputs agree (bit-exact for the
double integrator, libm-tolerance for the trig-based models).
"""

from __future__ import annotations

import time

import numpy as np

from .backend import CompiledBackend, PythonBackend, compiled_available
from .core import PlannerConfig
from .dynamics import get_model
from .envgen import gen_environment
from .planner import KinoPax, TAG_EXPAND


def _prepared_engine(model_name: str, t_e: int, seed: int, threads: int) -> KinoPax:
    model = get_model(model_name)
    env = gen_environment("forest", model, seed=seed)
    cfg = PlannerConfig(
        t_e=t_e, t_prop=model.default_t_prop,
        cells_per_dim=model.default_cells_per_dim, seed=seed, threads=threads,
        t_max=60.0,
    )
    return KinoPax(cfg, env, model)


def run_backend_benchmark(model_name: str = "di6", t_e: int = 4000,
                          trials: int = 3, seed: int = 0,
                          threads: int = 1) -> dict:
    engine = _prepared_engine(model_name, t_e, seed, threads)
    # Grow a small tree first so the benchmark batch is representative.
    for _ in range(6):
        engine.iteration += 1
        ve = len(engine.arena.slots_with_tag(TAG_EXPAND))
        staged = engine.propagate_pass(min(32, max(1, (t_e - engine.arena.size) // ve)))
        engine.update_estimates_pass()
        engine.update_node_sets_pass(staged)

    e_slots = engine.arena.slots_with_tag(TAG_EXPAND)
    lam = max(1, min(32, 4000 // max(1, len(e_slots))))
    items = len(e_slots) * lam
    iteration = engine.iteration + 1

    backends = [PythonBackend()]
    if compiled_available():
        backends.insert(0, CompiledBackend())

    report: dict = {"model": model_name, "items": items, "threads": threads,
                    "backends": {}}
    outputs = {}
    for b in backends:
        best = float("inf")
        for _ in range(trials):
            t0 = time.perf_counter()
            out = b.propagate_batch(engine.ctx, engine.arena.states, e_slots,
                                    lam, iteration)
            best = min(best, time.perf_counter() - t0)
        outputs[b.name] = out
        report["backends"][b.name] = {
            "best_s": best,
            "items_per_s": items / best if best > 0 else float("inf"),
        }

    if len(outputs) == 2:
        a, b = outputs["compiled"], outputs["python"]
        report["agreement"] = {
            "valid_equal": bool(np.array_equal(a.valid, b.valid)),
            "region_equal": bool(np.array_equal(a.region, b.region)),
            "controls_equal": bool(np.array_equal(a.control, b.control)),
            "max_end_abs_diff": float(np.max(np.abs(a.end - b.end))) if items else 0.0,
        }
        report["speedup"] = (report["backends"]["python"]["best_s"]
                             / report["backends"]["compiled"]["best_s"])

    print(f"model={model_name} items={items} threads={threads}")
    for name, row in report["backends"].items():
        print(f"  {name:<9} {row['best_s'] * 1e3:10.2f} ms   "
              f"{row['items_per_s']:12.0f} items/s")
    if "speedup" in report:
        print(f"  speedup: compiled is {report['speedup']:.1f}x faster")
        agr = report["agreement"]
        print(f"  agreement: controls_equal={agr['controls_equal']} "
              f"valid_equal={agr['valid_equal']} region_equal={agr['region_equal']} "
              f"max_end_abs_diff={agr['max_end_abs_diff']:.3e}")
    else:
        print("  compiled kernel not built; python backend only")
    return report
