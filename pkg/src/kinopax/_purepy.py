"""Pure-Python propagation backend.

Mirrors the compiled kernel operation for operation: same counter-based
draws, same RK4 evaluation order, same densified collision walk, same
clamped grid mapping. The double-integrator model is bit-identical across
backends; trig-based models agree to libm accuracy.

This backend exists as the always-available fallback and as a readable
reference for the kernel; it is orders of magnitude slower and intended for
small problems and tests.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import MIN_SUBSTEPS, SUBSTEP_DT, DynamicsModel
from .rng import PHASE_ACCEPT, PHASE_SAMPLE, draw_u64, stream_key, u64_to_unit
from .validity import densify_steps


def propagate_batch(states, e_slots, lam, seed, iteration, model: DynamicsModel,
                    t_prop, state_lo, state_hi, obs_min, obs_max, check_res,
                    grid_lo, grid_width, grid_cells, grid_strides, subcells,
                    threads=1):
    m = len(e_slots)
    items = m * lam
    n = model.n
    nu = model.control_dim
    out = {
        "valid": np.zeros(items, dtype=np.uint8),
        "region": np.full(items, -1, dtype=np.int64),
        "sub": np.zeros(items, dtype=np.int64),
        "end": np.zeros((items, n), dtype=np.float64),
        "control": np.zeros((items, nu), dtype=np.float64),
        "dt": np.zeros(items, dtype=np.float64),
        "accept_u": np.zeros(items, dtype=np.float64),
    }
    args = (states, e_slots, lam, seed, iteration, model, t_prop,
            np.asarray(state_lo), np.asarray(state_hi),
            np.asarray(obs_min), np.asarray(obs_max), check_res,
            np.asarray(grid_lo), np.asarray(grid_width),
            np.asarray(grid_cells), np.asarray(grid_strides), subcells, out)
    if threads > 1 and items > 1:
        bounds = np.linspace(0, items, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_run_range, int(a), int(b), *args)
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            for f in futures:
                f.result()
    else:
        _run_range(0, items, *args)
    return out


def _run_range(start, stop, states, e_slots, lam, seed, iteration, model,
               t_prop, state_lo, state_hi, obs_min, obs_max, check_res,
               grid_lo, grid_width, grid_cells, grid_strides, subcells, out):
    n_obs = len(obs_min)
    nu = model.control_dim
    f = model.deriv_fn
    k1 = np.empty(model.n)
    k2 = np.empty(model.n)
    k3 = np.empty(model.n)
    k4 = np.empty(model.n)
    for w in range(start, stop):
        slot = int(e_slots[w // lam])
        ext = w % lam
        key = stream_key(seed, iteration, slot, ext, PHASE_SAMPLE)
        u = np.empty(nu)
        for j in range(nu):
            u[j] = state_control_draw(key, j, model.control_lo[j], model.control_hi[j])
        dt = (1.0 - u64_to_unit(draw_u64(key, nu))) * t_prop
        out["control"][w] = u
        out["dt"][w] = dt

        substeps = max(MIN_SUBSTEPS, int(math.ceil(dt / SUBSTEP_DT)))
        h = dt / substeps
        half_h = 0.5 * h
        h6 = h / 6.0
        cur = states[slot].copy()
        prev0, prev1, prev2 = cur[0], cur[1], cur[2]
        ok = True
        alive = True
        for _ in range(substeps):
            f(cur, u, k1)
            f(cur + half_h * k1, u, k2)
            f(cur + half_h * k2, u, k3)
            f(cur + h * k3, u, k4)
            cur = cur + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            model.wrap_state(cur)
            if not np.all(np.isfinite(cur)):
                alive = False
                ok = False
                break
            if ok:
                if np.any(cur < state_lo) or np.any(cur > state_hi):
                    ok = False
                elif n_obs:
                    dx = cur[0] - prev0
                    dy = cur[1] - prev1
                    dz = cur[2] - prev2
                    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                    steps = densify_steps(dist, check_res)
                    for j in range(1, steps):
                        t = j / steps
                        if _hit(prev0 + t * dx, prev1 + t * dy, prev2 + t * dz,
                                obs_min, obs_max, n_obs):
                            ok = False
                            break
                    if ok and _hit(cur[0], cur[1], cur[2], obs_min, obs_max, n_obs):
                        ok = False
            prev0, prev1, prev2 = cur[0], cur[1], cur[2]
        out["end"][w] = cur
        if alive:
            out["region"][w] = _map_region(cur, grid_lo, grid_width, grid_cells,
                                           grid_strides)
            if ok:
                out["sub"][w] = _map_sub(cur, grid_lo, grid_width, grid_cells,
                                         subcells)
                out["valid"][w] = 1
        akey = stream_key(seed, iteration, slot, ext, PHASE_ACCEPT)
        out["accept_u"][w] = u64_to_unit(draw_u64(akey, 0))


def state_control_draw(key, j, lo, hi):
    return lo + u64_to_unit(draw_u64(key, j)) * (hi - lo)


def _hit(px, py, pz, obs_min, obs_max, n_obs):
    for k in range(n_obs):
        if (obs_min[k, 0] <= px <= obs_max[k, 0]
                and obs_min[k, 1] <= py <= obs_max[k, 1]
                and obs_min[k, 2] <= pz <= obs_max[k, 2]):
            return True
    return False


def _map_region(x, lo, width, cells, strides):
    reg = 0
    for d in range(len(lo)):
        rel = (x[d] - lo[d]) / width[d]
        cmax = float(cells[d] - 1)
        if rel < 0.0:
            rel = 0.0
        elif rel > cmax:
            rel = cmax
        reg += int(math.floor(rel)) * int(strides[d])
    return reg


def _map_sub(x, lo, width, cells, subcells):
    sub = 0
    smax = float(subcells - 1)
    for d in (0, 1, 2):
        rel = (x[d] - lo[d]) / width[d]
        cmax = float(cells[d] - 1)
        crel = rel
        if crel < 0.0:
            crel = 0.0
        elif crel > cmax:
            crel = cmax
        c = math.floor(crel)
        fr = (rel - c) * subcells
        if fr < 0.0:
            fr = 0.0
        elif fr > smax:
            fr = smax
        sub = sub * subcells + int(math.floor(fr))
    return sub
