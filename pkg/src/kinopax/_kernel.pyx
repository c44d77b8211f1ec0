# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled propagation kernel.

Processes one batch of tree extensions (expansion slot x branching index)
fully in C: counter-based RNG draws, zero-order-hold RK4 integration,
densified AABB collision checking, and clamped grid mapping. Work items are
independent and write disjoint output rows, so the batch may run on any
number of OpenMP threads with bit-identical results.

Arithmetic deliberately mirrors the pure-Python backend expression for
expression; compiled with -ffp-contract=off so both produce the same
doubles.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport ceil, cos, floor, fmod, isfinite, sin, sqrt

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>

    static inline int64_t kp_atomic_add_i64(int64_t *p, int64_t v) {
        return __atomic_fetch_add(p, v, __ATOMIC_RELAXED);
    }
    static inline uint8_t kp_atomic_xchg_u8(uint8_t *p, uint8_t v) {
        return __atomic_exchange_n(p, v, __ATOMIC_RELAXED);
    }

    static inline uint64_t kp_mix64(uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static inline uint64_t kp_stream_key(uint64_t seed, uint64_t it,
                                         uint64_t slot, uint64_t ext,
                                         uint64_t phase) {
        uint64_t h = kp_mix64(seed);
        h = kp_mix64(h ^ it);
        h = kp_mix64(h ^ slot);
        h = kp_mix64(h ^ ext);
        return kp_mix64(h ^ phase);
    }
    static inline uint64_t kp_draw(uint64_t key, uint64_t i) {
        return kp_mix64(key ^ ((i + 1) * 0x9E3779B97F4A7C15ULL));
    }
    static inline double kp_unit(uint64_t x) {
        return (double)(x >> 11) * (1.0 / 9007199254740992.0);
    }
    """
    cnp.int64_t kp_atomic_add_i64(cnp.int64_t *p, cnp.int64_t v) nogil
    cnp.uint8_t kp_atomic_xchg_u8(cnp.uint8_t *p, cnp.uint8_t v) nogil
    cnp.uint64_t kp_mix64(cnp.uint64_t z) nogil
    cnp.uint64_t kp_stream_key(cnp.uint64_t seed, cnp.uint64_t it,
                               cnp.uint64_t slot, cnp.uint64_t ext,
                               cnp.uint64_t phase) nogil
    cnp.uint64_t kp_draw(cnp.uint64_t key, cnp.uint64_t i) nogil
    double kp_unit(cnp.uint64_t x) nogil

cdef enum:
    MAX_DIM = 16
    MAX_CONTROL = 8

cdef double PI = 3.14159265358979323846
cdef double TWO_PI = 2.0 * PI
cdef double SUBSTEP_DT = 0.02
cdef int MIN_SUBSTEPS = 4
cdef int PHASE_SAMPLE = 1
cdef int PHASE_ACCEPT = 2


cdef inline double kp_wrap(double a) nogil:
    cdef double t = fmod(a + PI, TWO_PI)
    if t <= 0.0:
        t += TWO_PI
    return t - PI


cdef inline void kp_deriv(int model_id, const double* x, const double* u,
                          double* out) nogil:
    cdef double v, ct, st, cg, sg
    cdef double cphi, sphi, cth, sth, cpsi, spsi, p, q, r, acc, sw
    if model_id == 0:  # double integrator: f = (v, u)
        out[0] = x[3]
        out[1] = x[4]
        out[2] = x[5]
        out[3] = u[0]
        out[4] = u[1]
        out[5] = u[2]
    elif model_id == 1:  # Dubins airplane
        v = x[3]
        ct = cos(x[4])
        st = sin(x[4])
        cg = cos(x[5])
        sg = sin(x[5])
        out[0] = v * ct * cg
        out[1] = v * st * cg
        out[2] = v * sg
        out[3] = u[0]
        out[4] = u[1]
        out[5] = u[2]
    else:  # quadcopter rigid body; constants match dynamics.py
        cphi = cos(x[6])
        sphi = sin(x[6])
        cth = cos(x[7])
        sth = sin(x[7])
        cpsi = cos(x[8])
        spsi = sin(x[8])
        p = x[9]
        q = x[10]
        r = x[11]
        acc = u[0] / 1.0
        out[0] = x[3]
        out[1] = x[4]
        out[2] = x[5]
        out[3] = acc * (cphi * sth * cpsi + sphi * spsi)
        out[4] = acc * (cphi * sth * spsi - sphi * cpsi)
        out[5] = acc * (cphi * cth) - 9.81
        sw = q * sphi + r * cphi
        out[6] = p + sw * (sth / cth)
        out[7] = q * cphi - r * sphi
        out[8] = sw / cth
        out[9] = (u[1] - (0.02 - 0.01) * q * r) / 0.01
        out[10] = (u[2] - (0.01 - 0.02) * p * r) / 0.01
        out[11] = (u[3] - (0.01 - 0.01) * p * q) / 0.02


cdef inline void kp_wrap_state(int model_id, double* x) nogil:
    if model_id == 1:
        x[4] = kp_wrap(x[4])
    elif model_id == 2:
        x[6] = kp_wrap(x[6])
        x[7] = kp_wrap(x[7])
        x[8] = kp_wrap(x[8])


cdef inline int kp_hit(double px, double py, double pz,
                       const double* omin, const double* omax,
                       Py_ssize_t n_obs) nogil:
    cdef Py_ssize_t k
    cdef const double* a
    cdef const double* b
    for k in range(n_obs):
        a = omin + 3 * k
        b = omax + 3 * k
        if (px >= a[0] and px <= b[0] and py >= a[1] and py <= b[1]
                and pz >= a[2] and pz <= b[2]):
            return 1
    return 0


cdef inline void kp_item(
    Py_ssize_t w, const double* states, const cnp.int64_t* e_slots,
    int lam, cnp.uint64_t seed, cnp.uint64_t iteration, int model_id,
    int n, int nu, const double* control_lo, const double* control_hi,
    double t_prop, const double* state_lo, const double* state_hi,
    const double* obs_min, const double* obs_max,
    Py_ssize_t n_obs, double check_res,
    const double* grid_lo, const double* grid_width,
    const cnp.int64_t* grid_cells, const cnp.int64_t* grid_strides,
    int subcells,
    cnp.uint8_t* o_valid, cnp.int64_t* o_region, cnp.int64_t* o_sub,
    double* o_end, double* o_control, double* o_dt,
    double* o_accept,
) nogil:
    cdef cnp.int64_t slot = e_slots[w // lam]
    cdef cnp.uint64_t ext = <cnp.uint64_t> (w % lam)
    cdef cnp.uint64_t key = kp_stream_key(seed, iteration, <cnp.uint64_t> slot,
                                          ext, <cnp.uint64_t> PHASE_SAMPLE)
    cdef double u[MAX_CONTROL]
    cdef double cur[MAX_DIM]
    cdef double tmp[MAX_DIM]
    cdef double k1[MAX_DIM]
    cdef double k2[MAX_DIM]
    cdef double k3[MAX_DIM]
    cdef double k4[MAX_DIM]
    cdef int j, i, s, substeps, ok, alive
    cdef double dt, h, half_h, h6
    cdef double prev0, prev1, prev2, dx, dy, dz, dist, t
    cdef Py_ssize_t steps, jj
    cdef double rel, cmax, fr, smax
    cdef cnp.int64_t reg, c, sub
    cdef int d

    for j in range(nu):
        u[j] = control_lo[j] + kp_unit(kp_draw(key, j)) * (control_hi[j] - control_lo[j])
        o_control[w * nu + j] = u[j]
    dt = (1.0 - kp_unit(kp_draw(key, nu))) * t_prop
    o_dt[w] = dt

    substeps = <int> ceil(dt / SUBSTEP_DT)
    if substeps < MIN_SUBSTEPS:
        substeps = MIN_SUBSTEPS
    h = dt / substeps
    half_h = 0.5 * h
    h6 = h / 6.0

    for i in range(n):
        cur[i] = states[slot * n + i]
    prev0 = cur[0]
    prev1 = cur[1]
    prev2 = cur[2]
    ok = 1
    alive = 1

    for s in range(substeps):
        kp_deriv(model_id, cur, u, k1)
        for i in range(n):
            tmp[i] = cur[i] + half_h * k1[i]
        kp_deriv(model_id, tmp, u, k2)
        for i in range(n):
            tmp[i] = cur[i] + half_h * k2[i]
        kp_deriv(model_id, tmp, u, k3)
        for i in range(n):
            tmp[i] = cur[i] + h * k3[i]
        kp_deriv(model_id, tmp, u, k4)
        for i in range(n):
            cur[i] = cur[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        kp_wrap_state(model_id, cur)

        for i in range(n):
            if not isfinite(cur[i]):
                alive = 0
                break
        if not alive:
            ok = 0
            break
        if ok:
            for i in range(n):
                if cur[i] < state_lo[i] or cur[i] > state_hi[i]:
                    ok = 0
                    break
            if ok and n_obs > 0:
                dx = cur[0] - prev0
                dy = cur[1] - prev1
                dz = cur[2] - prev2
                dist = sqrt(dx * dx + dy * dy + dz * dz)
                steps = 1
                while steps * check_res < dist:
                    steps <<= 1
                for jj in range(1, steps):
                    t = (<double> jj) / (<double> steps)
                    if kp_hit(prev0 + t * dx, prev1 + t * dy, prev2 + t * dz,
                              obs_min, obs_max, n_obs):
                        ok = 0
                        break
                if ok and kp_hit(cur[0], cur[1], cur[2], obs_min, obs_max, n_obs):
                    ok = 0
        prev0 = cur[0]
        prev1 = cur[1]
        prev2 = cur[2]

    for i in range(n):
        o_end[w * n + i] = cur[i]

    if alive:
        reg = 0
        for d in range(n):
            rel = (cur[d] - grid_lo[d]) / grid_width[d]
            cmax = <double> (grid_cells[d] - 1)
            if rel < 0.0:
                rel = 0.0
            elif rel > cmax:
                rel = cmax
            reg += (<cnp.int64_t> floor(rel)) * grid_strides[d]
        o_region[w] = reg
        if ok:
            sub = 0
            smax = <double> (subcells - 1)
            for d in range(3):
                rel = (cur[d] - grid_lo[d]) / grid_width[d]
                cmax = <double> (grid_cells[d] - 1)
                if rel < 0.0:
                    fr = 0.0
                elif rel > cmax:
                    fr = cmax
                else:
                    fr = rel
                c = <cnp.int64_t> floor(fr)
                fr = (rel - c) * subcells
                if fr < 0.0:
                    fr = 0.0
                elif fr > smax:
                    fr = smax
                sub = sub * subcells + (<cnp.int64_t> floor(fr))
            o_sub[w] = sub
            o_valid[w] = 1

    key = kp_stream_key(seed, iteration, <cnp.uint64_t> slot, ext,
                        <cnp.uint64_t> PHASE_ACCEPT)
    o_accept[w] = kp_unit(kp_draw(key, 0))


def propagate_batch(const double[:, ::1] states, const cnp.int64_t[::1] e_slots,
                    int lam, object seed, object iteration, int model_id,
                    const double[::1] control_lo, const double[::1] control_hi,
                    double t_prop,
                    const double[::1] state_lo, const double[::1] state_hi,
                    const double[:, ::1] obs_min, const double[:, ::1] obs_max,
                    double check_res,
                    const double[::1] grid_lo, const double[::1] grid_width,
                    const cnp.int64_t[::1] grid_cells,
                    const cnp.int64_t[::1] grid_strides,
                    int subcells, int threads):
    """Run one propagation batch; returns per-item result arrays."""
    cdef Py_ssize_t m = e_slots.shape[0]
    cdef Py_ssize_t items = m * lam
    cdef int n = states.shape[1]
    cdef int nu = control_lo.shape[0]
    cdef Py_ssize_t n_obs = obs_min.shape[0]
    cdef cnp.uint64_t c_seed = <cnp.uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.uint64_t c_iter = <cnp.uint64_t> (int(iteration) & 0xFFFFFFFFFFFFFFFF)
    if n > MAX_DIM or nu > MAX_CONTROL:
        raise ValueError("state/control dimension exceeds kernel limits")

    valid = np.zeros(items, dtype=np.uint8)
    region = np.full(items, -1, dtype=np.int64)
    sub = np.zeros(items, dtype=np.int64)
    end = np.zeros((items, n), dtype=np.float64)
    control = np.zeros((items, nu), dtype=np.float64)
    dts = np.zeros(items, dtype=np.float64)
    accept = np.zeros(items, dtype=np.float64)

    cdef cnp.uint8_t[::1] o_valid = valid
    cdef cnp.int64_t[::1] o_region = region
    cdef cnp.int64_t[::1] o_sub = sub
    cdef double[:, ::1] o_end = end
    cdef double[:, ::1] o_control = control
    cdef double[::1] o_dt = dts
    cdef double[::1] o_accept = accept
    cdef Py_ssize_t w

    cdef const double* p_states = &states[0, 0]
    cdef const cnp.int64_t* p_slots = &e_slots[0] if m else NULL
    cdef const double* p_clo = &control_lo[0]
    cdef const double* p_chi = &control_hi[0]
    cdef const double* p_slo = &state_lo[0]
    cdef const double* p_shi = &state_hi[0]
    cdef const double* p_omin = &obs_min[0, 0] if n_obs else NULL
    cdef const double* p_omax = &obs_max[0, 0] if n_obs else NULL
    cdef const double* p_glo = &grid_lo[0]
    cdef const double* p_gw = &grid_width[0]
    cdef const cnp.int64_t* p_gc = &grid_cells[0]
    cdef const cnp.int64_t* p_gs = &grid_strides[0]
    cdef cnp.uint8_t* p_valid = &o_valid[0] if items else NULL
    cdef cnp.int64_t* p_region = &o_region[0] if items else NULL
    cdef cnp.int64_t* p_sub = &o_sub[0] if items else NULL
    cdef double* p_end = &o_end[0, 0] if items else NULL
    cdef double* p_control = &o_control[0, 0] if items else NULL
    cdef double* p_dt = &o_dt[0] if items else NULL
    cdef double* p_accept = &o_accept[0] if items else NULL

    if items > 0:
        if threads > 1:
            for w in prange(items, nogil=True, num_threads=threads,
                            schedule="static"):
                kp_item(w, p_states, p_slots, lam, c_seed, c_iter, model_id,
                        n, nu, p_clo, p_chi, t_prop, p_slo, p_shi,
                        p_omin, p_omax, n_obs, check_res,
                        p_glo, p_gw, p_gc, p_gs, subcells,
                        p_valid, p_region, p_sub, p_end, p_control, p_dt,
                        p_accept)
        else:
            with nogil:
                for w in range(items):
                    kp_item(w, p_states, p_slots, lam, c_seed, c_iter, model_id,
                            n, nu, p_clo, p_chi, t_prop, p_slo, p_shi,
                            p_omin, p_omax, n_obs, check_res,
                            p_glo, p_gw, p_gc, p_gs, subcells,
                            p_valid, p_region, p_sub, p_end, p_control, p_dt,
                            p_accept)

    return {"valid": valid, "region": region, "sub": sub, "end": end,
            "control": control, "dt": dts, "accept_u": accept}


def atomic_add_i64(cnp.int64_t[::1] arr, Py_ssize_t idx, cnp.int64_t delta=1):
    """Atomic fetch-add on an int64 array element; returns the old value."""
    return kp_atomic_add_i64(&arr[idx], delta)


def atomic_exchange_u8(cnp.uint8_t[::1] arr, Py_ssize_t idx, int value):
    """Atomic exchange on a uint8 array element; returns the old value."""
    return kp_atomic_xchg_u8(&arr[idx], <cnp.uint8_t> value)
