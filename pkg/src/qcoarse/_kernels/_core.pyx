# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot loops; see pure.py for semantics."""

import numpy as np

cimport cython
from libc.math cimport fabs, sqrt

BACKEND = "compiled"

DEF PROB_TOLERANCE = 1e-12


cdef inline double _cnorm_sq(double complex* v, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += v[i].real * v[i].real + v[i].imag * v[i].imag
    return acc


cdef inline void _matvec(const double complex* m, const double complex* x,
                         double complex* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double complex acc
    for i in range(n):
        acc = 0
        for j in range(n):
            acc = acc + m[i * n + j] * x[j]
        out[i] = acc


def renewal_sweep(a_block, t_block, reset, x, steps_done, uniforms, counts_out):
    a = np.ascontiguousarray(a_block, dtype=complex)
    t = np.ascontiguousarray(t_block, dtype=complex)
    r = np.ascontiguousarray(reset, dtype=complex)
    cdef double complex[:, ::1] a_v = a
    cdef double complex[:, ::1] t_v = t
    cdef double complex[::1] r_v = r
    cdef double complex[::1] x_v = x
    cdef double[::1] u_v = uniforms
    cdef long long[::1] c_v = counts_out
    cdef Py_ssize_t d = a.shape[0]
    cdef Py_ssize_t cap = c_v.shape[0]
    cdef Py_ssize_t n_uni = u_v.shape[0]
    cdef Py_ssize_t n_events = 0, used = 0, i
    cdef long long steps = steps_done
    cdef int status = 0
    cdef double p0, p1, u, inv
    buf = np.empty(2 * d, dtype=complex)
    cdef double complex[::1] b_v = buf
    cdef double complex* y = &b_v[0]
    cdef double complex* w = &b_v[0] + d

    with nogil:
        while n_events < cap and used < n_uni:
            _matvec(&a_v[0, 0], &x_v[0], y, d)
            _matvec(&t_v[0, 0], &x_v[0], w, d)
            p0 = _cnorm_sq(y, d)
            p1 = _cnorm_sq(w, d)
            if fabs(p0 + p1 - 1.0) > PROB_TOLERANCE:
                status = 1
                break
            u = u_v[used]
            used += 1
            steps += 1
            if u < p0:
                inv = 1.0 / sqrt(p0)
                for i in range(d):
                    x_v[i] = y[i] * inv
            else:
                c_v[n_events] = steps
                n_events += 1
                for i in range(d):
                    x_v[i] = r_v[i]
                steps = 0
    return int(n_events), int(used), int(steps), status


def hsmm_sweep(a_block, event_blocks, resets, mode_target, mode, x,
               steps_done, uniforms, counts_out, syms_out):
    a = np.ascontiguousarray(a_block, dtype=complex)
    blocks = np.ascontiguousarray(event_blocks, dtype=complex)
    res = np.ascontiguousarray(resets, dtype=complex)
    targets = np.ascontiguousarray(mode_target, dtype=np.int64)
    cdef double complex[:, ::1] a_v = a
    cdef double complex[:, :, ::1] e_v = blocks
    cdef double complex[:, ::1] r_v = res
    cdef long long[:, ::1] tg_v = targets
    cdef double complex[::1] x_v = x
    cdef double[::1] u_v = uniforms
    cdef long long[::1] c_v = counts_out
    cdef long long[::1] s_v = syms_out
    cdef Py_ssize_t d = a.shape[0]
    cdef Py_ssize_t n_sym = blocks.shape[0]
    cdef Py_ssize_t cap = c_v.shape[0]
    cdef Py_ssize_t n_uni = u_v.shape[0]
    cdef Py_ssize_t n_events = 0, used = 0, i, k, sym
    cdef long long steps = steps_done
    cdef long long g = mode, target
    cdef int status = 0
    cdef double p0, total, u, acc, inv
    buf = np.empty(d + n_sym * d, dtype=complex)
    probs = np.empty(n_sym, dtype=float)
    cdef double complex[::1] b_v = buf
    cdef double[::1] p_v = probs
    cdef double complex* y = &b_v[0]
    cdef double complex* w = &b_v[0] + d

    with nogil:
        while n_events < cap and used < n_uni:
            _matvec(&a_v[0, 0], &x_v[0], y, d)
            p0 = _cnorm_sq(y, d)
            total = p0
            for k in range(n_sym):
                _matvec(&e_v[k, 0, 0], &x_v[0], w + k * d, d)
                p_v[k] = _cnorm_sq(w + k * d, d)
                total += p_v[k]
            if fabs(total - 1.0) > PROB_TOLERANCE:
                status = 1
                break
            u = u_v[used]
            used += 1
            steps += 1
            if u < p0:
                inv = 1.0 / sqrt(p0)
                for i in range(d):
                    x_v[i] = y[i] * inv
                continue
            acc = p0
            sym = n_sym - 1
            for k in range(n_sym):
                acc += p_v[k]
                if u < acc:
                    sym = k
                    break
            target = tg_v[g, sym]
            if target < 0:
                status = 2
                break
            c_v[n_events] = steps
            s_v[n_events] = sym
            n_events += 1
            g = target
            for i in range(d):
                x_v[i] = r_v[target, i]
            steps = 0
    return int(n_events), int(used), int(steps), int(g), status


cdef double _counter_ks(const double* p, Py_ssize_t n_states, long long r_idx,
                        double dt, const double* cont_cdf, Py_ssize_t n_grid,
                        double grid_dt, long long max_atoms) noexcept nogil:
    cdef double t_end = (n_grid - 1) * grid_dt
    cdef Py_ssize_t state = 0
    cdef double prod = 1.0, cum = 0.0, ks = 0.0
    cdef double t, pos, frac, c_cont, gap
    cdef Py_ssize_t idx
    cdef long long n
    for n in range(1, max_atoms + 1):
        t = n * dt
        if t >= t_end:
            gap = 1.0 - cum
            if gap > ks:
                ks = gap
            return ks
        pos = t / grid_dt
        idx = <Py_ssize_t> pos
        frac = pos - idx
        c_cont = cont_cdf[idx] * (1.0 - frac) + cont_cdf[idx + 1] * frac
        gap = fabs(c_cont - cum)
        if gap > ks:
            ks = gap
        cum += prod * p[state]
        gap = fabs(c_cont - cum)
        if gap > ks:
            ks = gap
        prod *= 1.0 - p[state]
        state = state + 1 if state < n_states - 1 else r_idx
        if prod < 1e-12:
            break
    gap = 1.0 - cum
    if gap > ks:
        ks = gap
    return ks


def counter_ks(p, r_idx, dt, cont_cdf, grid_dt, max_atoms):
    p_arr = np.ascontiguousarray(p, dtype=float)
    c_arr = np.ascontiguousarray(cont_cdf, dtype=float)
    cdef double[::1] p_v = p_arr
    cdef double[::1] c_v = c_arr
    cdef double out
    cdef double dt_c = dt, gdt = grid_dt
    cdef long long r_c = r_idx, ma = max_atoms
    with nogil:
        out = _counter_ks(&p_v[0], p_v.shape[0], r_c, dt_c, &c_v[0],
                          c_v.shape[0], gdt, ma)
    return out


def counter_descent(p, dt, r_idx, cont_cdf, grid_dt, eta_p, eta_t, dp, dt_fd,
                    steps, warmup_steps, warmup_factor, max_atoms):
    p_arr = np.array(p, dtype=float, copy=True, order="C")
    c_arr = np.ascontiguousarray(cont_cdf, dtype=float)
    best_arr = p_arr.copy()
    grad_arr = np.empty_like(p_arr)
    cdef double[::1] p_v = p_arr
    cdef double[::1] c_v = c_arr
    cdef double[::1] bp_v = best_arr
    cdef double[::1] g_v = grad_arr
    cdef Py_ssize_t n_states = p_v.shape[0]
    cdef Py_ssize_t n_grid = c_v.shape[0]
    cdef long long r_c = r_idx, ma = max_atoms
    cdef long long n_steps = steps, warm = warmup_steps
    cdef double wf = warmup_factor
    cdef double e_p = eta_p, e_t = eta_t, d_p = dp, d_t = dt_fd
    cdef double gdt = grid_dt
    cdef double cur_dt = dt, best_dt, best_ks, base, probe, now, boost
    cdef double old, denom, grad_t
    cdef long long step
    cdef Py_ssize_t j

    with nogil:
        best_ks = _counter_ks(&p_v[0], n_states, r_c, cur_dt, &c_v[0],
                              n_grid, gdt, ma)
        best_dt = cur_dt
        for step in range(n_steps):
            boost = wf if step < warm else 1.0
            base = _counter_ks(&p_v[0], n_states, r_c, cur_dt, &c_v[0],
                               n_grid, gdt, ma)
            for j in range(n_states):
                old = p_v[j]
                p_v[j] = old + d_p
                if p_v[j] > 1.0:
                    p_v[j] = 1.0
                probe = _counter_ks(&p_v[0], n_states, r_c, cur_dt, &c_v[0],
                                    n_grid, gdt, ma)
                denom = p_v[j] - old
                g_v[j] = (probe - base) / denom if denom != 0.0 else 0.0
                p_v[j] = old
            probe = _counter_ks(&p_v[0], n_states, r_c, cur_dt + d_t, &c_v[0],
                                n_grid, gdt, ma)
            grad_t = (probe - base) / d_t
            for j in range(n_states):
                p_v[j] = p_v[j] - boost * e_p * g_v[j]
                if p_v[j] < 0.0:
                    p_v[j] = 0.0
                elif p_v[j] > 1.0:
                    p_v[j] = 1.0
            cur_dt = cur_dt - boost * e_t * grad_t
            if cur_dt < 1e-12:
                cur_dt = 1e-12
            now = _counter_ks(&p_v[0], n_states, r_c, cur_dt, &c_v[0],
                              n_grid, gdt, ma)
            if now < best_ks:
                best_ks = now
                best_dt = cur_dt
                for j in range(n_states):
                    bp_v[j] = p_v[j]
    return float(best_ks), best_arr, float(best_dt)
