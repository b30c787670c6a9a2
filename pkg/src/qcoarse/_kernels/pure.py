"""Pure-python reference implementations of the hot loops.

Semantics here define the contract; the compiled backend mirrors them.
Status codes instead of exceptions so both backends stay symmetric:
0 = ok, 1 = per-step probabilities failed the sum check, 2 = sampled a
transition with no configured target.
"""
from __future__ import annotations

import numpy as np

PROB_TOLERANCE = 1e-12

BACKEND = "pure"


def renewal_sweep(a_block, t_block, reset, x, steps_done, uniforms, counts_out):
    """Advance the Born-sampled sweep until uniforms or output space run out.

    Returns (n_events, uniforms_used, steps_in_progress, status).  ``x`` is
    mutated in place: it holds the normalized memory state when the call
    returns.  One uniform is consumed per timestep.
    """
    n_events = 0
    used = 0
    cap = counts_out.shape[0]
    n_uni = uniforms.shape[0]
    while n_events < cap and used < n_uni:
        y = a_block @ x
        w = t_block @ x
        p0 = float(np.real(y.conj() @ y))
        p1 = float(np.real(w.conj() @ w))
        if abs(p0 + p1 - 1.0) > PROB_TOLERANCE:
            return n_events, used, steps_done, 1
        u = uniforms[used]
        used += 1
        steps_done += 1
        if u < p0:
            x[:] = y / np.sqrt(p0)
        else:
            # event branch is rank-1 onto the reset state (up to phase)
            counts_out[n_events] = steps_done
            n_events += 1
            x[:] = reset
            steps_done = 0
    return n_events, used, steps_done, 0


def hsmm_sweep(a_block, event_blocks, resets, mode_target, mode, x,
               steps_done, uniforms, counts_out, syms_out):
    """Multi-symbol sweep; events collapse onto the target mode's reset.

    Returns (n_events, uniforms_used, steps_in_progress, mode, status).
    """
    n_events = 0
    used = 0
    cap = counts_out.shape[0]
    n_uni = uniforms.shape[0]
    n_sym = event_blocks.shape[0]
    while n_events < cap and used < n_uni:
        y = a_block @ x
        p0 = float(np.real(y.conj() @ y))
        branches = event_blocks @ x
        probs = np.real(np.einsum("ij,ij->i", branches, branches.conj()))
        if abs(p0 + float(probs.sum()) - 1.0) > PROB_TOLERANCE:
            return n_events, used, steps_done, mode, 1
        u = uniforms[used]
        used += 1
        steps_done += 1
        if u < p0:
            x[:] = y / np.sqrt(p0)
            continue
        acc = p0
        sym = n_sym - 1
        for k in range(n_sym):
            acc += float(probs[k])
            if u < acc:
                sym = k
                break
        target = int(mode_target[mode, sym])
        if target < 0:
            return n_events, used, steps_done, mode, 2
        counts_out[n_events] = steps_done
        syms_out[n_events] = sym
        n_events += 1
        mode = target
        x[:] = resets[target]
        steps_done = 0
    return n_events, used, steps_done, mode, 0


def counter_ks(p, r_idx, dt, cont_cdf, grid_dt, max_atoms):
    """KS objective of a counter model against a precomputed continuous CDF.

    The continuous CDF is linearly interpolated from samples at ``i*grid_dt``
    and treated as 1 beyond the last sample.  The sup over a monotone curve
    versus a step function is attained at the atoms (just before and after
    each jump) or in the tail, so only those points are visited.  The atom
    walk stops once the remaining mass is below 1e-12, the CDF region is
    exhausted (later gaps only shrink), or max_atoms is hit.
    """
    n_states = p.shape[0]
    n_grid = cont_cdf.shape[0]
    t_end = (n_grid - 1) * grid_dt
    state = 0
    prod = 1.0
    cum = 0.0
    ks = 0.0
    for n in range(1, max_atoms + 1):
        t = n * dt
        if t >= t_end:
            gap = 1.0 - cum
            if gap > ks:
                ks = gap
            return ks
        pos = t / grid_dt
        idx = int(pos)
        frac = pos - idx
        c_cont = cont_cdf[idx] * (1.0 - frac) + cont_cdf[idx + 1] * frac
        gap = abs(c_cont - cum)
        if gap > ks:
            ks = gap
        cum += prod * p[state]
        gap = abs(c_cont - cum)
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


def counter_descent(p, dt, r_idx, cont_cdf, grid_dt, eta_p, eta_t, dp, dt_fd,
                    steps, warmup_steps, warmup_factor, max_atoms):
    """Finite-difference gradient descent on the counter KS objective.

    Parameters are projected to the feasible set (p in [0,1], dt > 0) after
    every update; the best iterate ever seen is returned, so the reported
    value is monotone in the step count by construction.
    """
    p = p.copy()
    n_states = p.shape[0]
    best_ks = counter_ks(p, r_idx, dt, cont_cdf, grid_dt, max_atoms)
    best_p = p.copy()
    best_dt = dt
    grad_p = np.empty(n_states)
    for step in range(steps):
        boost = warmup_factor if step < warmup_steps else 1.0
        base = counter_ks(p, r_idx, dt, cont_cdf, grid_dt, max_atoms)
        for j in range(n_states):
            old = p[j]
            p[j] = old + dp
            if p[j] > 1.0:
                p[j] = 1.0
            probe = counter_ks(p, r_idx, dt, cont_cdf, grid_dt, max_atoms)
            denom = p[j] - old
            grad_p[j] = (probe - base) / denom if denom != 0.0 else 0.0
            p[j] = old
        probe_t = counter_ks(p, r_idx, dt + dt_fd, cont_cdf, grid_dt, max_atoms)
        grad_t = (probe_t - base) / dt_fd
        p -= boost * eta_p * grad_p
        np.clip(p, 0.0, 1.0, out=p)
        dt -= boost * eta_t * grad_t
        if dt < 1e-12:
            dt = 1e-12
        now = counter_ks(p, r_idx, dt, cont_cdf, grid_dt, max_atoms)
        if now < best_ks:
            best_ks = now
            best_p = p.copy()
            best_dt = dt
    return best_ks, best_p, best_dt
