"""Compiled inner loops for the reflected-diffusion and explosion simulators.

The stepping scheme shared by every kernel:

* Euler increments of the drifted driving noise, with the Skorokhod
  reflection refined by the within-step bridge maximum (the exact law of the
  pushing term given the step endpoints), sampled lazily.
* Line hits detected by an endpoint test plus Bernoulli thinning with the
  Brownian-bridge upcrossing probability, removing the O(sqrt(dt)) bias of
  plain endpoint tests.
* All correction randomness is addressed by (key, step index) through a
  SplitMix64 counter so that every run reading the same driving path sees
  identical draws -- this is what makes count(mu) monotone in mu pathwise,
  with zero violations, exactly as for the continuum coupling.

Exponential correction draws are capped at EXP_CAP; the truncated mass
(~1e-20 per step) is far below Monte Carlo resolution.
"""

import numpy as np
from numba import njit

EXP_CAP = 46.0

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _ctr_uniform(key, k):
    z = _mix64(key + (np.uint64(k) + np.uint64(1)) * _GOLD)
    return (np.float64(z >> np.uint64(11)) + 1.0) * _INV53


@njit(cache=True, inline="always")
def _ctr_exp(key, k):
    e = -np.log(_ctr_uniform(key, k))
    return e if e < EXP_CAP else EXP_CAP


@njit(cache=True, inline="always")
def _reflect_update(x, d, h, refl_key, k, exact_refl):
    """One Skorokhod step: new value after increment d with reflection at 0.

    With exact_refl the within-step pushing is sampled from the bridge
    maximum law, M = (d + sqrt(d^2 + 2hE))/2, applied only when it can exceed
    the plain endpoint (4 x (x+d) < 2hE); otherwise plain max(x+d, 0).
    """
    xn = x + d
    if exact_refl:
        if 4.0 * x * xn < 2.0 * h * EXP_CAP:
            r = 2.0 * h * _ctr_exp(refl_key, k)
            if 4.0 * x * xn < r:
                m = 0.5 * (d + np.sqrt(d * d + r))
                if m > xn:
                    xn = m
        if xn < 0.0:
            xn = 0.0
    else:
        if xn < 0.0:
            xn = 0.0
    return xn


@njit(cache=True)
def run_cycles(
    dw,
    h,
    t0,
    a,
    mu,
    slope,
    thin_key,
    refl_key,
    exact_refl,
    hit_idx,
):
    """Alternating-phase simulation of one r_mu trajectory over a full path.

    Starts at 0 in the minus phase (drift -a/4); every detected hit of the
    line mu + slope*t resets the value to 0 at the next grid point and
    toggles the drift to (a+1)/4 and back.  Fills hit_idx with the reset
    indices and returns (n_hits, terminal_value, terminal_phase).
    terminal_phase is 0 for the minus phase, 1 for plus.
    """
    n = dw.shape[0]
    q_cap = 0.5 * h * EXP_CAP
    drift_minus = -0.25 * a * h
    drift_plus = 0.25 * (a + 1.0) * h
    max_hits = hit_idx.shape[0]

    x = 0.0
    phase = 0
    d0 = drift_minus
    n_hits = 0
    g0 = mu + slope * t0  # gap c - x at the current index (x starts at 0)
    for k in range(n):
        xn = _reflect_update(x, d0 + dw[k], h, refl_key, k, exact_refl)
        c1 = mu + slope * (t0 + (k + 1) * h)
        g1 = c1 - xn
        fired = False
        if g1 <= 0.0:
            fired = True
        else:
            gg = g0 * g1
            if gg < q_cap and gg < 0.5 * h * _ctr_exp(thin_key, k):
                fired = True
        if fired:
            if n_hits < max_hits:
                hit_idx[n_hits] = k + 1
            n_hits += 1
            phase = 1 - phase
            d0 = drift_plus if phase == 1 else drift_minus
            xn = 0.0
            g1 = c1
        x = xn
        g0 = g1
    return n_hits, x, phase


@njit(cache=True)
def scan_hit_levels(dw, h, t0, drift, slope, thin_key, refl_key, exact_refl):
    """Largest line intercept hit by a single never-reset reflected phase.

    For each step the thinning draw defines the exact supremum of intercepts
    mu for which that step would fire: with gaps G = x - slope*t at the two
    endpoints, mu*_k = ((G0+G1) + sqrt((G0-G1)^2 + 4q))/2.  The running
    maximum over steps is therefore the detected hit level: the run at
    intercept mu fires somewhere if and only if mu < max_k mu*_k, with the
    same correction draws as run_cycles.  Returns that maximum (0 if the
    whole path stays below every positive intercept).
    """
    n = dw.shape[0]
    q_cap = 0.5 * h * EXP_CAP
    sq_cap = np.sqrt(q_cap)
    dh = drift * h

    x = 0.0
    best = 0.0
    g_prev = x - slope * t0
    for k in range(n):
        x = _reflect_update(x, dh + dw[k], h, refl_key, k, exact_refl)
        g_now = x - slope * (t0 + (k + 1) * h)
        g_top = g_now if g_now > g_prev else g_prev
        if g_top + sq_cap > best:
            q = 0.5 * h * _ctr_exp(thin_key, k)
            sq = np.sqrt(q)
            if g_top + sq > best:
                dg = g_prev - g_now
                cand = 0.5 * ((g_prev + g_now) + np.sqrt(dg * dg + 4.0 * q))
                if cand > best:
                    best = cand
        g_prev = g_now
    return best


@njit(cache=True)
def count_profile(dw, h, t0, a, mu_grid, slope, thin_key, refl_key, exact_refl, a_rule):
    """Hit counts of run_cycles for every mu in mu_grid on one shared path.

    a_rule selects how raw line hits map to the cycle count estimate:
    0 -> completed plus phases (hits // 2), 1 -> completed minus phases
    ((hits+1) // 2, valid for a >= 0 where the closing plus phase is certain).
    """
    n_mu = mu_grid.shape[0]
    out = np.empty(n_mu, dtype=np.int64)
    hit_idx = np.empty(64, dtype=np.int64)
    for i in range(n_mu):
        n_hits, _, _ = run_cycles(
            dw, h, t0, a, mu_grid[i], slope, thin_key, refl_key, exact_refl, hit_idx
        )
        if a_rule == 1:
            out[i] = (n_hits + 1) // 2
        else:
            out[i] = n_hits // 2
    return out


@njit(cache=True)
def sturm_count(diag, off2, sigma):
    """Number of eigenvalues of the symmetric tridiagonal matrix below sigma.

    Counts negative pivots of the shifted LDL^T factorization; a vanishing
    pivot is nudged to a tiny negative value, the standard safeguard that
    keeps the count consistent at eigenvalue boundaries.
    """
    n = diag.shape[0]
    count = 0
    d = diag[0] - sigma
    if d == 0.0:
        d = -1e-300
    if d < 0.0:
        count += 1
    for i in range(1, n):
        d = (diag[i] - sigma) - off2[i - 1] / d
        if d == 0.0:
            d = -1e-300
        if d < 0.0:
            count += 1
    return count


@njit(cache=True)
def run_q_beta_segment(
    normals,
    t,
    q,
    phase,
    beta,
    a,
    mu,
    horizon,
    dt_fine,
    dt_coarse,
    band,
    thresh_off,
    restart_q,
    drift_clamp,
    use_splitting,
    expl_times,
    expl_kinds,
    n_expl,
):
    """Advance the rescaled finite-temperature diffusion until the horizon or
    until the supplied normal draws run out.

    Dynamics: dq = dW + (1/4)(base + e^{-q/beta} + e^{-(c(t)-q)/beta}) dt
    with base = -a in the minus phase, (a+1) in the plus phase, and
    c(t) = mu + t/4.  The step is dt_fine within `band` of either boundary
    (0 or the line), dt_coarse otherwise.

    With use_splitting the two exponential terms are integrated by their
    exact substep flows: e^{q/beta} gains dt/(4 beta) per step (the ascent
    from below), e^{(c-q)/beta} loses dt/(4 beta) and hitting zero is the
    closed-form finite-time blowup, declared as an explosion.  This is
    unconditionally stable in the stiff terms; plain Euler with the clamped
    drift (use_splitting False) overshoots the restart ascent at any usable
    step size.  Explosions are also declared when q exceeds c(t)+thresh_off.
    After an explosion the time is recorded, the phase toggles and q restarts
    at restart_q.

    Returns (draws_used, t, q, phase, n_expl, status) with status 1 when the
    horizon was reached, 0 when more draws are needed, -1 on explosion
    overflow (expl_times full).
    """
    n_draws = normals.shape[0]
    max_expl = expl_times.shape[0]
    inv4b = 1.0 / (4.0 * beta)
    used = 0
    while t < horizon:
        if used >= n_draws:
            return used, t, q, phase, n_expl, 0
        c = mu + 0.25 * t
        near = (q < band) or (q > c - band)
        dt = dt_fine if near else dt_coarse
        if t + dt > horizon:
            dt = horizon - t
            if dt <= 0.0:
                break
        base = -a if phase == 0 else a + 1.0
        exploded = False
        if use_splitting:
            q = q + 0.25 * base * dt + np.sqrt(dt) * normals[used]
            used += 1
            t = t + dt
            c = mu + 0.25 * t
            # lower boundary: exact flow of dq = e^{-q/beta}/4 dt
            z = q / beta
            if z < 40.0:
                q = beta * np.log(np.exp(z) + dt * inv4b)
            # upper boundary: exact flow of dq = e^{(q-c)/beta}/4 dt,
            # finite-time blowup == explosion
            y = (c - q) / beta
            if y < 40.0:
                v = np.exp(y) - dt * inv4b
                if v <= 0.0:
                    exploded = True
                else:
                    q = c - beta * np.log(v)
        else:
            e1 = 0.0
            arg1 = -q / beta
            if arg1 > -60.0:
                if arg1 > 60.0:
                    arg1 = 60.0
                e1 = np.exp(arg1)
                if e1 > drift_clamp:
                    e1 = drift_clamp
            e2 = 0.0
            arg2 = (q - c) / beta
            if arg2 > -60.0:
                if arg2 > 60.0:
                    arg2 = 60.0
                e2 = np.exp(arg2)
                if e2 > drift_clamp:
                    e2 = drift_clamp
            drift = 0.25 * (base + e1 + e2)
            q = q + drift * dt + np.sqrt(dt) * normals[used]
            used += 1
            t = t + dt
        if exploded or q > mu + 0.25 * t + thresh_off:
            if n_expl >= max_expl:
                return used, t, q, phase, n_expl, -1
            expl_times[n_expl] = t
            expl_kinds[n_expl] = phase
            n_expl += 1
            phase = 1 - phase
            q = restart_q
    return used, t, q, phase, n_expl, 1
