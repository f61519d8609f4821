"""Compiled inner loop of the particle simulator.

Profile codes: 0 local, 1 normal, 2 screened (tabulated), 3 spherical.
All functions take an ``np.random.Generator`` and advance it in place.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LOCAL, NORMAL, SCREENED, SPHERICAL = 0, 1, 2, 3

STATUS_OK = 0
STATUS_CAPACITY = 1


@njit(cache=True, nogil=True)
def _min_image(dx, L):
    if dx > 0.5 * L:
        return dx - L
    if dx < -0.5 * L:
        return dx + L
    return dx


@njit(cache=True, nogil=True)
def pair_probability(r, code, rate, lam, d, dt, vol_d, table_h, table):
    """``1 - exp(-R(r) dt)`` for a pair at distance ``r``."""
    if code == NORMAL:
        dens = (lam * lam / math.pi) ** (0.5 * d) * math.exp(-(lam * r) ** 2)
        return -math.expm1(-rate * dens * dt)
    if code == SPHERICAL:
        if r < 1.0 / lam:
            return -math.expm1(-rate * lam**d / vol_d * dt)
        return 0.0
    # screened: table of probabilities on a uniform grid in sqrt(r)
    s = math.sqrt(r) / table_h
    i = int(s)
    if i >= table.size - 1:
        return table[table.size - 1]
    w = s - i
    return (1.0 - w) * table[i] + w * table[i + 1]


@njit(cache=True, nogil=True)
def _sample_offspring(rng, code, lam, d, out):
    if code == LOCAL:
        for a in range(d):
            out[a] = 0.0
    elif code == NORMAL:
        sig = 1.0 / (lam * math.sqrt(2.0))
        for a in range(d):
            out[a] = sig * rng.standard_normal()
    elif code == SCREENED:
        alpha = -math.log(1.0 - rng.random()) / (lam * lam)
        s = math.sqrt(2.0 * alpha)
        for a in range(d):
            out[a] = s * rng.standard_normal()
    else:
        norm = 0.0
        for a in range(d):
            out[a] = rng.standard_normal()
            norm += out[a] * out[a]
        norm = math.sqrt(norm)
        rad = rng.random() ** (1.0 / d) / lam
        for a in range(d):
            out[a] *= rad / norm


@njit(cache=True, nogil=True)
def _wrap(x, L):
    x = x % L
    if x >= L:
        x -= L
    return x


@njit(cache=True, nogil=True)
def _collect_pairs(pos, n, d, L, r_c, code, rate, lam, dt, vol_d, table_h, table, rng, pairs):
    """Accepted annihilation candidates as rows of ``pairs``; returns (count, pairs)."""
    npairs = 0
    rc2 = r_c * r_c
    m = int(L / r_c)
    # keep the number of cells proportional to n
    cap_m = int((2.0 * n) ** (1.0 / d)) + 1
    if cap_m < m:
        m = cap_m
    if m < 3:
        for i in range(n):
            for j in range(i + 1, n):
                r2 = 0.0
                for a in range(d):
                    dx = _min_image(pos[j, a] - pos[i, a], L)
                    r2 += dx * dx
                if r2 <= rc2:
                    p = pair_probability(math.sqrt(r2), code, rate, lam, d, dt, vol_d, table_h, table)
                    if p > 0 and rng.random() < p:
                        if npairs >= pairs.shape[0]:
                            grown = np.empty((2 * pairs.shape[0], 2), dtype=np.int64)
                            grown[:npairs] = pairs[:npairs]
                            pairs = grown
                        pairs[npairs, 0] = i
                        pairs[npairs, 1] = j
                        npairs += 1
        return npairs, pairs

    ncell = m**d
    cell_of = np.empty(n, dtype=np.int64)
    counts = np.zeros(ncell + 1, dtype=np.int64)
    side = L / m
    for i in range(n):
        c = 0
        for a in range(d):
            k = int(pos[i, a] / side)
            if k >= m:
                k = m - 1
            c = c * m + k
        cell_of[i] = c
        counts[c + 1] += 1
    for c in range(ncell):
        counts[c + 1] += counts[c]
    order = np.empty(n, dtype=np.int64)
    fill = counts[:ncell].copy()
    for i in range(n):
        c = cell_of[i]
        order[fill[c]] = i
        fill[c] += 1

    # sorted copy of the coordinates for locality
    spos = np.empty((n, d))
    for s in range(n):
        for a in range(d):
            spos[s, a] = pos[order[s], a]
    # wrapped neighbour coordinate per dimension: wrapt[k, o] = (k + o - 1) mod m
    wrapt = np.empty((m, 3), dtype=np.int64)
    for k in range(m):
        for o in range(3):
            wrapt[k, o] = (k + o - 1 + m) % m
    # half shell: offsets whose first non-zero component is positive
    noff = 3**d
    half = np.empty((noff, d), dtype=np.int64)
    nh = 0
    for o in range(noff):
        q = o
        first = 0
        for a in range(d):
            off = q % 3
            q //= 3
            half[nh, a] = off
            if first == 0 and off != 1:
                first = 1 if off == 2 else -1
        if first == 1:
            nh += 1
    idx = np.empty(d, dtype=np.int64)
    for c in range(ncell):
        c0, c1 = counts[c], counts[c + 1]
        if c0 == c1:
            continue
        rem = c
        for a in range(d - 1, -1, -1):
            idx[a] = rem % m
            rem //= m
        for h in range(-1, nh):
            if h < 0:
                cn = c
            else:
                cn = 0
                for a in range(d):
                    cn = cn * m + wrapt[idx[a], half[h, a]]
            e0, e1 = counts[cn], counts[cn + 1]
            if e0 == e1:
                continue
            for s in range(c0, c1):
                start = s + 1 if h < 0 else e0
                for u in range(start, e1):
                    r2 = 0.0
                    for a in range(d):
                        dx = _min_image(spos[u, a] - spos[s, a], L)
                        r2 += dx * dx
                    if r2 <= rc2:
                        p = pair_probability(math.sqrt(r2), code, rate, lam, d, dt, vol_d, table_h, table)
                        if p > 0 and rng.random() < p:
                            if npairs >= pairs.shape[0]:
                                grown = np.empty((2 * pairs.shape[0], 2), dtype=np.int64)
                                grown[:npairs] = pairs[:npairs]
                                pairs = grown
                            pairs[npairs, 0] = order[s]
                            pairs[npairs, 1] = order[u]
                            npairs += 1
    return npairs, pairs


@njit(cache=True, nogil=True)
def _ensure(pos, need):
    if need <= pos.shape[0]:
        return pos
    size = pos.shape[0]
    while size < need:
        size *= 2
    out = np.empty((size, pos.shape[1]))
    out[: pos.shape[0]] = pos
    return out


@njit(cache=True, nogil=True)
def run_core(pos, n, d, L, D, dt, n_steps, record_steps, counts_out,
             r_code, r_rate, r_lam, r_c, vol_d, table_h, table,
             q_code, q_lam, p_death, p_branch, birth_mean, max_particles, rng):
    """Advance ``n_steps`` steps; record particle counts at ``record_steps``.

    Returns ``(status, n, pos, steps_done)``.
    """
    sig = math.sqrt(2.0 * D * dt)
    pairs = np.empty((max(16, n), 2), dtype=np.int64)
    alive = np.ones(pos.shape[0], dtype=np.bool_)
    disp = np.empty(d)
    rec = 0
    while rec < record_steps.size and record_steps[rec] == 0:
        counts_out[rec] = n
        rec += 1
    for step in range(1, n_steps + 1):
        # diffusion
        if sig > 0:
            for i in range(n):
                for a in range(d):
                    pos[i, a] = _wrap(pos[i, a] + sig * rng.standard_normal(), L)
        # annihilation
        if r_rate > 0 and n > 1:
            npairs, pairs = _collect_pairs(pos, n, d, L, r_c, r_code, r_rate, r_lam, dt, vol_d,
                                           table_h, table, rng, pairs)
            if npairs > 0:
                # random resolution order, first match wins
                for k in range(npairs - 1, 0, -1):
                    j = int(rng.random() * (k + 1))
                    if j > k:
                        j = k
                    a0, a1 = pairs[k, 0], pairs[k, 1]
                    pairs[k, 0], pairs[k, 1] = pairs[j, 0], pairs[j, 1]
                    pairs[j, 0], pairs[j, 1] = a0, a1
                if alive.shape[0] < n:
                    alive = np.ones(pos.shape[0], dtype=np.bool_)
                for i in range(n):
                    alive[i] = True
                for k in range(npairs):
                    i, j = pairs[k, 0], pairs[k, 1]
                    if alive[i] and alive[j]:
                        alive[i] = False
                        alive[j] = False
                w = 0
                for i in range(n):
                    if alive[i]:
                        if w != i:
                            for a in range(d):
                                pos[w, a] = pos[i, a]
                        w += 1
                n = w
        # death
        if p_death > 0:
            w = 0
            for i in range(n):
                if rng.random() >= p_death:
                    if w != i:
                        for a in range(d):
                            pos[w, a] = pos[i, a]
                    w += 1
            n = w
        # branching
        if p_branch > 0:
            n_par = n
            for i in range(n_par):
                if rng.random() < p_branch:
                    if n + 1 > max_particles:
                        return STATUS_CAPACITY, n, pos, step
                    pos = _ensure(pos, n + 1)
                    _sample_offspring(rng, q_code, q_lam, d, disp)
                    for a in range(d):
                        pos[n, a] = _wrap(pos[i, a] + disp[a], L)
                    n += 1
        # birth
        if birth_mean > 0:
            nb = rng.poisson(birth_mean)
            if n + nb > max_particles:
                return STATUS_CAPACITY, n, pos, step
            pos = _ensure(pos, n + nb)
            for k in range(nb):
                for a in range(d):
                    pos[n, a] = _wrap(rng.random() * L, L)
                n += 1
        while rec < record_steps.size and record_steps[rec] == step:
            counts_out[rec] = n
            rec += 1
    return STATUS_OK, n, pos, n_steps
