"""Compiled event loops for the lattice models.

One monolithic rejection-sampling (thinning) runner handles every state
model via an integer model code; the RNG is an explicit xoshiro256++ state
passed in and out, so runs are reproducible across platforms and can be
checkpointed mid-flight.  Holding times are exponential at the constant
total bound rate; rejected proposals advance time only, so chunks always
terminate and the generated path has exactly the model's CTMC law.

Pair events (O2 deposition, CO+O reaction, stirring exchanges) are
attributed to ordered (site, direction) picks at half the unordered pair
rate, which keeps the per-site bound uniform.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_INV_2_53 = 1.1102230246251565e-16  # 2**-53


@njit(inline="always", cache=True)
def _rotl(x, k):
    return U64((x << k) | (x >> (U64(64) - k)))


@njit(inline="always", cache=True)
def _next_u64(s):
    # xoshiro256++
    result = U64(_rotl(U64(s[0] + s[3]), U64(23)) + s[0])
    t = U64(s[1] << U64(17))
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], U64(45))
    return result


@njit(inline="always", cache=True)
def _rand(s):
    return (_next_u64(s) >> U64(11)) * _INV_2_53


@njit(inline="always", cache=True)
def _neighbor(x, y, d, W, H):
    if d == 0:
        return (x + 1) % W, y
    if d == 1:
        return (x - 1) % W, y
    if d == 2:
        return x, (y + 1) % H
    return x, (y - 1) % H


@njit(inline="always", cache=True)
def _wfrac(states, x, y, koff, kp, target, W, H):
    """Kernel-weighted fraction of neighbors of (x, y) in state `target`."""
    w = 0.0
    for k in range(koff.shape[0]):
        xx = (x - koff[k, 0]) % W
        yy = (y - koff[k, 1]) % H
        if states[yy, xx] == target:
            w += kp[k]
    return w


@njit(inline="always", cache=True)
def _fractions(states, x, y, koff, kp, f, W, H):
    for i in range(f.shape[0]):
        f[i] = 0.0
    for k in range(koff.shape[0]):
        xx = (x - koff[k, 0]) % W
        yy = (y - koff[k, 1]) % H
        f[states[yy, xx]] += kp[k]


@njit(inline="always", cache=True)
def _flip(states, counts, x, y, new):
    counts[states[y, x]] -= 1
    counts[new] += 1
    states[y, x] = new


@njit(inline="always", cache=True)
def _react_instant(states, counts, x, y, rng, W, H):
    """r = inf: annihilate the fresh adsorbate with a uniformly chosen
    opposite-type nearest neighbor, if any."""
    s = states[y, x]
    opp = 3 - s
    m = 0
    for d in range(4):
        nx, ny = _neighbor(x, y, d, W, H)
        if states[ny, nx] == opp:
            m += 1
    if m == 0:
        return
    pick = int(_rand(rng) * m)
    if pick >= m:
        pick = m - 1
    for d in range(4):
        nx, ny = _neighbor(x, y, d, W, H)
        if states[ny, nx] == opp:
            if pick == 0:
                _flip(states, counts, x, y, 0)
                _flip(states, counts, nx, ny, 0)
                return
            pick -= 1


@njit(inline="always", cache=True)
def _is_absorbed(model_id, params, counts, N):
    if model_id == 2:  # host-pathogen: frozen when monochrome 1 or 3
        return counts[1] == N or counts[3] == N
    if model_id == 3:  # sexual
        return counts[1] == 0
    if model_id == 4:  # catalyst, finite r
        return counts[0] == 0 and (counts[1] == 0 or counts[2] == 0)
    if model_id == 8:  # catalyst, r = inf: full lattice is frozen
        return counts[0] == 0
    if model_id == 7:  # voter: frozen when monochrome
        for i in range(1, counts.shape[0]):
            if counts[i] == N:
                return True
        return False
    # contact-type models: frozen when all sites vacant
    occupied = 0
    for i in range(1, counts.shape[0]):
        occupied += counts[i]
    return occupied == 0


@njit(cache=True, nogil=True)
def run_chunk(model_id, params, states, counts,
              koff1, kp1, koff2, kp2, f,
              bound, stir, t, t_end, rng):
    """Advance the chain from t to t_end (or absorption).

    Mutates states, counts and rng in place.  Returns
    (time, absorbed, proposals, accepted); time < t_end only on absorption.
    """
    H, W = states.shape
    N = W * H
    btot = bound + stir
    total = btot * N
    proposals = 0
    accepted = 0
    while True:
        if _is_absorbed(model_id, params, counts, N):
            return t, True, proposals, accepted
        dt = -np.log1p(-_rand(rng)) / total
        if t + dt >= t_end:
            return t_end, False, proposals, accepted
        t += dt
        proposals += 1
        site = int(_rand(rng) * N)
        if site >= N:
            site = N - 1
        x = site % W
        y = site // W
        u = _rand(rng) * btot
        if u < stir:
            d = int(u * 4.0 / stir)
            if d > 3:
                d = 3
            nx, ny = _neighbor(x, y, d, W, H)
            s0 = states[y, x]
            states[y, x] = states[ny, nx]
            states[ny, nx] = s0
            accepted += 1
            continue
        u -= stir
        s = states[y, x]

        if model_id == 0:  # competing contact: [b1, b2, d1, d2]
            if s == 0:
                r = params[0] * _wfrac(states, x, y, koff1, kp1, 1, W, H)
                if u < r:
                    _flip(states, counts, x, y, 1)
                    accepted += 1
                    continue
                u -= r
                r = params[1] * _wfrac(states, x, y, koff2, kp2, 2, W, H)
                if u < r:
                    _flip(states, counts, x, y, 2)
                    accepted += 1
            elif u < params[1 + s]:
                _flip(states, counts, x, y, 0)
                accepted += 1

        elif model_id == 1:  # grass-bushes-trees: [b1, b2, d1, d2]
            if s != 2:
                r = params[1] * _wfrac(states, x, y, koff2, kp2, 2, W, H)
                if u < r:
                    _flip(states, counts, x, y, 2)
                    accepted += 1
                    continue
                u -= r
            if s == 0:
                r = params[0] * _wfrac(states, x, y, koff1, kp1, 1, W, H)
                if u < r:
                    _flip(states, counts, x, y, 1)
                    accepted += 1
            elif u < params[1 + s]:
                _flip(states, counts, x, y, 0)
                accepted += 1

        elif model_id == 2:  # host-pathogen: [alpha, g1, g2, g3]
            _fractions(states, x, y, koff1, kp1, f, W, H)
            if s == 1:
                r = params[0] * f[2]
                if u < r:
                    _flip(states, counts, x, y, 2)
                    accepted += 1
                    continue
                u -= r
                if u < params[1] * f[3]:
                    _flip(states, counts, x, y, 3)
                    accepted += 1
            elif s == 2:
                r = params[2] * (f[1] + f[2])
                if u < r:
                    _flip(states, counts, x, y, 1)
                    accepted += 1
                    continue
                u -= r
                if u < params[2] * f[3]:
                    _flip(states, counts, x, y, 3)
                    accepted += 1
            else:
                if u < params[3] * (f[1] + f[2]):
                    _flip(states, counts, x, y, 1)
                    accepted += 1

        elif model_id == 3:  # sexual: [beta]
            if s == 1:
                if u < 1.0:
                    _flip(states, counts, x, y, 0)
                    accepted += 1
            else:
                n = koff1.shape[0]
                k = 0
                for j in range(n):
                    xx = (x - koff1[j, 0]) % W
                    yy = (y - koff1[j, 1]) % H
                    if states[yy, xx] == 1:
                        k += 1
                if u < params[0] * k * (k - 1) / (n * (n - 1)):
                    _flip(states, counts, x, y, 1)
                    accepted += 1

        elif model_id == 4:  # catalyst, finite r: [p, q, r]
            if s == 0:
                if u < params[0]:
                    _flip(states, counts, x, y, 1)
                    accepted += 1
                    continue
                u -= params[0]
                q8 = params[1] / 8.0
                for d in range(4):
                    if u < q8:
                        nx, ny = _neighbor(x, y, d, W, H)
                        if states[ny, nx] == 0:
                            _flip(states, counts, x, y, 2)
                            _flip(states, counts, nx, ny, 2)
                            accepted += 1
                        break
                    u -= q8
            else:
                opp = 3 - s
                r8 = params[2] / 8.0
                for d in range(4):
                    if u < r8:
                        nx, ny = _neighbor(x, y, d, W, H)
                        if states[ny, nx] == opp:
                            _flip(states, counts, x, y, 0)
                            _flip(states, counts, nx, ny, 0)
                            accepted += 1
                        break
                    u -= r8

        elif model_id == 8:  # catalyst, r = inf: [p, q]
            if s == 0:
                if u < params[0]:
                    _flip(states, counts, x, y, 1)
                    accepted += 1
                    _react_instant(states, counts, x, y, rng, W, H)
                    continue
                u -= params[0]
                q8 = params[1] / 8.0
                for d in range(4):
                    if u < q8:
                        nx, ny = _neighbor(x, y, d, W, H)
                        if states[ny, nx] == 0:
                            _flip(states, counts, x, y, 2)
                            _flip(states, counts, nx, ny, 2)
                            accepted += 1
                            _react_instant(states, counts, x, y, rng, W, H)
                            if states[ny, nx] == 2:
                                _react_instant(states, counts, nx, ny, rng, W, H)
                        break
                    u -= q8

        elif model_id == 5:  # colicin2: [b1, b2, d1, d2, g]
            if s == 0:
                _fractions(states, x, y, koff1, kp1, f, W, H)
                if u < params[0] * f[1]:
                    _flip(states, counts, x, y, 1)
                    accepted += 1
                    continue
                u -= params[0] * f[1]
                if u < params[1] * f[2]:
                    _flip(states, counts, x, y, 2)
                    accepted += 1
            elif s == 1:
                if u < params[2]:
                    _flip(states, counts, x, y, 0)
                    accepted += 1
            else:
                f1 = _wfrac(states, x, y, koff1, kp1, 1, W, H)
                if u < params[3] + params[4] * f1:
                    _flip(states, counts, x, y, 0)
                    accepted += 1

        elif model_id == 6:  # colicin3: [b1, b2, b3, d1, d2, d3, g1, g2]
            if s == 0:
                _fractions(states, x, y, koff1, kp1, f, W, H)
                hit = False
                for i in range(1, 4):
                    r = params[i - 1] * f[i]
                    if u < r:
                        _flip(states, counts, x, y, i)
                        accepted += 1
                        hit = True
                        break
                    u -= r
                if hit:
                    continue
            elif s < 3:
                if u < params[2 + s]:
                    _flip(states, counts, x, y, 0)
                    accepted += 1
            else:
                _fractions(states, x, y, koff1, kp1, f, W, H)
                if u < params[5] + params[6] * f[1] + params[7] * f[2]:
                    _flip(states, counts, x, y, 0)
                    accepted += 1

        elif model_id == 7:  # voter: [k, lam row-major]
            kk = int(params[0])
            _fractions(states, x, y, koff1, kp1, f, W, H)
            for i in range(1, kk + 1):
                if i == s:
                    continue
                r = f[i] * params[1 + (i - 1) * kk + (s - 1)]
                if u < r:
                    _flip(states, counts, x, y, i)
                    accepted += 1
                    break
                u -= r

    return t, False, proposals, accepted


def run_fast(model, grid, t, t_end, rng_state, stirring_eps=None):
    """Drive run_chunk for one interval; mutates grid and rng_state.

    Returns (time, absorbed, proposals, accepted).
    """
    model_id, params, k1, k2 = model.fast_spec()
    stir = 0.0 if stirring_eps is None else 2.0 / stirring_eps ** 2
    counts = grid.counts()
    f = np.zeros(model.n_states)
    out = run_chunk(model_id, params, grid.states, counts,
                    k1.offsets, k1.probabilities,
                    k2.offsets, k2.probabilities, f,
                    model.site_bound, stir, float(t), float(t_end), rng_state)
    return out
