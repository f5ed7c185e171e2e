"""Numba kernels for the walk engines and random-matrix products.

Every kernel draws uniforms as a pure function of (stream key, counter)
using the same splitmix64 construction as the numpy paths in _bits, so
trajectories are reproducible and schedule independent.  Walk kernels obey
a window protocol: they return NEED_LEFT/NEED_RIGHT when the walk touches
the realized window edge, the Python driver extends the environment, and
the kernel resumes from the packed state without consuming extra uniforms.
"""
from __future__ import annotations

import numpy as np
from numba import njit, uint64

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_M1 = uint64(0xBF58476D1CE4E5B9)
_M2 = uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

DONE = 0
NEED_LEFT = 1
NEED_RIGHT = 2
BUDGET = 3

# state vector slots for discrete walks
S_T, S_X, S_LEFTS, S_CP, S_LVL, S_MIN, S_MAX, S_RET = 0, 1, 2, 3, 4, 5, 6, 7
STATE_LEN = 8


@njit(cache=True, nogil=True, inline="always")
def _mix(z):
    z = (z ^ (z >> uint64(30))) * _M1
    z = (z ^ (z >> uint64(27))) * _M2
    return z ^ (z >> uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _u01(key, ctr):
    """Uniform in [0, 1) at counter ctr of the keyed stream."""
    return (_mix(key + (ctr + uint64(1)) * _GOLDEN) >> uint64(11)) * _INV53


@njit(cache=True, nogil=True, inline="always")
def _u01_open(key, ctr):
    """Uniform in (0, 1], safe for -log()."""
    return ((_mix(key + (ctr + uint64(1)) * _GOLDEN) >> uint64(11)) + uint64(1)) * _INV53


@njit(cache=True, nogil=True, inline="always")
def _child(key, i):
    """One absorption step of the key-derivation chain (matches _bits)."""
    return _mix((key + _GOLDEN) ^ _mix(i))


@njit(cache=True, nogil=True, inline="always")
def _pick(thresholds, u):
    n = thresholds.shape[0]
    for a in range(n - 1):
        if u < thresholds[a]:
            return a
    return n - 1


@njit(cache=True, nogil=True)
def nn_walk(p, lo, key, steps, cps, cp_pos, cp_maxabs, cp_returns, levels, lvl_t, lvl_lefts, stop_after_levels, path, record, state):
    """Nearest-neighbor walk; p[i] is the right-jump probability at site lo+i.

    Resumable: all progress lives in `state`; returns a window status code.
    cp_maxabs and cp_returns receive the running max |X| and origin-return
    count at each checkpoint; with stop_after_levels the walk ends once the
    last requested level is hit.
    """
    t = state[S_T]
    x = state[S_X]
    lefts = state[S_LEFTS]
    cp_i = state[S_CP]
    lvl_i = state[S_LVL]
    min_x = state[S_MIN]
    max_x = state[S_MAX]
    returns = state[S_RET]
    n = p.shape[0]
    ncp = cps.shape[0]
    nlvl = levels.shape[0]
    status = DONE
    while t < steps:
        idx = x - lo
        if idx < 0:
            status = NEED_LEFT
            break
        if idx >= n:
            status = NEED_RIGHT
            break
        u = _u01(key, uint64(t))
        t += 1
        if u < p[idx]:
            x += 1
            if x > max_x:
                max_x = x
        else:
            x -= 1
            lefts += 1
            if x < min_x:
                min_x = x
        if record:
            path[t] = x
        if x == 0:
            returns += 1
        if lvl_i < nlvl and x == levels[lvl_i]:
            lvl_t[lvl_i] = t
            lvl_lefts[lvl_i] = lefts
            lvl_i += 1
            if stop_after_levels and lvl_i == nlvl:
                if cp_i < ncp and t == cps[cp_i]:
                    cp_pos[cp_i] = x
                    cp_maxabs[cp_i] = max(max_x, -min_x)
                    cp_returns[cp_i] = returns
                    cp_i += 1
                break
        if cp_i < ncp and t == cps[cp_i]:
            cp_pos[cp_i] = x
            cp_maxabs[cp_i] = max(max_x, -min_x)
            cp_returns[cp_i] = returns
            cp_i += 1
    state[S_T] = t
    state[S_X] = x
    state[S_LEFTS] = lefts
    state[S_CP] = cp_i
    state[S_LVL] = lvl_i
    state[S_MIN] = min_x
    state[S_MAX] = max_x
    state[S_RET] = returns
    return status


@njit(cache=True, nogil=True)
def bounded_walk(atom_idx, table, L, lo, key, steps, cps, cp_pos, levels, lvl_t, lvl_lefts, path, record, state):
    """Bounded-jump walk; table[a, j] is p(j - L) for atom a.

    Jump selection scans from +R downward, so an L = R = 1 law with zero
    stay-probability reproduces nn_walk decisions bit for bit.
    """
    t = state[S_T]
    x = state[S_X]
    lefts = state[S_LEFTS]
    cp_i = state[S_CP]
    lvl_i = state[S_LVL]
    min_x = state[S_MIN]
    max_x = state[S_MAX]
    n = atom_idx.shape[0]
    width = table.shape[1]
    ncp = cps.shape[0]
    nlvl = levels.shape[0]
    status = DONE
    while t < steps:
        idx = x - lo
        if idx < 0:
            status = NEED_LEFT
            break
        if idx >= n:
            status = NEED_RIGHT
            break
        u = _u01(key, uint64(t))
        t += 1
        a = atom_idx[idx]
        acc = 0.0
        j = width - 1
        while j > 0:
            acc += table[a, j]
            if u < acc:
                break
            j -= 1
        jump = j - L
        x += jump
        if jump < 0:
            lefts += 1
            if x < min_x:
                min_x = x
        elif x > max_x:
            max_x = x
        if record:
            path[t] = x
        if lvl_i < nlvl and x == levels[lvl_i]:
            lvl_t[lvl_i] = t
            lvl_lefts[lvl_i] = lefts
            lvl_i += 1
        if cp_i < ncp and t == cps[cp_i]:
            cp_pos[cp_i] = x
            cp_i += 1
    state[S_T] = t
    state[S_X] = x
    state[S_LEFTS] = lefts
    state[S_CP] = cp_i
    state[S_LVL] = lvl_i
    state[S_MIN] = min_x
    state[S_MAX] = max_x
    return status


@njit(cache=True, nogil=True)
def escape_trials(p, lo, n_level, trials, key):
    """Count walks from 1 reaching n_level before 0 (quenched MC check)."""
    wins = 0
    for j in range(trials):
        kj = _child(key, uint64(j))
        x = 1
        t = uint64(0)
        while 0 < x < n_level:
            u = _u01(kj, t)
            t += uint64(1)
            if u < p[x - lo]:
                x += 1
            else:
                x -= 1
        if x == n_level:
            wins += 1
    return wins


# ctrw state: ints [events, x, cp_i, -, -, min_x, max_x], floats [t_now]


@njit(cache=True, nogil=True)
def ctrw_walk(bonds, lo_b, key, t_max, max_events, cps, cp_pos, state, fstate):
    """Continuous-time walk among bonds; bonds[k] = rate of (lo_b+k, lo_b+k+1).

    Sojourn at x is exponential with rate c(x,x-1)+c(x,x+1); the jump goes
    right with probability c(x,x+1)/total.  Two uniforms per event, at
    counters 2*events and 2*events+1.
    """
    events = state[0]
    x = state[1]
    cp_i = state[2]
    min_x = state[S_MIN]
    max_x = state[S_MAX]
    t_now = fstate[0]
    nb = bonds.shape[0]
    ncp = cps.shape[0]
    status = DONE
    while t_now < t_max:
        kr = x - lo_b
        kl = kr - 1
        if kl < 0:
            status = NEED_LEFT
            break
        if kr >= nb:
            status = NEED_RIGHT
            break
        if events >= max_events:
            status = BUDGET
            break
        cl = bonds[kl]
        cr = bonds[kr]
        total = cl + cr
        u1 = _u01_open(key, uint64(2 * events))
        dt = -np.log(u1) / total
        while cp_i < ncp and cps[cp_i] < t_now + dt:
            cp_pos[cp_i] = x
            cp_i += 1
        t_now += dt
        if t_now >= t_max:
            break  # sojourn crosses the horizon; no jump before t_max
        u2 = _u01(key, uint64(2 * events + 1))
        events += 1
        if u2 < cr / total:
            x += 1
            if x > max_x:
                max_x = x
        else:
            x -= 1
            if x < min_x:
                min_x = x
    while status == DONE and cp_i < ncp:
        cp_pos[cp_i] = x
        cp_i += 1
    state[0] = events
    state[1] = x
    state[2] = cp_i
    state[S_MIN] = min_x
    state[S_MAX] = max_x
    fstate[0] = t_now
    return status


@njit(cache=True, nogil=True)
def balanced_walk(d, thresholds, axis_table, env_key, walk_key, steps, cps, cp_pos, cp_returns, qv):
    """Balanced walk on the d-dimensional lattice, environment hashed on the
    fly from the site coordinates (no realized window).

    Records per-axis positions and origin-return counts at checkpoints and
    accumulates the one-sided axis probabilities along the path (the
    quadratic-variation sums).  Returns the return count.
    """
    x0 = np.int64(0)
    x1 = np.int64(0)
    x2 = np.int64(0)
    returns = 0
    cp_i = 0
    ncp = cps.shape[0]
    for t in range(steps):
        h = _child(env_key, uint64(x0))
        h = _child(h, uint64(x1))
        if d == 3:
            h = _child(h, uint64(x2))
        ue = (h >> uint64(11)) * _INV53
        atom = _pick(thresholds, ue)
        for i in range(d):
            qv[i] += axis_table[atom, i]
        u = _u01(walk_key, uint64(t))
        acc = 0.0
        sel = 2 * d - 1
        for i in range(2 * d):
            acc += axis_table[atom, i // 2]
            if u < acc:
                sel = i
                break
        axis = sel // 2
        step = 1 if sel % 2 == 0 else -1
        if axis == 0:
            x0 += step
        elif axis == 1:
            x1 += step
        else:
            x2 += step
        if x0 == 0 and x1 == 0 and (d == 2 or x2 == 0):
            returns += 1
        if cp_i < ncp and t + 1 == cps[cp_i]:
            cp_pos[cp_i, 0] = x0
            cp_pos[cp_i, 1] = x1
            if d == 3:
                cp_pos[cp_i, 2] = x2
            cp_returns[cp_i] = returns
            cp_i += 1
    return returns


@njit(cache=True, nogil=True)
def lyap_top(top_rows, thresholds, env_key, n, cadence, batch_ends, batch_logs):
    """Top Lyapunov exponent of the companion-matrix product stream.

    Multiplies a unit vector, renormalizing every `cadence` steps and at
    batch boundaries; batch_logs[b] receives the cumulative log norm at the
    end of batch b.  Returns the total accumulated log norm.
    """
    d = top_rows.shape[1]
    v = np.empty(d)
    for i in range(d):
        v[i] = 1.0 / np.sqrt(d)
    w = np.empty(d)
    logsum = 0.0
    bi = 0
    nb = batch_ends.shape[0]
    for t in range(n):
        u = _u01(env_key, uint64(t))
        a = _pick(thresholds, u)
        s = 0.0
        for j in range(d):
            s += top_rows[a, j] * v[j]
        for i in range(d - 1, 0, -1):
            w[i] = v[i - 1]
        w[0] = s
        for i in range(d):
            v[i] = w[i]
        at_batch_end = bi < nb and t + 1 == batch_ends[bi]
        if (t + 1) % cadence == 0 or at_batch_end:
            if d == 1:
                nrm = abs(v[0])
            else:
                ss = 0.0
                for i in range(d):
                    ss += v[i] * v[i]
                nrm = np.sqrt(ss)
            if nrm <= 0.0:
                return np.nan
            logsum += np.log(nrm)
            for i in range(d):
                v[i] /= nrm
        if at_batch_end:
            batch_logs[bi] = logsum
            bi += 1
    return logsum


@njit(cache=True, nogil=True)
def lyap_frame(top_rows, thresholds, env_key, n, k, cadence, batch_ends, batch_logs):
    """Log-volume growth of an orthonormal k-frame under the product stream.

    Gram-Schmidt at every `cadence` steps and at batch boundaries;
    batch_logs[b, i] receives the cumulative log r_ii.  Returns 0 on
    success, 1 on frame degeneracy.
    """
    d = top_rows.shape[1]
    q = np.zeros((d, k))
    for c in range(k):
        q[c, c] = 1.0
    acc = np.zeros(k)
    new0 = np.empty(k)
    bi = 0
    nb = batch_ends.shape[0]
    for t in range(n):
        u = _u01(env_key, uint64(t))
        a = _pick(thresholds, u)
        for c in range(k):
            s = 0.0
            for j in range(d):
                s += top_rows[a, j] * q[j, c]
            new0[c] = s
        for c in range(k):
            for i in range(d - 1, 0, -1):
                q[i, c] = q[i - 1, c]
            q[0, c] = new0[c]
        at_batch_end = bi < nb and t + 1 == batch_ends[bi]
        if (t + 1) % cadence == 0 or at_batch_end:
            for c in range(k):
                # Two projection passes: one pass loses the small orthogonal
                # remainder to cancellation when exponents are well separated.
                for _ in range(2):
                    for prev in range(c):
                        r = 0.0
                        for i in range(d):
                            r += q[i, prev] * q[i, c]
                        for i in range(d):
                            q[i, c] -= r * q[i, prev]
                ss = 0.0
                for i in range(d):
                    ss += q[i, c] * q[i, c]
                nrm = np.sqrt(ss)
                if nrm < 1e-280:
                    return 1
                acc[c] += np.log(nrm)
                for i in range(d):
                    q[i, c] /= nrm
        if at_batch_end:
            for c in range(k):
                batch_logs[bi, c] = acc[c]
            bi += 1
    return 0


@njit(cache=True, nogil=True)
def cf_eval(rates, s, tail):
    """Finite continued fraction evaluated inward from the given tail seed."""
    g = tail
    for j in range(rates.shape[0] - 1, -1, -1):
        g = 1.0 / (1.0 / rates[j] + 1.0 / (s + g))
    return g
