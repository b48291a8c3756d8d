"""Hot loops of the continuous-time walk, in numba and pure-numpy flavours.

Random stream per path: splitmix64 with state ``s``; each draw returns
``mix(s)`` and advances ``s`` by the golden increment.  Per jump the kernels
draw, in this order: the exponential holding time (rate ``d``), the axis
(uniform over ``d``), and, only for a free axis, the step sign.  The two
backends follow the same order, so integer outputs agree exactly.

Status codes per path: 0 ok, 1 event cap exceeded.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import HAVE_NUMBA
from .lattice import GOLDEN, MIX_C1, MIX_C2, hash_orientation_array, mix64_array

STATUS_OK = 0
STATUS_CAP = 1

_TWO_M53 = 1.0 / 9007199254740992.0


# --------------------------------------------------------------------------- numba

if HAVE_NUMBA:
    from numba import njit, prange, uint64

    @njit(inline="always")
    def _mix_nb(z):
        z = z + uint64(GOLDEN)
        z = (z ^ (z >> uint64(30))) * uint64(MIX_C1)
        z = (z ^ (z >> uint64(27))) * uint64(MIX_C2)
        return z ^ (z >> uint64(31))

    @njit(inline="always")
    def _zigzag_nb(c):
        if c >= 0:
            return uint64(2 * c)
        return uint64(-2 * c - 1)

    @njit
    def _orient_nb(seed, axis0, pos, d, period):
        h = _mix_nb(seed ^ uint64(axis0 + 1))
        for k in range(d):
            c = pos[k]
            if k == axis0:
                c = 0
            if period > 0:
                c = c % period
            h = _mix_nb(h ^ _zigzag_nb(c))
        if (h >> uint64(63)) == uint64(0):
            return 1
        return -1

    @njit(parallel=True)
    def _walk_samples_nb(d, oriented, period, env_seeds, path_seeds, times, event_cap,
                         out_pos, out_drift, out_events, status):
        n = env_seeds.shape[0]
        nt = times.shape[0]
        golden = uint64(GOLDEN)
        for p in prange(n):
            env = env_seeds[p]
            s = path_seeds[p]
            pos = np.zeros(d, dtype=np.int64)
            t = 0.0
            drift = 0.0
            count = 0
            sign1 = 0
            if oriented[0] == 1:
                sign1 = _orient_nb(env, 0, pos, d, period)
            k = 0
            while k < nt:
                u = _mix_nb(s)
                s = s + golden
                dt = -math.log1p(-float(u >> uint64(11)) * _TWO_M53) / d
                t_next = t + dt
                while k < nt and times[k] < t_next:
                    for j in range(d):
                        out_pos[p, k, j] = pos[j]
                    out_drift[p, k] = drift + sign1 * (times[k] - t)
                    out_events[p, k] = count
                    k += 1
                if k >= nt:
                    break
                if count >= event_cap:
                    status[p] = 1
                    break
                drift += sign1 * dt
                t = t_next
                u = _mix_nb(s)
                s = s + golden
                axis = int(((u >> uint64(32)) * uint64(d)) >> uint64(32))
                if oriented[axis] == 1:
                    step = _orient_nb(env, axis, pos, d, period)
                else:
                    u = _mix_nb(s)
                    s = s + golden
                    step = 1 if (u >> uint64(63)) == uint64(0) else -1
                pos[axis] += step
                count += 1
                if axis != 0 and oriented[0] == 1:
                    sign1 = _orient_nb(env, 0, pos, d, period)

    @njit(parallel=True)
    def _walk_laplace_nb(d, oriented, period, env_seeds, path_seeds, lambdas, horizons,
                         event_cap, out_acc, status):
        n = env_seeds.shape[0]
        nl = lambdas.shape[0]
        golden = uint64(GOLDEN)
        t_max = 0.0
        for l in range(nl):
            if horizons[l] > t_max:
                t_max = horizons[l]
        for p in prange(n):
            env = env_seeds[p]
            s = path_seeds[p]
            pos = np.zeros(d, dtype=np.int64)
            t = 0.0
            r2 = 0.0
            count = 0
            while t < t_max:
                u = _mix_nb(s)
                s = s + golden
                dt = -math.log1p(-float(u >> uint64(11)) * _TWO_M53) / d
                t_next = t + dt
                if r2 > 0.0:
                    for l in range(nl):
                        if t < horizons[l]:
                            end = min(t_next, horizons[l])
                            lam = lambdas[l]
                            out_acc[p, l] += r2 * math.exp(-lam * t) * -math.expm1(-lam * (end - t)) / lam
                if count >= event_cap:
                    status[p] = 1
                    break
                t = t_next
                u = _mix_nb(s)
                s = s + golden
                axis = int(((u >> uint64(32)) * uint64(d)) >> uint64(32))
                if oriented[axis] == 1:
                    step = _orient_nb(env, axis, pos, d, period)
                else:
                    u = _mix_nb(s)
                    s = s + golden
                    step = 1 if (u >> uint64(63)) == uint64(0) else -1
                pos[axis] += step
                count += 1
                r2 = 0.0
                for j in range(d):
                    r2 += float(pos[j] * pos[j])


# --------------------------------------------------------------------------- numpy

def _draw(state: np.ndarray, idx: np.ndarray) -> np.ndarray:
    u = mix64_array(state[idx])
    state[idx] += np.uint64(GOLDEN)
    return u


def _holding(u: np.ndarray, d: int) -> np.ndarray:
    return -np.log1p(-(u >> np.uint64(11)).astype(np.float64) * _TWO_M53) / d


def _choose_axis(u: np.ndarray, d: int) -> np.ndarray:
    return (((u >> np.uint64(32)) * np.uint64(d)) >> np.uint64(32)).astype(np.int64)


def _step(d, oriented, period, env_seeds, state, pos, idx):
    """Advance paths ``idx`` by one jump (axis draw plus optional sign draw)."""
    axis = _choose_axis(_draw(state, idx), d)
    step = np.empty(idx.size, dtype=np.int64)
    for a in range(d):
        sel = axis == a
        if not sel.any():
            continue
        rows = idx[sel]
        if oriented[a]:
            step[sel] = hash_orientation_array(env_seeds[rows], a + 1, _zero_col(pos[rows], a), period)
        else:
            u = _draw(state, rows)
            step[sel] = np.where((u >> np.uint64(63)) == 0, 1, -1)
    pos[idx, axis] += step
    return axis


def _zero_col(x: np.ndarray, col: int) -> np.ndarray:
    x = x.copy()
    x[:, col] = 0
    return x


def _walk_samples_np(d, oriented, period, env_seeds, path_seeds, times, event_cap,
                     out_pos, out_drift, out_events, status):
    n = env_seeds.shape[0]
    nt = times.shape[0]
    state = path_seeds.astype(np.uint64).copy()
    pos = np.zeros((n, d), dtype=np.int64)
    t = np.zeros(n)
    drift = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    k = np.zeros(n, dtype=np.int64)
    sign1 = np.zeros(n, dtype=np.int64)
    if oriented[0]:
        sign1[:] = hash_orientation_array(env_seeds, 1, pos, period)
    active = np.arange(n)
    while active.size:
        t_next = t[active] + _holding(_draw(state, active), d)
        while True:
            kk = k[active]
            pending = kk < nt
            pending[pending] = times[kk[pending]] < t_next[pending]
            if not pending.any():
                break
            rows = active[pending]
            kr = k[rows]
            out_pos[rows, kr, :] = pos[rows]
            out_drift[rows, kr] = drift[rows] + sign1[rows] * (times[kr] - t[rows])
            out_events[rows, kr] = count[rows]
            k[rows] += 1
        keep = k[active] < nt
        capped = keep & (count[active] >= event_cap)
        status[active[capped]] = STATUS_CAP
        keep &= ~capped
        active, t_next = active[keep], t_next[keep]
        if not active.size:
            break
        drift[active] += sign1[active] * (t_next - t[active])
        t[active] = t_next
        axis = _step(d, oriented, period, env_seeds, state, pos, active)
        count[active] += 1
        if oriented[0]:
            moved = active[axis != 0]
            if moved.size:
                sign1[moved] = hash_orientation_array(env_seeds[moved], 1, _zero_col(pos[moved], 0), period)


def _walk_laplace_np(d, oriented, period, env_seeds, path_seeds, lambdas, horizons,
                     event_cap, out_acc, status):
    n = env_seeds.shape[0]
    state = path_seeds.astype(np.uint64).copy()
    pos = np.zeros((n, d), dtype=np.int64)
    t = np.zeros(n)
    r2 = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    t_max = float(np.max(horizons))
    active = np.arange(n)
    while active.size:
        t0 = t[active]
        t_next = t0 + _holding(_draw(state, active), d)
        w = r2[active]
        for l, (lam, horizon) in enumerate(zip(lambdas, horizons)):
            live = (t0 < horizon) & (w > 0.0)
            if live.any():
                end = np.minimum(t_next[live], horizon)
                tl = t0[live]
                out_acc[active[live], l] += w[live] * np.exp(-lam * tl) * -np.expm1(-lam * (end - tl)) / lam
        capped = count[active] >= event_cap
        status[active[capped]] = STATUS_CAP
        keep = ~capped
        active, t_next = active[keep], t_next[keep]
        t[active] = t_next
        _step(d, oriented, period, env_seeds, state, pos, active)
        count[active] += 1
        r2[active] = np.sum(pos[active].astype(np.float64) ** 2, axis=1)
        active = active[t[active] < t_max]


def walk_samples(use_numba: bool, *args) -> None:
    if use_numba:
        _walk_samples_nb(*args)
    else:
        _walk_samples_np(*args)


def walk_laplace(use_numba: bool, *args) -> None:
    if use_numba:
        _walk_laplace_nb(*args)
    else:
        _walk_laplace_np(*args)
