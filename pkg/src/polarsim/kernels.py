"""Compiled event-loop kernels for ensemble runs.

Same algorithm as the reference engine (lazy materialization, swap-with-last
removal, waiting times redrawn across snapshot boundaries), restructured
around pre-drawn randomness buffers so the hot loop is nopython numba.
Buffers are refilled preserving unconsumed tails, so every value drawn from
the generator is consumed in stream order and results do not depend on
buffer sizes. The kernels are cross-validated against the reference engine
in distribution by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, Stuck
from . import sphere

__all__ = ["TrajectoryData", "run_trajectory", "counts_hitting_raw"]

_DONE, _NEED_EXP, _NEED_UNI, _NEED_NRM, _TOO_SMALL = 0, 1, 2, 3, 4

# integer state slots
_N, _CLANID, _SNAP, _SNAPMOL, _EV_A, _EV_D, _EV_R, _PHASE = range(8)
# float state slots
_NOW, _TFLOOR = 0, 1

_EXP_BLOCK = 1 << 16
_UNI_BLOCK = 1 << 16
_NRM_CAP = 1 << 24


@njit(cache=True, nogil=True, inline="always")
def _substeps(elapsed, dt_max):
    k = int(math.ceil(elapsed / dt_max - 1e-9))
    if k < 1:
        k = 1
    return k


@njit(cache=True, nogil=True)
def _event_loop(pos, clan, last, sti, stf,
                n_total, k_on, k_off, k_fb, diff, radius, dt_max, t_end,
                snap_times, snap_pos, snap_clan, snap_n, snap_t, snap_next,
                exp_buf, uni_buf, nrm_buf, cur):
    n = sti[_N]
    next_clan = sti[_CLANID]
    snap_idx = sti[_SNAP]
    now = stf[_NOW]
    ce, cu, cn = cur[0], cur[1], cur[2]
    ne, nu, nn = exp_buf.shape[0], uni_buf.shape[0], nrm_buf.shape[0]
    n_snaps = snap_times.shape[0]
    inv_r2 = 1.0 / (radius * radius)

    while True:
        if sti[_PHASE] == 1:
            # materialize every molecule to the snapshot time, then record
            t_snap = snap_times[snap_idx]
            j = sti[_SNAPMOL]
            while j < n:
                el = t_snap - last[j]
                if diff > 0.0 and el > 0.0:
                    k = _substeps(el, dt_max)
                    if 3 * k > nn:
                        sti[_N] = n; sti[_CLANID] = next_clan
                        sti[_SNAP] = snap_idx; sti[_SNAPMOL] = j
                        stf[_NOW] = now
                        cur[0], cur[1], cur[2] = ce, cu, cn
                        return _TOO_SMALL
                    if cn + 3 * k > nn:
                        sti[_N] = n; sti[_CLANID] = next_clan
                        sti[_SNAP] = snap_idx; sti[_SNAPMOL] = j
                        stf[_NOW] = now
                        cur[0], cur[1], cur[2] = ce, cu, cn
                        return _NEED_NRM
                    dt = el / k
                    sdt = math.sqrt(diff * dt)
                    ddt = diff * dt * inv_r2
                    x = pos[j, 0]; y = pos[j, 1]; z = pos[j, 2]
                    for _ in range(k):
                        g1 = nrm_buf[cn]; g2 = nrm_buf[cn + 1]; g3 = nrm_buf[cn + 2]
                        cn += 3
                        dot = (x * g1 + y * g2 + z * g3) * inv_r2
                        nx = x + sdt * (g1 - dot * x) - ddt * x
                        ny = y + sdt * (g2 - dot * y) - ddt * y
                        nz = z + sdt * (g3 - dot * z) - ddt * z
                        s = radius / math.sqrt(nx * nx + ny * ny + nz * nz)
                        x = nx * s; y = ny * s; z = nz * s
                    pos[j, 0] = x; pos[j, 1] = y; pos[j, 2] = z
                last[j] = t_snap
                j += 1
            for i in range(n):
                snap_pos[snap_idx, i, 0] = pos[i, 0]
                snap_pos[snap_idx, i, 1] = pos[i, 1]
                snap_pos[snap_idx, i, 2] = pos[i, 2]
                snap_clan[snap_idx, i] = clan[i]
            snap_n[snap_idx] = n
            snap_t[snap_idx] = now
            snap_next[snap_idx] = next_clan
            snap_idx += 1
            sti[_PHASE] = 0
            sti[_SNAPMOL] = 0
            stf[_TFLOOR] = t_snap

        if snap_idx < n_snaps and now >= snap_times[snap_idx]:
            sti[_PHASE] = 1
            continue
        if snap_idx >= n_snaps and now >= t_end:
            sti[_N] = n; sti[_CLANID] = next_clan; sti[_SNAP] = snap_idx
            stf[_NOW] = now
            cur[0], cur[1], cur[2] = ce, cu, cn
            return _DONE

        boundary = t_end
        if snap_idx < n_snaps:
            boundary = snap_times[snap_idx]

        a_on = k_on * (n_total - n)
        a_off = k_off * n_total * n
        a_fb = k_fb * n * (n_total - n)
        a = a_on + a_off + a_fb
        if a <= 0.0:
            now = boundary
            continue

        # worst-case normals for this event; last[j] >= t_floor for all j
        if diff > 0.0:
            need = 3 * (_substeps(boundary - stf[_TFLOOR] + dt_max, dt_max) + 2)
        else:
            need = 3
        if need > nn:
            sti[_N] = n; sti[_CLANID] = next_clan; sti[_SNAP] = snap_idx
            stf[_NOW] = now
            cur[0], cur[1], cur[2] = ce, cu, cn
            return _TOO_SMALL
        if ce + 1 > ne or cu + 2 > nu or cn + need > nn:
            sti[_N] = n; sti[_CLANID] = next_clan; sti[_SNAP] = snap_idx
            stf[_NOW] = now
            cur[0], cur[1], cur[2] = ce, cu, cn
            if ce + 1 > ne:
                return _NEED_EXP
            if cu + 2 > nu:
                return _NEED_UNI
            return _NEED_NRM

        wait = exp_buf[ce] / a
        ce += 1
        if now + wait > boundary:
            now = boundary
            continue
        now += wait

        u = uni_buf[cu] * a
        cu += 1
        if u < a_on:
            g1 = nrm_buf[cn]; g2 = nrm_buf[cn + 1]; g3 = nrm_buf[cn + 2]
            cn += 3
            s = radius / math.sqrt(g1 * g1 + g2 * g2 + g3 * g3)
            pos[n, 0] = g1 * s; pos[n, 1] = g2 * s; pos[n, 2] = g3 * s
            clan[n] = next_clan
            last[n] = now
            next_clan += 1
            n += 1
            sti[_EV_A] += 1
        elif u < a_on + a_off:
            v = int(uni_buf[cu] * n)
            cu += 1
            if v >= n:
                v = n - 1
            n -= 1
            pos[v, 0] = pos[n, 0]; pos[v, 1] = pos[n, 1]; pos[v, 2] = pos[n, 2]
            clan[v] = clan[n]
            last[v] = last[n]
            sti[_EV_D] += 1
        else:
            p = int(uni_buf[cu] * n)
            cu += 1
            if p >= n:
                p = n - 1
            el = now - last[p]
            if diff > 0.0 and el > 0.0:
                k = _substeps(el, dt_max)
                dt = el / k
                sdt = math.sqrt(diff * dt)
                ddt = diff * dt * inv_r2
                x = pos[p, 0]; y = pos[p, 1]; z = pos[p, 2]
                for _ in range(k):
                    g1 = nrm_buf[cn]; g2 = nrm_buf[cn + 1]; g3 = nrm_buf[cn + 2]
                    cn += 3
                    dot = (x * g1 + y * g2 + z * g3) * inv_r2
                    nx = x + sdt * (g1 - dot * x) - ddt * x
                    ny = y + sdt * (g2 - dot * y) - ddt * y
                    nz = z + sdt * (g3 - dot * z) - ddt * z
                    s = radius / math.sqrt(nx * nx + ny * ny + nz * nz)
                    x = nx * s; y = ny * s; z = nz * s
                pos[p, 0] = x; pos[p, 1] = y; pos[p, 2] = z
            last[p] = now
            pos[n, 0] = pos[p, 0]; pos[n, 1] = pos[p, 1]; pos[n, 2] = pos[p, 2]
            clan[n] = clan[p]
            last[n] = now
            n += 1
            sti[_EV_R] += 1


@njit(cache=True, nogil=True)
def _counts_loop(state, n_total, k_on, k_off, k_fb, target, exp_buf, uni_buf, cur):
    # state: [n, events]; returns DONE or NEED_EXP/NEED_UNI; time in state_f
    n = state[0]
    events = state[1]
    ce, cu = cur[0], cur[1]
    ne, nu = exp_buf.shape[0], uni_buf.shape[0]
    t = 0.0
    dt_acc = 0.0
    while n < target:
        a_on = k_on * (n_total - n)
        a_off = k_off * n_total * n
        a_fb = k_fb * n * (n_total - n)
        a = a_on + a_off + a_fb
        if a <= 0.0:
            state[0] = n; state[1] = events
            cur[0], cur[1] = ce, cu
            return _TOO_SMALL, dt_acc
        if ce + 1 > ne:
            state[0] = n; state[1] = events
            cur[0], cur[1] = ce, cu
            return _NEED_EXP, dt_acc
        if cu + 1 > nu:
            state[0] = n; state[1] = events
            cur[0], cur[1] = ce, cu
            return _NEED_UNI, dt_acc
        dt_acc += exp_buf[ce] / a
        ce += 1
        if uni_buf[cu] * a < a_on + a_fb:
            n += 1
        else:
            n -= 1
        cu += 1
        events += 1
    state[0] = n; state[1] = events
    cur[0], cur[1] = ce, cu
    return _DONE, dt_acc


def _refill(buf, consumed, total, draw):
    """Shift the unconsumed tail to the front and top up with fresh draws."""
    rem = total - consumed
    if rem > 0:
        buf[:rem] = buf[consumed:total].copy()
    buf[rem:] = draw(total - rem)
    return 0


@dataclass
class TrajectoryData:
    """Raw kernel output for one run: per-snapshot arrays plus final state."""

    times: np.ndarray
    n: np.ndarray
    positions: np.ndarray
    clans: np.ndarray
    next_clan_ids: np.ndarray
    events: tuple
    final: dict


def run_trajectory(params, t_end, snapshot_times, dt_max, rng,
                   initial: dict | None = None,
                   exp_block: int = _EXP_BLOCK, uni_block: int = _UNI_BLOCK,
                   nrm_floor: int = 1 << 20) -> TrajectoryData:
    """Run the compiled event loop to t_end, recording deep-copied snapshots.

    `initial`, when given, is a dict with keys now/n/positions/clans/
    last_update/next_clan_id (as produced in `final`); otherwise the membrane
    starts empty at time zero. The waiting-time, uniform, and normal draws
    come from three child streams spawned off `rng`, each consumed strictly
    in order (refills preserve unconsumed tails), so results are independent
    of the buffer block sizes.
    """
    n_total = params.n_total
    snap_times = np.asarray(snapshot_times, dtype=float)
    n_snaps = snap_times.shape[0]
    if n_snaps and (np.any(np.diff(snap_times) < 0) or snap_times[0] < 0
                    or snap_times[-1] > t_end):
        raise ValueError("snapshot times must be ascending and lie in [0, t_end]")

    pos = np.zeros((n_total, 3))
    clan = np.zeros(n_total, dtype=np.int64)
    last = np.zeros(n_total)
    sti = np.zeros(8, dtype=np.int64)
    stf = np.zeros(2)
    if initial is not None:
        k = int(initial["n"])
        sti[_N] = k
        sti[_CLANID] = int(initial["next_clan_id"])
        stf[_NOW] = float(initial["now"])
        # molecules from a restored state may not be materialized to `now`
        stf[_TFLOOR] = float(np.min(initial["last_update"])) if k else float(initial["now"])
        pos[:k] = initial["positions"]
        clan[:k] = initial["clans"]
        last[:k] = initial["last_update"]

    snap_pos = np.zeros((n_snaps, n_total, 3))
    snap_clan = np.zeros((n_snaps, n_total), dtype=np.int64)
    snap_n = np.zeros(n_snaps, dtype=np.int64)
    snap_t = np.zeros(n_snaps)
    snap_next = np.zeros(n_snaps, dtype=np.int64)

    if params.diffusion > 0.0:
        bounds = np.concatenate(([stf[_TFLOOR]], snap_times, [t_end]))
        max_seg = float(np.max(np.diff(bounds), initial=0.0)) + dt_max
        worst = 3 * (sphere.substep_count(max_seg, dt_max) + 3)
    else:
        worst = 3
    n_nrm = max(nrm_floor, 2 * worst)
    if n_nrm > _NRM_CAP:
        raise ConfigError(
            f"dt_max={dt_max} needs {worst // 3} diffusion substeps per snapshot "
            "gap; increase dt_max or shrink the snapshot interval"
        )

    rng_exp, rng_uni, rng_nrm = rng.spawn(3)
    exp_buf = rng_exp.standard_exponential(exp_block)
    uni_buf = rng_uni.random(uni_block)
    nrm_buf = rng_nrm.standard_normal(n_nrm)
    cur = np.zeros(3, dtype=np.int64)

    while True:
        code = _event_loop(pos, clan, last, sti, stf,
                           n_total, params.k_on, params.k_off, params.k_fb,
                           params.diffusion, params.radius, dt_max, t_end,
                           snap_times, snap_pos, snap_clan, snap_n, snap_t,
                           snap_next, exp_buf, uni_buf, nrm_buf, cur)
        if code == _DONE:
            break
        if code == _NEED_EXP:
            cur[0] = _refill(exp_buf, int(cur[0]), exp_block, rng_exp.standard_exponential)
        elif code == _NEED_UNI:
            cur[1] = _refill(uni_buf, int(cur[1]), uni_block, rng_uni.random)
        elif code == _NEED_NRM:
            cur[2] = _refill(nrm_buf, int(cur[2]), n_nrm, rng_nrm.standard_normal)
        else:
            raise ConfigError("normals buffer cannot hold one materialization; "
                              "increase dt_max")

    n_final = int(sti[_N])
    final = {
        "now": float(stf[_NOW]),
        "n": n_final,
        "positions": pos[:n_final].copy(),
        "clans": clan[:n_final].copy(),
        "last_update": last[:n_final].copy(),
        "next_clan_id": int(sti[_CLANID]),
    }
    return TrajectoryData(
        times=snap_t, n=snap_n, positions=snap_pos, clans=snap_clan,
        next_clan_ids=snap_next,
        events=(int(sti[_EV_A]), int(sti[_EV_D]), int(sti[_EV_R])),
        final=final,
    )


def counts_hitting_raw(n_total, k_on, k_off, k_fb, target, rng):
    """Counts-only chain from n=0 until n >= target: (hitting time, events)."""
    state = np.zeros(2, dtype=np.int64)
    cur = np.zeros(2, dtype=np.int64)
    rng_exp, rng_uni = rng.spawn(2)
    exp_buf = rng_exp.standard_exponential(_EXP_BLOCK)
    uni_buf = rng_uni.random(_UNI_BLOCK)
    t = 0.0
    while True:
        code, dt = _counts_loop(state, n_total, float(k_on), float(k_off),
                                float(k_fb), target, exp_buf, uni_buf, cur)
        t += dt
        if code == _DONE:
            return t, int(state[1])
        if code == _NEED_EXP:
            cur[0] = _refill(exp_buf, int(cur[0]), _EXP_BLOCK, rng_exp.standard_exponential)
        elif code == _NEED_UNI:
            cur[1] = _refill(uni_buf, int(cur[1]), _UNI_BLOCK, rng_uni.random)
        else:
            raise Stuck("total event rate is zero before reaching the target")
