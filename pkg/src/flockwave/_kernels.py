"""Compiled time steppers for the banded first-order flock system.

State layout is ``y = (z_1..z_N, zdot_1..zdot_N)``. Only the agents listed in
``obs`` are recorded, so long sweeps never hold the full state history.
"""
import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_OVERFLOW = 1
STATUS_NONFINITE = 2
STATUS_UNDERFLOW = 3
STATUS_MAXSTEPS = 4

# Dormand-Prince 5(4)
C2, C3, C4, C5 = 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9
A21 = 1.0 / 5
A31, A32 = 3.0 / 40, 9.0 / 40
A41, A42, A43 = 44.0 / 45, -56.0 / 15, 32.0 / 9
A51, A52, A53, A54 = 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729
A61, A62, A63, A64, A65 = 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656
A71, A73, A74, A75, A76 = 35.0 / 384, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525, -1.0 / 40,
)
# continuous extension
D1, D3, D4, D5, D6, D7 = (
    -12715105075.0 / 11282082432,
    87487479700.0 / 32700410799,
    -10690763975.0 / 1880347072,
    701980252875.0 / 199316789632,
    -1453857185.0 / 822651844,
    69997945.0 / 29380423,
)


@njit(cache=True)
def rhs(t, y, dy, cols, wx, wv, fx, fv, v0):
    n = cols.shape[0]
    nb = cols.shape[1]
    for k in range(n):
        acc = 0.0
        for s in range(nb):
            c = cols[k, s]
            acc += wx[k, s] * y[c] + wv[k, s] * y[n + c]
        dy[k] = y[n + k]
        dy[n + k] = acc
    z0 = v0 * t
    dy[n] += fx[0] * z0 + fv[0] * v0
    if n > 1:
        dy[n + 1] += fx[1] * z0 + fv[1] * v0


@njit(cache=True)
def _record(y, obs, n, zrec, vrec, row):
    for i in range(obs.shape[0]):
        zrec[row, i] = y[obs[i]]
        vrec[row, i] = y[n + obs[i]]


@njit(cache=True)
def _bad_state(y, n, limit):
    for k in range(2 * n):
        if not np.isfinite(y[k]):
            return STATUS_NONFINITE
    for k in range(n):
        if abs(y[k]) > limit:
            return STATUS_OVERFLOW
    return STATUS_OK


@njit(cache=True)
def rk4(y0, cols, wx, wv, fx, fv, v0, dt, n_steps, every, obs, limit):
    """Classical RK4 with t_k = k * dt; records every ``every`` steps.

    Returns (zrec, vrec, rows_written, status).
    """
    n = cols.shape[0]
    m = 2 * n
    n_rows = n_steps // every + 1
    zrec = np.full((n_rows, obs.shape[0]), np.nan)
    vrec = np.full((n_rows, obs.shape[0]), np.nan)
    y = y0.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    _record(y, obs, n, zrec, vrec, 0)
    row = 1
    status = _bad_state(y, n, limit)
    if status != STATUS_OK:
        return zrec, vrec, row, status
    for step in range(n_steps):
        t = step * dt
        rhs(t, y, k1, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        rhs(t + 0.5 * dt, tmp, k2, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        rhs(t + 0.5 * dt, tmp, k3, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            tmp[i] = y[i] + dt * k3[i]
        rhs(t + dt, tmp, k4, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        status = _bad_state(y, n, limit)
        if (step + 1) % every == 0:
            _record(y, obs, n, zrec, vrec, row)
            row += 1
        if status != STATUS_OK:
            break
    return zrec, vrec, row, status


@njit(cache=True)
def dopri5(y0, cols, wx, wv, fx, fv, v0, t_out, atol, rtol, h0, h_min, max_steps, obs, limit):
    """Adaptive Dormand-Prince 5(4) with dense output at the times ``t_out``.

    Returns (zrec, vrec, rows_written, status, accepted, rejected).
    """
    n = cols.shape[0]
    m = 2 * n
    n_out = t_out.shape[0]
    n_obs = obs.shape[0]
    zrec = np.full((n_out, n_obs), np.nan)
    vrec = np.full((n_out, n_obs), np.nan)
    y = y0.copy()
    y1 = np.empty(m)
    tmp = np.empty(m)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    k5 = np.empty(m)
    k6 = np.empty(m)
    k7 = np.empty(m)
    t = t_out[0]
    t_end = t_out[n_out - 1]
    _record(y, obs, n, zrec, vrec, 0)
    row = 1
    status = _bad_state(y, n, limit)
    if status != STATUS_OK:
        return zrec, vrec, row, status, 0, 0
    rhs(t, y, k1, cols, wx, wv, fx, fv, v0)
    h = h0
    accepted = 0
    rejected = 0
    fac_old = 1e-4
    while row < n_out:
        if accepted + rejected >= max_steps:
            status = STATUS_MAXSTEPS
            break
        if h < h_min:
            status = STATUS_UNDERFLOW
            break
        if t + h > t_end:
            h = t_end - t
        for i in range(m):
            tmp[i] = y[i] + h * A21 * k1[i]
        rhs(t + C2 * h, tmp, k2, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(t + C3 * h, tmp, k3, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(t + C4 * h, tmp, k4, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(t + C5 * h, tmp, k5, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        rhs(t + h, tmp, k6, cols, wx, wv, fx, fv, v0)
        for i in range(m):
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
        rhs(t + h, y1, k7, cols, wx, wv, fx, fv, v0)
        err = 0.0
        for i in range(m):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(y1[i]))
            err += (e / sc) ** 2
        err = np.sqrt(err / m)
        # PI step-size controller (Hairer & Wanner, beta = 0.04)
        if err == 0.0:
            fac = 10.0
        else:
            fac = 0.9 * err ** -0.17 * fac_old ** 0.04
            fac = min(10.0, max(0.2, fac))
        if err <= 1.0:
            t_new = t + h
            # dense output for every requested time inside (t, t_new]
            while row < n_out and t_out[row] <= t_new:
                theta = (t_out[row] - t) / h
                th1 = 1.0 - theta
                for q in range(n_obs):
                    for off in (0, n):
                        i = obs[q] + off
                        ydiff = y1[i] - y[i]
                        bspl = h * k1[i] - ydiff
                        r4 = ydiff - h * k7[i] - bspl
                        r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                        val = y[i] + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * r5)))
                        if off == 0:
                            zrec[row, q] = val
                        else:
                            vrec[row, q] = val
                row += 1
            for i in range(m):
                y[i] = y1[i]
                k1[i] = k7[i]
            t = t_new
            accepted += 1
            fac_old = max(err, 1e-4)
            status = _bad_state(y, n, limit)
            if status != STATUS_OK:
                break
            h = h * fac
        else:
            rejected += 1
            h = h * min(1.0, fac)
    return zrec, vrec, row, status, accepted, rejected
