"""Compiled inner loops for the classical flow.

Fourth-order Yoshida composition of the drift-kick-drift leapfrog in extended
phase space (time advances with the drift), so the kick sees the correct
intermediate time. All kernels work on flat float64 arrays.
"""
import math

import numpy as np
from numba import njit

_CBRT2 = 2.0 ** (1.0 / 3.0)
W1 = 1.0 / (2.0 - _CBRT2)
W0 = -_CBRT2 / (2.0 - _CBRT2)
# drift / kick weights of the merged composition D K D K D K D
DRIFT = np.array([0.5 * W1, 0.5 * (W1 + W0), 0.5 * (W1 + W0), 0.5 * W1])
KICK = np.array([W1, W0, W1])


@njit(cache=True)
def _force(q, t, gp, gm):
    return -0.5 * gp * math.sin(q + t) - 0.5 * gm * math.sin(q - t)


@njit(cache=True)
def _dforce(q, t, gp, gm):
    return -0.5 * gp * math.cos(q + t) - 0.5 * gm * math.cos(q - t)


@njit(cache=True)
def flow(p, q, t0, duration, nsteps, gp, gm):
    """Propagate arrays (p, q) from t0 over ``duration`` with ``nsteps`` steps.

    Returns new arrays; q is left unwrapped so windings can be counted.
    """
    n = p.shape[0]
    po = p.copy()
    qo = q.copy()
    h = duration / nsteps
    for i in range(n):
        pi_ = po[i]
        qi = qo[i]
        t = t0
        for _ in range(nsteps):
            for s in range(3):
                d = DRIFT[s] * h
                qi += pi_ * d
                t += d
                pi_ += KICK[s] * h * _force(qi, t, gp, gm)
            d = DRIFT[3] * h
            qi += pi_ * d
            t += d
        po[i] = pi_
        qo[i] = qi
    return po, qo


@njit(cache=True)
def flow_tangent(p, q, t0, duration, nsteps, gp, gm):
    """Like ``flow`` but also returns the exact Jacobian of the discrete map.

    Jacobian rows/cols are ordered (p, q): J[i] = d(p1, q1)/d(p0, q0).
    """
    n = p.shape[0]
    po = p.copy()
    qo = q.copy()
    jac = np.zeros((n, 2, 2))
    h = duration / nsteps
    for i in range(n):
        pi_ = po[i]
        qi = qo[i]
        # tangent vectors: columns for dp0 and dq0
        a_p, a_q = 1.0, 0.0
        b_p, b_q = 0.0, 1.0
        t = t0
        for _ in range(nsteps):
            for s in range(3):
                d = DRIFT[s] * h
                qi += pi_ * d
                a_q += a_p * d
                b_q += b_p * d
                t += d
                k = KICK[s] * h
                fp = _dforce(qi, t, gp, gm)
                pi_ += k * _force(qi, t, gp, gm)
                a_p += k * fp * a_q
                b_p += k * fp * b_q
            d = DRIFT[3] * h
            qi += pi_ * d
            a_q += a_p * d
            b_q += b_p * d
            t += d
        po[i] = pi_
        qo[i] = qi
        jac[i, 0, 0] = a_p
        jac[i, 0, 1] = b_p
        jac[i, 1, 0] = a_q
        jac[i, 1, 1] = b_q
    return po, qo, jac


@njit(cache=True)
def _wrap(q):
    twopi = 2.0 * math.pi
    return ((q + math.pi) % twopi) - math.pi


@njit(cache=True)
def strobe_orbits(p, q, n_iter, nsteps, gp, gm, p_escape):
    """Iterate the period map; returns (P, Q) of shape (n_seeds, n_iter + 1).

    Rows stop updating (NaN-filled) once |p| exceeds p_escape.
    """
    n = p.shape[0]
    twopi = 2.0 * math.pi
    P = np.full((n, n_iter + 1), np.nan)
    Q = np.full((n, n_iter + 1), np.nan)
    one_p = np.empty(1)
    one_q = np.empty(1)
    for i in range(n):
        pi_ = p[i]
        qi = _wrap(q[i])
        P[i, 0] = pi_
        Q[i, 0] = qi
        for k in range(n_iter):
            one_p[0] = pi_
            one_q[0] = qi
            a, b = flow(one_p, one_q, 0.0, twopi, nsteps, gp, gm)
            pi_ = a[0]
            qi = _wrap(b[0])
            P[i, k + 1] = pi_
            Q[i, k + 1] = qi
            if abs(pi_) > p_escape:
                break
    return P, Q


@njit(cache=True)
def divergence_test(p, q, offset, n_iter, nsteps, gp, gm, p_escape, threshold):
    """Paired-orbit chaos indicator.

    Returns codes (0 regular, 1 chaotic, 2 escaped) and the number of periods
    actually run for each seed.
    """
    n = p.shape[0]
    twopi = 2.0 * math.pi
    codes = np.zeros(n, dtype=np.int64)
    ran = np.zeros(n, dtype=np.int64)
    buf_p = np.empty(2)
    buf_q = np.empty(2)
    for i in range(n):
        buf_p[0] = p[i]
        buf_q[0] = q[i]
        buf_p[1] = p[i] + offset
        buf_q[1] = q[i]
        code = 0
        k = 0
        while k < n_iter:
            a, b = flow(buf_p, buf_q, 0.0, twopi, nsteps, gp, gm)
            buf_p[0] = a[0]
            buf_p[1] = a[1]
            buf_q[0] = _wrap(b[0])
            dq = _wrap(b[1] - b[0])
            buf_q[1] = buf_q[0] + dq
            k += 1
            if abs(buf_p[0]) > p_escape:
                code = 2
                break
            sep = math.sqrt((buf_p[1] - buf_p[0]) ** 2 + dq * dq)
            if sep > threshold:
                code = 1
                break
        codes[i] = code
        ran[i] = k
    return codes, ran


@njit(cache=True)
def rotation_about(p, q, pc, qc, n_iter, nsteps, gp, gm):
    """Mean winding of orbits around a co-integrated reference orbit.

    The reference (pc, qc) is normally the period-1 island center. The
    angle of (q - qc, p - pc) is unwrapped after every time step, so the
    result is the unaliased number of turns per drive period (signed).
    """
    n = p.shape[0]
    twopi = 2.0 * math.pi
    h = twopi / nsteps
    out = np.empty(n)
    for i in range(n):
        x_p = p[i]
        x_q = q[i]
        c_p = pc
        c_q = qc
        t = 0.0
        prev = math.atan2(x_q - c_q, x_p - c_p)
        total = 0.0
        for _ in range(n_iter * nsteps):
            for s in range(3):
                d = DRIFT[s] * h
                x_q += x_p * d
                c_q += c_p * d
                t += d
                k = KICK[s] * h
                x_p += k * _force(x_q, t, gp, gm)
                c_p += k * _force(c_q, t, gp, gm)
            d = DRIFT[3] * h
            x_q += x_p * d
            c_q += c_p * d
            t += d
            dq = x_q - c_q
            dq = ((dq + math.pi) % twopi) - math.pi
            ang = math.atan2(dq, x_p - c_p)
            da = ang - prev
            if da > math.pi:
                da -= twopi
            elif da < -math.pi:
                da += twopi
            total += da
            prev = ang
        out[i] = total / (twopi * n_iter)
    return out


@njit(cache=True)
def island_membership(p, q, offset, n_iter, nsteps, gp, gm, p_escape, threshold, drift):
    """Paired-orbit test plus a co-moving libration check.

    Codes: 0 regular librating orbit, 1 chaotic, 2 escaped, 3 regular but
    rotating relative to the frame q - drift*t (i.e. outside the island).
    """
    n = p.shape[0]
    twopi = 2.0 * math.pi
    codes = np.zeros(n, dtype=np.int64)
    buf_p = np.empty(2)
    buf_q = np.empty(2)
    for i in range(n):
        buf_p[0] = p[i]
        buf_q[0] = q[i]
        buf_p[1] = p[i] + offset
        buf_q[1] = q[i]
        q_start = q[i]
        code = 0
        for k in range(n_iter):
            a, b = flow(buf_p, buf_q, 0.0, twopi, nsteps, gp, gm)
            if abs(b[0] - q_start - drift * twopi * (k + 1)) > twopi:
                code = 3
            dq = b[1] - b[0]
            buf_p[0] = a[0]
            buf_p[1] = a[1]
            buf_q[0] = b[0]
            buf_q[1] = b[0] + dq
            if abs(a[0]) > p_escape:
                code = 2
                break
            sep = math.sqrt((a[1] - a[0]) ** 2 + dq * dq)
            if sep > threshold:
                code = 1
                break
            if code == 3:
                break
        codes[i] = code
    return codes
