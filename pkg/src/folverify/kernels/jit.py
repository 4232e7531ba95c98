import math

import numpy as np
from numba import njit, prange

from .tableau import (A21, A31, A32, A41, A42, A43, A51, A52, A53, A54, A61, A62, A63, A64, A65,
                      B1, B3, B4, B5, B6, E1, E3, E4, E5, E6, E7)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------- pfaffian


@njit(cache=True)
def _pf_one(A):
    n = A.shape[0]
    pf = 1.0
    for k in range(0, n, 2):
        best = 0.0
        bi = k
        bj = k + 1
        for i in range(k, n):
            for j in range(i + 1, n):
                v = abs(A[i, j])
                if v > best:
                    best = v
                    bi = i
                    bj = j
        if best == 0.0:
            return 0.0
        if bi != k:
            for r in range(n):
                tmp = A[r, bi]
                A[r, bi] = A[r, k]
                A[r, k] = tmp
            for r in range(n):
                tmp = A[bi, r]
                A[bi, r] = A[k, r]
                A[k, r] = tmp
            pf = -pf
            if bj == k:
                bj = bi
        if bj != k + 1:
            for r in range(n):
                tmp = A[r, bj]
                A[r, bj] = A[r, k + 1]
                A[r, k + 1] = tmp
            for r in range(n):
                tmp = A[bj, r]
                A[bj, r] = A[k + 1, r]
                A[k + 1, r] = tmp
            pf = -pf
        a = A[k, k + 1]
        pf *= a
        for r in range(k + 2, n):
            u = A[r, k + 1] / a
            w = A[r, k] / a
            for s in range(k + 2, n):
                A[r, s] -= u * A[k, s] - w * A[k + 1, s]
    return pf


@njit(cache=True, parallel=True)
def pfaffian_batch(ms):
    out = np.empty(ms.shape[0])
    for b in prange(ms.shape[0]):
        out[b] = _pf_one(ms[b].copy())
    return out


# ---------------------------------------------------------------- local model scalars


@njit(cache=True)
def _emoll(u):
    return math.exp(-1.0 / u) if u > 0.0 else 0.0


@njit(cache=True)
def _smoothstep(u):
    a = _emoll(u)
    b = _emoll(1.0 - u)
    return a / (a + b)


@njit(cache=True)
def _dsmoothstep(u):
    if u <= 0.0 or u >= 1.0:
        return 0.0
    a = _emoll(u)
    b = _emoll(1.0 - u)
    da = a / (u * u)
    db = -b / ((1.0 - u) * (1.0 - u))
    return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))


@njit(cache=True)
def _psi(t2, s, margin):
    lo = 0.25
    hi = (1.0 - margin) * (1.0 - margin)
    g = 1.0 - _smoothstep((t2 - lo) / (hi - lo))
    u = (s - 0.5) / (0.5 - margin)
    v = 1.0 - u * u
    h = math.exp(1.0 - 1.0 / v) if v > 0.0 else 0.0
    return g * h


@njit(cache=True)
def _rho_tilde(z, K, delta, grad):
    r2 = 0.0
    sz = 0.0
    for i in range(z.shape[0]):
        r2 += z[i] * z[i]
        sz += z[i]
    r0sq = 0.25 * delta * delta
    span = delta * delta - r0sq
    u = (r2 - r0sq) / span
    B = 1.0 - _smoothstep(u)
    rbar = -0.5 * K * r2 + sz
    if B == 1.0:
        for i in range(z.shape[0]):
            grad[i] = -K * z[i] + 1.0
        return rbar
    r = math.sqrt(r2)
    rho = 1.0 / r - 1.0
    r3 = r2 * r
    if B == 0.0:
        for i in range(z.shape[0]):
            grad[i] = -z[i] / r3
        return 0.0 * rbar + 1.0 * rho
    dB = -_dsmoothstep(u) * 2.0 / span
    for i in range(z.shape[0]):
        grad[i] = (rbar - rho) * dB * z[i] + B * (-K * z[i] + 1.0) + (1.0 - B) * (-z[i] / r3)
    return B * rbar + (1.0 - B) * rho


@njit(cache=True)
def rho_tilde_grad(Z, K, delta):
    vals = np.empty(Z.shape[0])
    grads = np.empty(Z.shape)
    for m in range(Z.shape[0]):
        vals[m] = _rho_tilde(Z[m], K, delta, grads[m])
    return vals, grads


# ---------------------------------------------------------------- fields


@njit(cache=True)
def _rhs(kind, y, p, out, scratch):
    d = y.shape[0]
    c = p[0]
    if kind == 0:
        out[0] = 1.0
        out[1] = c
    elif kind == 1:
        sp = 1.0 + p[5] * math.sin(y[0])
        out[0] = sp
        out[1] = sp * c
    elif kind == 2:
        nt = d - 3
        t2 = 0.0
        for i in range(nt):
            t2 += y[2 + i] * y[2 + i]
            out[2 + i] = 0.0
        psi = _psi(t2, y[d - 1], p[1])
        out[0] = psi
        out[1] = psi * c
        out[d - 1] = 1.0 - psi
    elif kind == 3:
        nt = int(p[4])
        t2 = 0.0
        for i in range(nt):
            t2 += y[2 + i] * y[2 + i]
            out[2 + i] = 0.0
        z = y[2 + nt:]
        s = _rho_tilde(z, p[2], p[3], scratch)
        psi = _psi(t2, s, p[1])
        g2 = 0.0
        for i in range(z.shape[0]):
            g2 += scratch[i] * scratch[i]
        out[0] = psi
        out[1] = psi * c
        for i in range(z.shape[0]):
            out[2 + nt + i] = (1.0 - psi) * scratch[i] / g2
    else:
        for i in range(d):
            out[i] = p[6 + i]


@njit(cache=True)
def _dp_step(kind, y, h, p, k, ytmp, y5, err, scratch):
    d = y.shape[0]
    _rhs(kind, y, p, k[0], scratch)
    for i in range(d):
        ytmp[i] = y[i] + h * A21 * k[0, i]
    _rhs(kind, ytmp, p, k[1], scratch)
    for i in range(d):
        ytmp[i] = y[i] + h * (A31 * k[0, i] + A32 * k[1, i])
    _rhs(kind, ytmp, p, k[2], scratch)
    for i in range(d):
        ytmp[i] = y[i] + h * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i])
    _rhs(kind, ytmp, p, k[3], scratch)
    for i in range(d):
        ytmp[i] = y[i] + h * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i] + A54 * k[3, i])
    _rhs(kind, ytmp, p, k[4], scratch)
    for i in range(d):
        ytmp[i] = y[i] + h * (A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i] + A64 * k[3, i] + A65 * k[4, i])
    _rhs(kind, ytmp, p, k[5], scratch)
    for i in range(d):
        y5[i] = y[i] + h * (B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i] + B5 * k[4, i] + B6 * k[5, i])
    _rhs(kind, y5, p, k[6], scratch)
    for i in range(d):
        err[i] = h * (E1 * k[0, i] + E3 * k[2, i] + E4 * k[3, i] + E5 * k[4, i] + E6 * k[5, i] + E7 * k[6, i])


@njit(cache=True)
def _err_norm(y, y5, err, tol):
    e = 0.0
    for i in range(y.shape[0]):
        sc = tol * (1.0 + max(abs(y[i]), abs(y5[i])))
        q = abs(err[i]) / sc
        if q > e:
            e = q
    return e


@njit(cache=True)
def _hermite(y0, f0, y1, f1, h, th, i):
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = th**3 - 2 * th**2 + th
    h01 = -2 * th**3 + 3 * th**2
    h11 = th**3 - th**2
    return h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]


@njit(cache=True)
def _wrap(x):
    r = (x + math.pi) % TWO_PI
    return r - math.pi


@njit(cache=True)
def _one(kind, y0, p, periodic, t_end, tol, h0, h_max, fixed, exit_index, exit_lo, exit_hi,
         transient, max_steps, rec_t, rec_y, do_record):
    d = y0.shape[0]
    y = y0.copy()
    k = np.empty((7, d))
    ytmp = np.empty(d)
    y5 = np.empty(d)
    err = np.empty(d)
    f0 = np.empty(d)
    scratch = np.empty(d)
    t = 0.0
    h = h0
    nsteps = 0
    nrej = 0
    status = 0
    maxerr = 0.0
    min_ret = np.inf
    t_ret = -1.0
    nrec = 0
    if do_record:
        rec_t[0] = 0.0
        for i in range(d):
            rec_y[0, i] = y[i]
        nrec = 1
    while t < t_end:
        if nsteps + nrej >= max_steps:
            status = 2
            break
        if t_end - t <= 1e-13 * max(1.0, abs(t)):
            break
        hs = min(h, t_end - t)
        if hs < 1e-14 * max(1.0, abs(t)):
            status = 2
            break
        _dp_step(kind, y, hs, p, k, ytmp, y5, err, scratch)
        en = _err_norm(y, y5, err, tol)
        if not fixed and en > 1.0:
            nrej += 1
            h = hs * max(0.2, 0.9 * en ** -0.2)
            continue
        for i in range(d):
            q = abs(err[i])
            if q > maxerr:
                maxerr = q
        # exit event on one coordinate
        if exit_index >= 0 and (y5[exit_index] < exit_lo or y5[exit_index] > exit_hi):
            for i in range(d):
                f0[i] = k[0, i]
            bound = exit_hi if y5[exit_index] > exit_hi else exit_lo
            lo = 0.0
            hi = 1.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                v = _hermite(y, f0, y5, k[6], hs, mid, exit_index)
                if (v - bound) * (y5[exit_index] - bound) > 0.0:
                    hi = mid
                else:
                    lo = mid
            th = hi
            for i in range(d):
                ytmp[i] = _hermite(y, f0, y5, k[6], hs, th, i)
            for i in range(d):
                y[i] = ytmp[i]
            t = t + th * hs
            nsteps += 1
            status = 1
            if do_record and nrec < rec_t.shape[0]:
                rec_t[nrec] = t
                for i in range(d):
                    rec_y[nrec, i] = y[i]
                nrec += 1
            break
        if transient >= 0.0 and t >= transient:
            # closest approach of the step chord to the start point
            dd = 0.0
            ds = 0.0
            for i in range(d):
                a0 = y[i] - y0[i]
                if periodic[i]:
                    a0 = _wrap(a0)
                sg = y5[i] - y[i]
                dd += a0 * sg
                ds += sg * sg
            tau = 0.0
            if ds > 0.0:
                tau = min(1.0, max(0.0, -dd / ds))
            dist2 = 0.0
            for i in range(d):
                a0 = y[i] - y0[i]
                if periodic[i]:
                    a0 = _wrap(a0)
                v = a0 + tau * (y5[i] - y[i])
                dist2 += v * v
            dist = math.sqrt(dist2)
            if dist < min_ret:
                min_ret = dist
                t_ret = t + tau * hs
        t = t + hs
        for i in range(d):
            y[i] = y5[i]
        nsteps += 1
        if do_record and nrec < rec_t.shape[0]:
            rec_t[nrec] = t
            for i in range(d):
                rec_y[nrec, i] = y[i]
            nrec += 1
        if not fixed:
            if en == 0.0:
                h = 5.0 * hs
            else:
                h = hs * min(5.0, max(0.2, 0.9 * en ** -0.2))
            h = min(h, h_max)
    return y, t, nsteps, nrej, status, maxerr, min_ret, t_ret, nrec


@njit(cache=True, parallel=True)
def integrate_many(kind, Y0, p, periodic, t_end, tol, h0, h_max, fixed, exit_index, exit_lo,
                   exit_hi, transient, max_steps):
    S, d = Y0.shape
    Yend = np.empty((S, d))
    tend = np.empty(S)
    nsteps = np.empty(S, dtype=np.int64)
    nrej = np.empty(S, dtype=np.int64)
    status = np.empty(S, dtype=np.int64)
    maxerr = np.empty(S)
    min_ret = np.empty(S)
    t_ret = np.empty(S)
    dummy_t = np.empty(1)
    dummy_y = np.empty((1, d))
    for s in prange(S):
        y, t, ns, nr, st, me, mr, tr, _ = _one(kind, Y0[s], p, periodic, t_end, tol, h0, h_max, fixed,
                                               exit_index, exit_lo, exit_hi, transient, max_steps,
                                               dummy_t, dummy_y, False)
        Yend[s] = y
        tend[s] = t
        nsteps[s] = ns
        nrej[s] = nr
        status[s] = st
        maxerr[s] = me
        min_ret[s] = mr
        t_ret[s] = tr
    return Yend, tend, nsteps, nrej, status, maxerr, min_ret, t_ret


@njit(cache=True)
def integrate_record(kind, y0, p, periodic, t_end, tol, h0, h_max, fixed, exit_index, exit_lo,
                     exit_hi, max_steps):
    d = y0.shape[0]
    rec_t = np.empty(max_steps + 1)
    rec_y = np.empty((max_steps + 1, d))
    y, t, ns, nr, st, me, mr, tr, nrec = _one(kind, y0, p, periodic, t_end, tol, h0, h_max, fixed,
                                              exit_index, exit_lo, exit_hi, -1.0, max_steps,
                                              rec_t, rec_y, True)
    return rec_t[:nrec].copy(), rec_y[:nrec].copy(), ns, nr, st, me
