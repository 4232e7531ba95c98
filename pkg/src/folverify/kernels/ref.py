"""Pure-numpy twins of the numba kernels in :mod:`folverify.kernels.jit`."""

import math

import numpy as np

from .tableau import (A21, A31, A32, A41, A42, A43, A51, A52, A53, A54, A61, A62, A63, A64, A65,
                      B1, B3, B4, B5, B6, E1, E3, E4, E5, E6, E7)

TWO_PI = 2.0 * math.pi


def pfaffian_batch(ms):
    A = np.array(ms, dtype=float, copy=True)
    nb, n, _ = A.shape
    pf = np.ones(nb)
    alive = np.ones(nb, dtype=bool)
    rows = np.arange(nb)
    iu, ju = np.triu_indices(n, 1)
    for k in range(0, n, 2):
        mask = (iu >= k)
        ii, jj = iu[mask], ju[mask]
        vals = np.abs(A[:, ii, jj])
        best = np.argmax(vals, axis=1)  # first maximum in row-major order, same as the loop version
        bmax = vals[rows, best]
        dead = bmax == 0.0
        pf[dead & alive] = 0.0
        alive &= ~dead
        bi = ii[best].copy()
        bj = jj[best].copy()
        perm = np.tile(np.arange(n), (nb, 1))
        sw1 = alive & (bi != k)
        perm[sw1, k] = bi[sw1]
        perm[sw1, bi[sw1]] = k
        pf[sw1] = -pf[sw1]
        bj = np.where(sw1 & (bj == k), bi, bj)
        sw2 = alive & (bj != k + 1)
        # second transposition composes with the first
        tmp = perm[sw2, k + 1].copy()
        perm[sw2, k + 1] = perm[sw2, bj[sw2]]
        perm[sw2, bj[sw2]] = tmp
        pf[sw2] = -pf[sw2]
        A = A[rows[:, None, None], perm[:, :, None], perm[:, None, :]]
        a = A[:, k, k + 1]
        safe = np.where(alive, a, 1.0)
        pf = np.where(alive, pf * a, pf)
        if k + 2 < n:
            u = A[:, k + 2:, k + 1] / safe[:, None]
            w = A[:, k + 2:, k] / safe[:, None]
            upd = u[:, :, None] * A[:, None, k, k + 2:] - w[:, :, None] * A[:, None, k + 1, k + 2:]
            A[:, k + 2:, k + 2:] -= np.where(alive[:, None, None], upd, 0.0)
    return np.where(alive, pf, 0.0)


def _emoll(u):
    pos = u > 0.0
    return np.where(pos, np.exp(-1.0 / np.where(pos, u, 1.0)), 0.0)


def _smoothstep(u):
    a = _emoll(u)
    b = _emoll(1.0 - u)
    return a / (a + b)


def _dsmoothstep(u):
    inside = (u > 0.0) & (u < 1.0)
    us = np.where(inside, u, 0.5)
    a = _emoll(us)
    b = _emoll(1.0 - us)
    da = a / (us * us)
    db = -b / ((1.0 - us) * (1.0 - us))
    return np.where(inside, (da * (a + b) - a * (da + db)) / ((a + b) * (a + b)), 0.0)


def _psi(t2, s, margin):
    lo = 0.25
    hi = (1.0 - margin) * (1.0 - margin)
    g = 1.0 - _smoothstep((t2 - lo) / (hi - lo))
    u = (s - 0.5) / (0.5 - margin)
    v = 1.0 - u * u
    pos = v > 0.0
    h = np.where(pos, np.exp(1.0 - 1.0 / np.where(pos, v, 1.0)), 0.0)
    return g * h


def rho_tilde_grad(Z, K, delta):
    Z = np.asarray(Z, dtype=float)
    r2 = np.sum(Z * Z, axis=-1)
    sz = np.sum(Z, axis=-1)
    r0sq = 0.25 * delta * delta
    span = delta * delta - r0sq
    u = (r2 - r0sq) / span
    B = 1.0 - _smoothstep(u)
    rbar = -0.5 * K * r2 + sz
    inner = B == 1.0
    r = np.sqrt(np.where(inner, 1.0, r2))
    rho = 1.0 / r - 1.0
    r3 = (r * r) * r
    dB = -_dsmoothstep(u) * 2.0 / span
    gbar = -K * Z + 1.0
    grho = -Z / r3[..., None]
    g = ((rbar - rho) * dB)[..., None] * Z + B[..., None] * gbar + (1.0 - B)[..., None] * grho
    g = np.where(inner[..., None], gbar, np.where((B == 0.0)[..., None], grho, g))
    val = np.where(inner, rbar, B * rbar + (1.0 - B) * rho)
    return val, g


def _rhs(kind, Y, p):
    if callable(kind):
        return kind(Y)
    S, d = Y.shape
    out = np.zeros((S, d))
    c = p[0]
    if kind == 0:
        out[:, 0] = 1.0
        out[:, 1] = c
    elif kind == 1:
        sp = 1.0 + p[5] * np.sin(Y[:, 0])
        out[:, 0] = sp
        out[:, 1] = sp * c
    elif kind == 2:
        t2 = np.sum(Y[:, 2:d - 1] ** 2, axis=1)
        psi = _psi(t2, Y[:, d - 1], p[1])
        out[:, 0] = psi
        out[:, 1] = psi * c
        out[:, d - 1] = 1.0 - psi
    elif kind == 3:
        nt = int(p[4])
        t2 = np.sum(Y[:, 2:2 + nt] ** 2, axis=1)
        s, g = rho_tilde_grad(Y[:, 2 + nt:], p[2], p[3])
        psi = _psi(t2, s, p[1])
        g2 = np.sum(g * g, axis=1)
        out[:, 0] = psi
        out[:, 1] = psi * c
        out[:, 2 + nt:] = ((1.0 - psi) / g2)[:, None] * g
    else:
        out[:] = p[6:6 + d]
    return out


def _dp_step(kind, Y, H, p):
    h = H[:, None]
    k1 = _rhs(kind, Y, p)
    k2 = _rhs(kind, Y + h * (A21 * k1), p)
    k3 = _rhs(kind, Y + h * (A31 * k1 + A32 * k2), p)
    k4 = _rhs(kind, Y + h * (A41 * k1 + A42 * k2 + A43 * k3), p)
    k5 = _rhs(kind, Y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), p)
    k6 = _rhs(kind, Y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), p)
    Y5 = Y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
    k7 = _rhs(kind, Y5, p)
    err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
    return Y5, err, k1, k7


def _hermite(y0, f0, y1, f1, h, th):
    th = th[:, None]
    h = h[:, None]
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = th**3 - 2 * th**2 + th
    h01 = -2 * th**3 + 3 * th**2
    h11 = th**3 - th**2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _wrap(x):
    return (x + math.pi) % TWO_PI - math.pi


def _run(kind, Y0, p, periodic, t_end, tol, h0, h_max, fixed, exit_index, exit_lo, exit_hi,
         transient, max_steps, record):
    Y0 = np.asarray(Y0, dtype=float)
    S, d = Y0.shape
    Y = Y0.copy()
    t = np.zeros(S)
    h = np.full(S, float(h0))
    nsteps = np.zeros(S, dtype=np.int64)
    nrej = np.zeros(S, dtype=np.int64)
    status = np.zeros(S, dtype=np.int64)
    maxerr = np.zeros(S)
    min_ret = np.full(S, np.inf)
    t_ret = np.full(S, -1.0)
    active = np.ones(S, dtype=bool)
    per = np.asarray(periodic, dtype=bool)
    rec_t, rec_y = ([0.0], [Y[0].copy()]) if record else (None, None)
    while True:
        active &= t_end - t > 1e-13 * np.maximum(1.0, np.abs(t))
        over = active & (nsteps + nrej >= max_steps)
        status[over] = 2
        active &= ~over
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        y, tt = Y[idx], t[idx]
        hs = np.minimum(h[idx], t_end - tt)
        tiny = hs < 1e-14 * np.maximum(1.0, np.abs(tt))
        if tiny.any():
            status[idx[tiny]] = 2
            active[idx[tiny]] = False
            keep = ~tiny
            idx, y, tt, hs = idx[keep], y[keep], tt[keep], hs[keep]
            if idx.size == 0:
                continue
        y5, err, f0, f1 = _dp_step(kind, y, hs, p)
        sc = tol * (1.0 + np.maximum(np.abs(y), np.abs(y5)))
        en = np.max(np.abs(err) / sc, axis=1)
        acc = np.ones(idx.size, dtype=bool) if fixed else en <= 1.0
        rej = ~acc
        if rej.any():
            nrej[idx[rej]] += 1
            h[idx[rej]] = hs[rej] * np.maximum(0.2, 0.9 * en[rej] ** -0.2)
        ia = idx[acc]
        if ia.size == 0:
            continue
        y, y5, err, f0, f1, hs_a, en_a, tt = y[acc], y5[acc], err[acc], f0[acc], f1[acc], hs[acc], en[acc], tt[acc]
        maxerr[ia] = np.maximum(maxerr[ia], np.max(np.abs(err), axis=1))
        exited = np.zeros(ia.size, dtype=bool)
        if exit_index >= 0:
            v = y5[:, exit_index]
            exited = (v < exit_lo) | (v > exit_hi)
            if exited.any():
                ex = np.nonzero(exited)[0]
                bound = np.where(v[ex] > exit_hi, exit_hi, exit_lo)
                lo = np.zeros(ex.size)
                hi = np.ones(ex.size)
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    val = _hermite(y[ex], f0[ex], y5[ex], f1[ex], hs_a[ex], mid)[:, exit_index]
                    same = (val - bound) * (v[ex] - bound) > 0.0
                    hi = np.where(same, mid, hi)
                    lo = np.where(same, lo, mid)
                Y[ia[ex]] = _hermite(y[ex], f0[ex], y5[ex], f1[ex], hs_a[ex], hi)
                t[ia[ex]] = tt[ex] + hi * hs_a[ex]
                nsteps[ia[ex]] += 1
                status[ia[ex]] = 1
                active[ia[ex]] = False
                if record:
                    rec_t.append(float(t[ia[ex]][0]))
                    rec_y.append(Y[ia[ex]][0].copy())
        ok = ~exited
        io = ia[ok]
        if io.size == 0:
            continue
        y, y5, hs_a, en_a, tt = y[ok], y5[ok], hs_a[ok], en_a[ok], tt[ok]
        if transient >= 0.0:
            tr = tt >= transient
            if tr.any():
                a0 = y[tr] - Y0[io[tr]]
                a0 = np.where(per, _wrap(a0), a0)
                sg = y5[tr] - y[tr]
                dd = np.sum(a0 * sg, axis=1)
                ds = np.sum(sg * sg, axis=1)
                tau = np.where(ds > 0.0, np.minimum(1.0, np.maximum(0.0, -dd / np.where(ds > 0.0, ds, 1.0))), 0.0)
                dist = np.sqrt(np.sum((a0 + tau[:, None] * sg) ** 2, axis=1))
                better = dist < min_ret[io[tr]]
                j = io[tr][better]
                min_ret[j] = dist[better]
                t_ret[j] = tt[tr][better] + tau[better] * hs_a[tr][better]
        t[io] = tt + hs_a
        Y[io] = y5
        nsteps[io] += 1
        if record:
            rec_t.append(float(t[io][0]))
            rec_y.append(Y[io][0].copy())
        if not fixed:
            grow = np.where(en_a == 0.0, 5.0 * hs_a,
                            hs_a * np.minimum(5.0, np.maximum(0.2, 0.9 * np.where(en_a == 0.0, 1.0, en_a) ** -0.2)))
            h[io] = np.minimum(grow, h_max)
    out = (Y, t, nsteps, nrej, status, maxerr, min_ret, t_ret)
    if record:
        return out, np.array(rec_t), np.array(rec_y)
    return out


def integrate_many(kind, Y0, p, periodic, t_end, tol, h0, h_max, fixed, exit_index, exit_lo,
                   exit_hi, transient, max_steps):
    return _run(kind, Y0, p, periodic, t_end, tol, h0, h_max, fixed, exit_index, exit_lo, exit_hi,
                transient, max_steps, False)


def integrate_record(kind, y0, p, periodic, t_end, tol, h0, h_max, fixed, exit_index, exit_lo,
                     exit_hi, max_steps):
    (Y, t, ns, nr, st, me, _, _), rt, ry = _run(kind, np.asarray(y0, dtype=float)[None], p, periodic,
                                                t_end, tol, h0, h_max, fixed, exit_index, exit_lo,
                                                exit_hi, -1.0, max_steps, True)
    return rt, ry, ns[0], nr[0], st[0], me[0]
