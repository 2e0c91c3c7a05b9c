"""Per-cone kernels for the interior-point solver.

Second-order cone blocks of equal dimension are stored as rows of a 2-D
array. Each kernel has a loop version (compiled with numba when enabled) and
a vectorized numpy version with identical results.
"""

import math

import numpy as np

from .._jit import USE_NUMBA, njit


def _nt_scaling_loop(s, z):
    k, q = s.shape
    W = np.zeros((k, q, q))
    Winv = np.zeros((k, q, q))
    lam = np.zeros((k, q))
    for i in range(k):
        s1n = 0.0
        z1n = 0.0
        for j in range(1, q):
            s1n += s[i, j] * s[i, j]
            z1n += z[i, j] * z[i, j]
        s1n = math.sqrt(s1n)
        z1n = math.sqrt(z1n)
        snrm = math.sqrt((s[i, 0] - s1n) * (s[i, 0] + s1n))
        znrm = math.sqrt((z[i, 0] - z1n) * (z[i, 0] + z1n))
        sz = 0.0
        for j in range(q):
            sz += s[i, j] * z[i, j]
        gam = math.sqrt(0.5 * (1.0 + sz / (snrm * znrm)))
        eta = math.sqrt(snrm / znrm)
        w0 = (s[i, 0] / snrm + z[i, 0] / znrm) / (2.0 * gam)
        W[i, 0, 0] = eta * w0
        Winv[i, 0, 0] = w0 / eta
        for j in range(1, q):
            wj = (s[i, j] / snrm - z[i, j] / znrm) / (2.0 * gam)
            W[i, 0, j] = eta * wj
            W[i, j, 0] = eta * wj
            Winv[i, 0, j] = -wj / eta
            Winv[i, j, 0] = -wj / eta
        for j in range(1, q):
            wj = (s[i, j] / snrm - z[i, j] / znrm) / (2.0 * gam)
            for l in range(1, q):
                wl = (s[i, l] / snrm - z[i, l] / znrm) / (2.0 * gam)
                v = wj * wl / (1.0 + w0)
                if j == l:
                    v += 1.0
                W[i, j, l] = eta * v
                Winv[i, j, l] = v / eta
        for j in range(q):
            acc = 0.0
            for l in range(q):
                acc += W[i, j, l] * z[i, l]
            lam[i, j] = acc
    return W, Winv, lam


def _nt_scaling_numpy(s, z):
    k, q = s.shape
    s1n = np.linalg.norm(s[:, 1:], axis=1)
    z1n = np.linalg.norm(z[:, 1:], axis=1)
    snrm = np.sqrt((s[:, 0] - s1n) * (s[:, 0] + s1n))
    znrm = np.sqrt((z[:, 0] - z1n) * (z[:, 0] + z1n))
    sb = s / snrm[:, None]
    zb = z / znrm[:, None]
    gam = np.sqrt(0.5 * (1.0 + np.einsum("ij,ij->i", sb, zb)))
    wb = sb.copy()
    wb[:, 0] += zb[:, 0]
    wb[:, 1:] -= zb[:, 1:]
    wb /= 2.0 * gam[:, None]
    eta = np.sqrt(snrm / znrm)
    w0, w1 = wb[:, 0], wb[:, 1:]
    inner = np.eye(q - 1)[None] + np.einsum("ij,ik->ijk", w1, w1) / (1.0 + w0)[:, None, None]
    B = np.zeros((k, q, q))
    B[:, 0, 0] = w0
    B[:, 0, 1:] = w1
    B[:, 1:, 0] = w1
    B[:, 1:, 1:] = inner
    Binv = B.copy()
    Binv[:, 0, 1:] *= -1.0
    Binv[:, 1:, 0] *= -1.0
    W = eta[:, None, None] * B
    Winv = Binv / eta[:, None, None]
    lam = np.einsum("ijk,ik->ij", W, z)
    return W, Winv, lam


def _max_step_loop(u, d):
    k, q = u.shape
    alpha = np.inf
    for i in range(k):
        u1n = 0.0
        ud = 0.0
        d1n = 0.0
        for j in range(1, q):
            u1n += u[i, j] * u[i, j]
            ud += u[i, j] * d[i, j]
            d1n += d[i, j] * d[i, j]
        u1n = math.sqrt(u1n)
        a = d[i, 0] * d[i, 0] - d1n
        b = u[i, 0] * d[i, 0] - ud
        c = (u[i, 0] - u1n) * (u[i, 0] + u1n)
        if c < 0.0:
            c = 0.0
        r = np.inf
        disc = b * b - a * c
        if a == 0.0:
            if b < 0.0:
                r = -c / (2.0 * b)
        elif disc >= 0.0:
            sq = math.sqrt(disc)
            qq = -(b + sq) if b >= 0.0 else -(b - sq)
            r1 = qq / a
            r2 = c / qq if qq != 0.0 else np.inf
            if r1 > 0.0 and r1 < r:
                r = r1
            if r2 > 0.0 and r2 < r:
                r = r2
        if d[i, 0] < 0.0:
            r0 = -u[i, 0] / d[i, 0]
            if r0 < r:
                r = r0
        if r < alpha:
            alpha = r
    return alpha


def _max_step_numpy(u, d):
    if u.shape[0] == 0:
        return np.inf
    u1n = np.linalg.norm(u[:, 1:], axis=1)
    a = d[:, 0] ** 2 - np.sum(d[:, 1:] ** 2, axis=1)
    b = u[:, 0] * d[:, 0] - np.einsum("ij,ij->i", u[:, 1:], d[:, 1:])
    c = np.maximum((u[:, 0] - u1n) * (u[:, 0] + u1n), 0.0)
    r = np.full(u.shape[0], np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = (a == 0.0) & (b < 0.0)
        r[lin] = -c[lin] / (2.0 * b[lin])
        disc = b * b - a * c
        quad = (a != 0.0) & (disc >= 0.0)
        sq = np.sqrt(np.where(quad, disc, 0.0))
        qq = np.where(b >= 0.0, -(b + sq), -(b - sq))
        r1 = np.where(quad, qq / a, np.inf)
        r2 = np.where(quad & (qq != 0.0), c / qq, np.inf)
        r = np.where((r1 > 0) & (r1 < r), r1, r)
        r = np.where((r2 > 0) & (r2 < r), r2, r)
        r0 = np.where(d[:, 0] < 0.0, -u[:, 0] / d[:, 0], np.inf)
    return float(np.min(np.minimum(r, r0)))


nt_scaling_numba = njit(_nt_scaling_loop)
max_step_numba = njit(_max_step_loop)

if USE_NUMBA:
    nt_scaling = nt_scaling_numba
    max_step = max_step_numba
else:
    nt_scaling = _nt_scaling_numpy
    max_step = _max_step_numpy

nt_scaling_numpy = _nt_scaling_numpy
max_step_numpy = _max_step_numpy
