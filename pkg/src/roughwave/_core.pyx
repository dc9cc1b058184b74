# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray integrator and oscillatory lambda-sum.

Same calling convention as :mod:`roughwave._core_py`.  Rays are integrated
one at a time with stack buffers, so the state size is capped at MAXDIM.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, pow, cos, sin

cnp.import_array()

cdef enum:
    MAXCOL = 6
    MAXDIM = 42

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Params:
    double eps
    double c[3]
    double w
    double kappa
    double v[3]
    double S[3][3]
    double R


cdef inline void inv3(double a[3][3], double out[3][3]) nogil:
    cdef double det = (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                       - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                       + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))
    cdef double r = 1.0 / det
    out[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) * r
    out[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * r
    out[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * r
    out[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) * r
    out[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * r
    out[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * r
    out[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) * r
    out[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * r
    out[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * r


cdef void rhs_one(Params* P, const double* y, double* f, int m) nogil:
    cdef double d[3], Bk[3], nk[3], g[3], Sg[3], Wp[3]
    cdef double gam[3][3], Gam[3][3], Bkl[3][3], Hpp[3][3], M[3][3], Hxx[3][3]
    cdef double w2 = P.w * P.w
    cdef double r2 = 0.0, E, n, q, s, s3, w1, w2v, vp, a
    cdef int i, j, k, c
    cdef const double *dx
    cdef const double *dp
    for i in range(3):
        d[i] = y[i] - P.c[i]
        r2 += d[i] * d[i]
    E = P.eps * exp(-r2 / w2)
    n = 1.0 + P.kappa * E
    for i in range(3):
        Bk[i] = -2.0 / w2 * d[i] * E
        nk[i] = P.kappa * Bk[i]
        for j in range(3):
            gam[i][j] = E * P.S[i][j] + (1.0 if i == j else 0.0)
    inv3(gam, Gam)
    q = 0.0
    vp = 0.0
    for i in range(3):
        g[i] = Gam[i][0] * y[3] + Gam[i][1] * y[4] + Gam[i][2] * y[5]
        q += y[3 + i] * g[i]
        vp += P.v[i] * y[3 + i]
    s = sqrt(q)
    for i in range(3):
        Sg[i] = P.S[i][0] * g[0] + P.S[i][1] * g[1] + P.S[i][2] * g[2]
    w1 = g[0] * Sg[0] + g[1] * Sg[1] + g[2] * Sg[2]
    for i in range(3):
        f[i] = n / s * g[i] - E * P.v[i]
        f[3 + i] = -(nk[i] * s - n * w1 / (2.0 * s) * Bk[i] - Bk[i] * vp)
    if m == 0:
        return

    for i in range(3):
        Wp[i] = Gam[i][0] * Sg[0] + Gam[i][1] * Sg[1] + Gam[i][2] * Sg[2]
    w2v = Sg[0] * Wp[0] + Sg[1] * Wp[1] + Sg[2] * Wp[2]
    s3 = s * s * s
    for i in range(3):
        for j in range(3):
            Bkl[i][j] = (4.0 / (w2 * w2) * d[i] * d[j] - (2.0 / w2 if i == j else 0.0)) * E
    for i in range(3):
        for k in range(3):
            Hpp[i][k] = n * (Gam[i][k] / s - g[i] * g[k] / s3)
            M[i][k] = (g[i] * nk[k] / s - n / s * Wp[i] * Bk[k]
                       + n * w1 / (2.0 * s3) * g[i] * Bk[k] - P.v[i] * Bk[k])
            Hxx[i][k] = (P.kappa * Bkl[i][k] * s
                         - (nk[i] * Bk[k] + nk[k] * Bk[i]) * w1 / (2.0 * s)
                         + n * (2.0 * Bk[i] * Bk[k] * w2v - Bkl[i][k] * w1) / (2.0 * s)
                         - n * w1 * w1 / (4.0 * s3) * Bk[i] * Bk[k]
                         - Bkl[i][k] * vp)
    for c in range(m):
        dx = y + 6 + 6 * c
        dp = dx + 3
        for i in range(3):
            a = 0.0
            for k in range(3):
                a += M[i][k] * dx[k] + Hpp[i][k] * dp[k]
            f[6 + 6 * c + i] = a
            a = 0.0
            for k in range(3):
                a -= Hxx[i][k] * dx[k] + M[k][i] * dp[k]
            f[9 + 6 * c + i] = a


cdef int integrate_one(Params* P, double* y, double t, double tend, int m, double rtol,
                       double atol, long max_steps, double h0, cnp.int64_t* nsteps) nogil:
    cdef int dim = 6 + 6 * m
    cdef double k1[MAXDIM], k2[MAXDIM], k3[MAXDIM], k4[MAXDIM], k5[MAXDIM]
    cdef double k6[MAXDIM], k7[MAXDIM], tmp[MAXDIM], ynew[MAXDIM]
    cdef double direction = 1.0 if tend >= t else -1.0
    cdef double h, err, e, sc, fac, ay, an
    cdef int i, last
    cdef long attempts = 0
    nsteps[0] = 0
    if tend == t:
        return 0
    h = direction * (h0 if h0 < fabs(tend - t) else fabs(tend - t))
    rhs_one(P, y, k1, m)
    while True:
        attempts += 1
        last = 0
        if fabs(h) >= fabs(tend - t):
            h = tend - t
            last = 1
        for i in range(dim):
            tmp[i] = y[i] + h * A21 * k1[i]
        rhs_one(P, tmp, k2, m)
        for i in range(dim):
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs_one(P, tmp, k3, m)
        for i in range(dim):
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs_one(P, tmp, k4, m)
        for i in range(dim):
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs_one(P, tmp, k5, m)
        for i in range(dim):
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        rhs_one(P, tmp, k6, m)
        for i in range(dim):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
        rhs_one(P, ynew, k7, m)
        err = 0.0
        for i in range(dim):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            ay = fabs(y[i])
            an = fabs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            e = fabs(e) / sc
            if e > err:
                err = e
        if err > 0.0:
            fac = 0.9 * pow(err, -0.2)
        else:
            fac = 5.0
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        if err <= 1.0:
            for i in range(dim):
                y[i] = ynew[i]
                k1[i] = k7[i]
            t = tend if last else t + h
            nsteps[0] += 1
            if fabs(y[0]) > P.R or fabs(y[1]) > P.R or fabs(y[2]) > P.R:
                return 3
            if last:
                return 0
        elif fac > 1.0:
            fac = 1.0
        h = h * fac
        if fabs(h) < 1e-14 * (1.0 if fabs(t) < 1.0 else fabs(t)):
            return 2
        if nsteps[0] >= max_steps or attempts > 10 * max_steps:
            return 1


cdef void load_params(const double[::1] params, Params* P):
    cdef int i, j
    P.eps = params[0]
    for i in range(3):
        P.c[i] = params[1 + i]
        P.v[i] = params[6 + i]
        for j in range(3):
            P.S[i][j] = params[9 + 3 * i + j]
    P.w = params[4]
    P.kappa = params[5]
    P.R = params[18]


def rhs(params, y, int m):
    """Characteristic vector field for a batch of states, shape (N, 6 + 6m)."""
    cdef Params P
    cdef const double[::1] pv = np.ascontiguousarray(params, dtype=np.float64)
    load_params(pv, &P)
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty((yv.shape[0], yv.shape[1]))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t r
    for r in range(yv.shape[0]):
        rhs_one(&P, &yv[r, 0], &ov[r, 0], m)
    return out


def integrate_rays(params, y0, t0, t1, int m, double rtol=1e-11, double atol=1e-12,
                   long max_steps=100000, double h0=0.01):
    """Advance every ray from t0[i] to t1[i]; see :func:`roughwave._core_py.integrate_rays`."""
    if m < 0 or m > MAXCOL:
        raise ValueError(f"number of columns must lie in [0, {MAXCOL}]")
    cdef Params P
    cdef const double[::1] pv = np.ascontiguousarray(params, dtype=np.float64)
    load_params(pv, &P)
    y = np.array(y0, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t N = y.shape[0]
    if y.shape[1] != 6 + 6 * m:
        raise ValueError("state width does not match the number of columns")
    cdef double[:, ::1] yv = y
    cdef const double[::1] tv0 = np.ascontiguousarray(np.broadcast_to(t0, (N,)), dtype=np.float64)
    cdef const double[::1] tv1 = np.ascontiguousarray(np.broadcast_to(t1, (N,)), dtype=np.float64)
    nsteps = np.zeros(N, dtype=np.int64)
    status = np.zeros(N, dtype=np.int64)
    cdef cnp.int64_t[::1] nv = nsteps
    cdef cnp.int64_t[::1] sv = status
    cdef Py_ssize_t r
    with nogil:
        for r in range(N):
            sv[r] = integrate_one(&P, &yv[r, 0], tv0[r], tv1[r], m, rtol, atol,
                                  max_steps, h0, &nv[r])
    return y, nsteps, status


def osc_sum(phase, amp, double lam0, double dlam, wts):
    """sum_n amp[i, n] sum_k wts[k] exp(1j (lam0 + k dlam) phase[i, n]), shape (M,)."""
    ph = np.atleast_2d(np.asarray(phase, dtype=np.float64))
    cdef const double[:, ::1] pv = np.ascontiguousarray(ph)
    cdef const double[:, ::1] av = np.ascontiguousarray(np.broadcast_to(np.asarray(amp, dtype=np.float64), ph.shape))
    cdef const double[::1] wv = np.ascontiguousarray(wts, dtype=np.float64)
    cdef Py_ssize_t Mn = pv.shape[0], Nn = pv.shape[1], K = wv.shape[0]
    out_re = np.zeros(Mn)
    out_im = np.zeros(Mn)
    cdef double[::1] ore = out_re
    cdef double[::1] oim = out_im
    cdef Py_ssize_t i, n, k
    cdef double cr, ci, sr, si, ar, ai, tr, phi, wk
    with nogil:
        for i in range(Mn):
            for n in range(Nn):
                phi = pv[i, n]
                cr = cos(lam0 * phi)
                ci = sin(lam0 * phi)
                sr = cos(dlam * phi)
                si = sin(dlam * phi)
                ar = 0.0
                ai = 0.0
                for k in range(K):
                    wk = wv[k]
                    ar += wk * cr
                    ai += wk * ci
                    tr = cr * sr - ci * si
                    ci = cr * si + ci * sr
                    cr = tr
                ore[i] += av[i, n] * ar
                oim[i] += av[i, n] * ai
    return out_re + 1j * out_im
