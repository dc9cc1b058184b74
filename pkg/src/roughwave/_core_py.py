"""Pure numpy implementation of the hot kernels.

Used when the compiled extension is unavailable or when
``ROUGHWAVE_BACKEND=python`` is set.  Both kernels share the calling
convention of :mod:`roughwave._core`.

Parameter vector layout (length 19)::

    [eps, cx, cy, cz, w, kappa, vx, vy, vz, S00, S01, ..., S22, R]
"""

import numpy as np

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_STEP_UNDERFLOW = 2
STATUS_EXIT = 3


def _unpack(params):
    params = np.asarray(params, dtype=float)
    eps = params[0]
    c = params[1:4]
    w = params[4]
    kappa = params[5]
    v = params[6:9]
    S = params[9:18].reshape(3, 3)
    R = params[18]
    return eps, c, w, kappa, v, S, R


def hamiltonian(params, x, p):
    """h(x, p) = n |p|_{gamma^{-1}} - beta . p, the null covector's -p_t."""
    eps, c, w, kappa, v, S, _ = _unpack(params)
    d = x - c
    E = eps * np.exp(-np.sum(d * d, axis=-1) / (w * w))
    gam = np.eye(3) + E[..., None, None] * S
    g = np.linalg.solve(gam, p[..., None])[..., 0]
    return (1.0 + kappa * E) * np.sqrt(np.sum(p * g, axis=-1)) - E * (p @ v)


def rhs(params, y, m):
    """Characteristic vector field with ``m`` linearized columns, y of shape (N, 6 + 6m)."""
    eps, c, w, kappa, v, S, _ = _unpack(params)
    x = y[:, 0:3]
    p = y[:, 3:6]
    w2 = w * w
    d = x - c
    E = eps * np.exp(-np.sum(d * d, axis=1) / w2)
    Bk = (-2.0 / w2) * d * E[:, None]
    n = 1.0 + kappa * E
    nk = kappa * Bk

    Gam = np.linalg.inv(np.eye(3) + E[:, None, None] * S)
    g = np.einsum("nij,nj->ni", Gam, p)
    q = np.sum(p * g, axis=1)
    s = np.sqrt(q)
    Sg = g @ S.T
    Wp = np.einsum("nij,nj->ni", Gam, Sg)
    w1 = np.sum(g * Sg, axis=1)
    vp = p @ v

    out = np.empty_like(y)
    out[:, 0:3] = (n / s)[:, None] * g - E[:, None] * v
    out[:, 3:6] = -(nk * s[:, None] - (n * w1 / (2.0 * s))[:, None] * Bk - Bk * vp[:, None])
    if m == 0:
        return out

    w2v = np.sum(Sg * Wp, axis=1)
    Bkl = ((4.0 / (w2 * w2)) * d[:, :, None] * d[:, None, :] - (2.0 / w2) * np.eye(3)) * E[:, None, None]
    nkl = kappa * Bkl
    s3 = s**3
    Hpp = n[:, None, None] * (Gam / s[:, None, None] - g[:, :, None] * g[:, None, :] / s3[:, None, None])
    M = (
        g[:, :, None] * nk[:, None, :] / s[:, None, None]
        - (n / s)[:, None, None] * Wp[:, :, None] * Bk[:, None, :]
        + (n * w1 / (2.0 * s3))[:, None, None] * g[:, :, None] * Bk[:, None, :]
        - v[None, :, None] * Bk[:, None, :]
    )
    BB = Bk[:, :, None] * Bk[:, None, :]
    nB = nk[:, :, None] * Bk[:, None, :]
    Hxx = (
        nkl * s[:, None, None]
        - (nB + np.swapaxes(nB, 1, 2)) * (w1 / (2.0 * s))[:, None, None]
        + n[:, None, None] * (2.0 * BB * w2v[:, None, None] - Bkl * w1[:, None, None]) / (2.0 * s)[:, None, None]
        - (n * w1 * w1 / (4.0 * s3))[:, None, None] * BB
        - Bkl * vp[:, None, None]
    )
    cols = y[:, 6:].reshape(-1, m, 6)
    dx = cols[:, :, 0:3]
    dp = cols[:, :, 3:6]
    ddx = np.einsum("nik,nck->nci", M, dx) + np.einsum("nik,nck->nci", Hpp, dp)
    ddp = -np.einsum("nkl,ncl->nck", Hxx, dx) - np.einsum("nik,nci->nck", M, dp)
    out[:, 6:] = np.concatenate([ddx, ddp], axis=2).reshape(len(y), 6 * m)
    return out


def integrate_rays(params, y0, t0, t1, m, rtol=1e-11, atol=1e-12, max_steps=100000, h0=0.01):
    """Advance every ray from t0[i] to t1[i] with adaptive Dormand-Prince 5(4).

    Each ray keeps its own step size; rays finish independently.

    Parameters
    ----------
    params : ndarray, shape (19,)
        Packed metric parameters.
    y0 : ndarray, shape (N, 6 + 6m)
        Initial states ``[x, p, (dx, dp) * m]``.
    t0, t1 : ndarray, shape (N,)
        Start and end times; ``t1 < t0`` integrates backward.
    m : int
        Number of linearized columns carried with each ray.

    Returns
    -------
    y : ndarray, shape (N, 6 + 6m)
        States at ``t1`` (or at the point of failure).
    nsteps : ndarray of int64
        Accepted steps per ray.
    status : ndarray of int64
        0 ok, 1 step budget exhausted, 2 step size underflow, 3 left the box.
    """
    R = float(params[18])
    y = np.array(y0, dtype=float, copy=True)
    N = len(y)
    t = np.array(np.broadcast_to(t0, (N,)), dtype=float)
    tend = np.array(np.broadcast_to(t1, (N,)), dtype=float)
    direction = np.where(tend >= t, 1.0, -1.0)
    span = np.abs(tend - t)
    h = direction * np.minimum(h0, span)
    nsteps = np.zeros(N, dtype=np.int64)
    status = np.zeros(N, dtype=np.int64)
    active = span > 0.0
    k1 = np.zeros_like(y)
    if active.any():
        k1[active] = rhs(params, y[active], m)
    attempts = 0
    while active.any():
        attempts += 1
        idx = np.nonzero(active)[0]
        ya, ta, ha = y[idx], t[idx], h[idx]
        remaining = tend[idx] - ta
        last = np.abs(ha) >= np.abs(remaining)
        ha = np.where(last, remaining, ha)
        ks = [k1[idx]]
        for stage in range(1, 7):
            acc = ya.copy()
            for j, a in enumerate(_A[stage]):
                if a != 0.0:
                    acc += (ha * a)[:, None] * ks[j]
            ks.append(rhs(params, acc, m))
        ynew = acc  # stage 7 argument equals the 5th order solution (FSAL)
        err_vec = sum((ha * e)[:, None] * k for e, k in zip(_E, ks) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(ya), np.abs(ynew))
        err = np.max(np.abs(err_vec) / scale, axis=1)
        ok = err <= 1.0
        fac = np.where(err > 0.0, 0.9 * np.power(np.maximum(err, 1e-300), -0.2), 5.0)
        fac = np.clip(fac, 0.2, 5.0)
        if not ok.all():
            fac = np.where(ok, fac, np.minimum(fac, 1.0))

        acc_idx = idx[ok]
        y[acc_idx] = ynew[ok]
        t[acc_idx] = np.where(last[ok], tend[acc_idx], ta[ok] + ha[ok])
        k1[acc_idx] = ks[6][ok]
        nsteps[acc_idx] += 1
        h[idx] = ha * fac
        done = acc_idx[last[ok]]
        active[done] = False

        exited = acc_idx[np.any(np.abs(y[acc_idx, 0:3]) > R, axis=1)]
        status[exited] = STATUS_EXIT
        active[exited] = False

        tiny = idx[np.abs(h[idx]) < 1e-14 * np.maximum(1.0, np.abs(t[idx]))]
        tiny = tiny[active[tiny]]
        status[tiny] = STATUS_STEP_UNDERFLOW
        active[tiny] = False

        over = idx[(nsteps[idx] >= max_steps) & active[idx]]
        status[over] = STATUS_MAX_STEPS
        active[over] = False
        if attempts > 10 * max_steps:
            status[active] = STATUS_MAX_STEPS
            break
    return y, nsteps, status


def osc_sum(phase, amp, lam0, dlam, wts):
    """sum_n amp[i, n] sum_k wts[k] exp(1j (lam0 + k dlam) phase[i, n]).

    The lambda exponentials are generated by the recurrence
    e^{i(lam0 + (k+1) dlam) phi} = e^{i(lam0 + k dlam) phi} e^{i dlam phi}.
    Returns a complex array of shape (M,).
    """
    phase = np.atleast_2d(np.asarray(phase, dtype=float))
    amp = np.broadcast_to(np.asarray(amp, dtype=float), phase.shape)
    wts = np.asarray(wts, dtype=float)
    cur = np.exp(1j * lam0 * phase)
    step = np.exp(1j * dlam * phase)
    acc = np.zeros(phase.shape, dtype=complex)
    for k in range(len(wts)):
        if wts[k] != 0.0:
            acc += wts[k] * cur
        cur *= step
    return np.sum(amp * acc, axis=1)
