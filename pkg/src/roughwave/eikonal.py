"""Optical functions u(t, x, omega) by the method of characteristics.

The initial slice carries u(0, x, omega) = x . omega.  With the spatial
covector p = grad u, the eikonal equation g^{ab} du_a du_b = 0 together with
the orientation T(u) = -|grad u| reads d_t u = -h(x, grad u) for

    h(x, p) = n(x) |p|_{gamma^{-1}} - beta(x) . p.

Its characteristics x' = h_p, p' = -h_x are the time-parametrized null
geodesics, and u is constant along each of them.  To evaluate u at (t, x) we
shoot: find the foot point x0 on the initial slice whose characteristic
reaches x at time t (Newton on the flow map), then u = x0 . omega.  The
linearized flow supplies grad u, the Hessian of u and the omega-derivatives
without any finite differencing.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial import cKDTree

from . import _backend, sphere
from .errors import (
    CausticError,
    CoordinateCollisionError,
    DegenerateGradientError,
    DomainExitError,
    OutOfDomainError,
    StepFailure,
)
from .metric import christoffel

# slack around the box for foot points of rays ending near its faces
FOOT_SLACK = 1.5


@dataclass
class OpticalField:
    """u(., ., omega) and its frame quantities at a set of sample points.

    Arrays are indexed by sample along the first axis.  ``omega`` is per
    sample, so one field may mix directions.  Derivative entries are None
    unless requested.
    """

    t: np.ndarray
    x: np.ndarray
    omega: np.ndarray
    chart: np.ndarray
    u: np.ndarray
    grad_u: np.ndarray
    dt_u: np.ndarray
    b: np.ndarray
    N: np.ndarray
    L: np.ndarray
    foot: np.ndarray
    domega_u: Optional[np.ndarray] = None
    domega_grad_u: Optional[np.ndarray] = None
    hess_u: Optional[np.ndarray] = None
    domega_b: Optional[np.ndarray] = None
    domega_N: Optional[np.ndarray] = None
    gram: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.u)


def _broadcast(t, x, omega):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    n = max(len(x), len(omega), np.size(t))
    t = np.broadcast_to(np.asarray(t, dtype=float), (n,)).copy()
    x = np.broadcast_to(x, (n, 3)).copy()
    omega = sphere.normalize(np.broadcast_to(omega, (n, 3)))
    return t, x, omega


def _finish(metric, t, x, omega, chart, x0, P, derivs, JX=None, JP=None, KX=None, KP=None, meta=None):
    """Assemble frame quantities from foot points and momenta."""
    n, beta, gamma = metric.adm(x)
    Gam = np.linalg.inv(gamma)
    g = np.einsum("nij,nj->ni", Gam, P)
    s = np.sqrt(np.sum(P * g, axis=1))
    if np.any(s < 1e-8):
        raise DegenerateGradientError(f"|grad u| = {s.min():.3e} below 1e-8")
    b = 1.0 / s
    N = g / s[:, None]
    L = np.concatenate([(1.0 / n)[:, None], N - beta / n[:, None]], axis=1)
    dt_u = -(n * s - np.sum(beta * P, axis=1))
    out = OpticalField(
        t=t, x=x, omega=omega, chart=chart, u=np.sum(x0 * omega, axis=1), grad_u=P, dt_u=dt_u,
        b=b, N=N, L=L, foot=x0, meta=dict(meta or {}),
    )
    if not derivs:
        return out
    e = sphere.frame(omega, chart)  # (n, 2, 3)
    JXinv = np.linalg.inv(JX)
    dx0 = -np.einsum("nij,njA->nAi", JXinv, KX)  # d x0 / d omega_A
    out.domega_u = np.einsum("nAi,ni->nA", dx0, omega) + np.einsum("ni,nAi->nA", x0, e)
    dP = np.swapaxes(KP, 1, 2) + np.einsum("nij,nAj->nAi", JP, dx0)
    out.domega_grad_u = dP
    out.hess_u = np.einsum("nij,njk->nik", JP, JXinv)
    dg = np.einsum("nij,nAj->nAi", Gam, dP)
    ds = np.sum(g[:, None, :] * dP, axis=2) / s[:, None]
    out.domega_b = -ds / (s * s)[:, None]
    dN = dg / s[:, None, None] - g[:, None, :] * (ds / (s * s)[:, None])[:, :, None]
    out.domega_N = dN
    out.gram = np.einsum("nAi,nij,nBj->nAB", dN, gamma, dN)
    return out


class OpticalSolver:
    """Evaluate u(t, x, omega) and derived quantities by shooting characteristics.

    Parameters
    ----------
    metric : SpacetimeMetric
    rtol, atol : float
        Tolerances of the embedded Runge-Kutta integrator.
    newton_tol : float
        Absolute tolerance on the landing point of the shooting iteration.
    backend : {'cython', 'python'}, optional
        Kernel implementation; default is the one selected at import.
    """

    def __init__(self, metric, rtol=1e-11, atol=1e-12, newton_tol=1e-12, max_newton=25, backend=None):
        self.metric = metric
        self.rtol = rtol
        self.atol = atol
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        self.kernels = _backend.get(backend) if backend else _backend
        p = metric.params()
        self._params = np.concatenate([p, [metric.R + FOOT_SLACK]])
        self.n_integrations = 0

    # raw flow --------------------------------------------------------------------

    def flow(self, x0, omega, t_end, m=0, t_start=0.0, chart=None):
        """Integrate characteristics from (t_start, x0) with initial momentum omega.

        Returns the (N, 6 + 6m) end states.  Columns 0..2 of the linearization
        are d/dx0, columns 3..4 are d/domega_A in the sphere frame.
        """
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        n = len(x0)
        y0 = np.zeros((n, 6 + 6 * m))
        y0[:, 0:3] = x0
        y0[:, 3:6] = omega
        if m >= 3:
            for c in range(3):
                y0[:, 6 + 6 * c + c] = 1.0
        if m == 5:
            e = sphere.frame(omega, chart)
            y0[:, 6 + 18 + 3:6 + 18 + 6] = e[:, 0]
            y0[:, 6 + 24 + 3:6 + 24 + 6] = e[:, 1]
        y, _, status = self.kernels.integrate_rays(
            self._params, y0, np.broadcast_to(t_start, (n,)), np.broadcast_to(t_end, (n,)), m,
            self.rtol, self.atol,
        )
        self.n_integrations += n
        if np.any(status == 3):
            raise DomainExitError("characteristic left the padded box")
        if np.any(status != 0):
            raise StepFailure(f"integrator failed on {int(np.sum(status != 0))} rays (status {int(status.max())})")
        return y

    @staticmethod
    def _unpack(y, m):
        X, P = y[:, 0:3], y[:, 3:6]
        cols = y[:, 6:].reshape(len(y), m, 6)
        JX = np.swapaxes(cols[:, 0:3, 0:3], 1, 2)  # [n, i, c] = dX_i/dx0_c
        JP = np.swapaxes(cols[:, 0:3, 3:6], 1, 2)
        KX = KP = None
        if m == 5:
            KX = np.swapaxes(cols[:, 3:5, 0:3], 1, 2)  # [n, i, A]
            KP = np.swapaxes(cols[:, 3:5, 3:6], 1, 2)
        return X, P, JX, JP, KX, KP

    # shooting ---------------------------------------------------------------------

    def evaluate(self, t, x, omega, derivs=False, chart=None):
        """OpticalField at samples (t_i, x_i, omega_i) (broadcast)."""
        t, x, omega = _broadcast(t, x, omega)
        metric = self.metric
        if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12) or np.any(np.abs(x) > metric.R):
            raise OutOfDomainError("sample outside [0,1] x box")
        if chart is None:
            chart = sphere.chart_of(omega)
        chart = np.broadcast_to(chart, t.shape).copy()
        m = 5 if derivs else 3
        n = len(t)
        x0 = x - t[:, None] * omega
        done = np.zeros(n, dtype=bool)
        store = {k: np.zeros((n, 3, 3)) for k in ("JX", "JP")}
        store.update({k: np.zeros((n, 3, 2)) for k in ("KX", "KP")})
        X_all = np.zeros((n, 3))
        P_all = np.zeros((n, 3))
        foot = np.zeros((n, 3))
        iters = 0
        for it in range(self.max_newton):
            idx = np.nonzero(~done)[0]
            if len(idx) == 0:
                break
            iters = it + 1
            y = self.flow(x0[idx], omega[idx], t[idx], m=m, chart=chart[idx])
            X, P, JX, JP, KX, KP = self._unpack(y, m)
            r = X - x[idx]
            err = np.max(np.abs(r), axis=1)
            conv = err <= self.newton_tol * (1.0 + np.max(np.abs(x[idx]), axis=1))
            det = np.linalg.det(JX)
            if np.any(np.abs(det) < 1e-8):
                raise CausticError(f"flow map degenerate (|det| = {np.abs(det).min():.2e})")
            ci = idx[conv]
            X_all[ci], P_all[ci], foot[ci] = X[conv], P[conv], x0[ci]
            store["JX"][ci], store["JP"][ci] = JX[conv], JP[conv]
            if derivs:
                store["KX"][ci], store["KP"][ci] = KX[conv], KP[conv]
            done[ci] = True
            nc = ~conv
            if nc.any():
                step = np.linalg.solve(JX[nc], r[nc][..., None])[..., 0]
                x0[idx[nc]] -= step
        if not done.all():
            raise CausticError(f"shooting did not converge for {int(np.sum(~done))} samples")
        meta = {"newton_iterations": iters, "method": "characteristics"}
        return _finish(
            metric, t, x, omega, chart, foot, P_all, derivs,
            store["JX"], store["JP"], store["KX"], store["KP"], meta,
        )

    def u(self, t, x, omega):
        return self.evaluate(t, x, omega).u

    def ray_point(self, t, x, omega, s):
        """Point at time s on the characteristic of omega through (t, x)."""
        f = self.evaluate(t, x, omega)
        return self.flow(f.foot, f.omega, s)[:, 0:3]

    def from_foot(self, s, x0, omega, chart=None):
        """OpticalField at time s on the characteristics issued from foot points x0."""
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        omega = sphere.normalize(np.broadcast_to(omega, x0.shape))
        if chart is None:
            chart = sphere.chart_of(omega)
        chart = np.broadcast_to(chart, (len(x0),)).copy()
        y = self.flow(x0, omega, s, m=5, chart=chart)
        X, P, JX, JP, KX, KP = self._unpack(y, 5)
        t = np.broadcast_to(np.asarray(s, dtype=float), (len(x0),)).copy()
        out = _finish(self.metric, t, X, omega, chart, x0, P, True, JX, JP, KX, KP,
                      {"method": "characteristics"})
        out.meta["jacobian"] = JX
        return out


class FlatOptics:
    """Closed-form Minkowski optical function u = -t + x . omega."""

    def __init__(self, metric):
        if not metric.is_flat:
            raise ValueError("FlatOptics requires a flat metric")
        self.metric = metric

    def evaluate(self, t, x, omega, derivs=False, chart=None):
        t, x, omega = _broadcast(t, x, omega)
        if chart is None:
            chart = sphere.chart_of(omega)
        chart = np.broadcast_to(chart, t.shape).copy()
        n = len(t)
        foot = x - t[:, None] * omega
        P = omega.copy()
        JX = np.broadcast_to(np.eye(3), (n, 3, 3))
        JP = np.zeros((n, 3, 3))
        e = sphere.frame(omega, chart)
        KX = t[:, None, None] * np.swapaxes(e, 1, 2)
        KP = np.swapaxes(e, 1, 2).copy()
        out = _finish(self.metric, t, x, omega, chart, foot, P, derivs, JX, JP, KX, KP,
                      {"method": "closed_form"})
        # same value as -t + x . omega but without the cancellation in foot . omega
        out.u = -t + np.sum(x * omega, axis=1)
        return out

    def u(self, t, x, omega):
        t, x, omega = _broadcast(t, x, omega)
        return -t + np.sum(x * omega, axis=1)

    def ray_point(self, t, x, omega, s):
        t, x, omega = _broadcast(t, x, omega)
        return x + (np.asarray(s, dtype=float) - t)[:, None] * omega

    def from_foot(self, s, x0, omega, chart=None):
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        omega = sphere.normalize(np.broadcast_to(omega, x0.shape))
        s = np.broadcast_to(np.asarray(s, dtype=float), (len(x0),))
        out = self.evaluate(s, x0 + s[:, None] * omega, omega, derivs=True, chart=chart)
        out.meta["jacobian"] = np.broadcast_to(np.eye(3), (len(x0), 3, 3))
        return out


def optics_for(metric, exact_flat=True, **kw):
    """Closed forms for flat metrics, shooting otherwise."""
    if exact_flat and metric.is_flat:
        return FlatOptics(metric)
    return OpticalSolver(metric, **kw)


# operations -------------------------------------------------------------------------


def solve_optical_function(metric, omega, grid, solver=None, derivs=False):
    """u(., ., omega) on ``grid = (t, x)`` by shooting characteristics.

    Always uses characteristics, including for Minkowski space, so that the
    flat closed form is an independent check.
    """
    solver = solver or OpticalSolver(metric)
    t, x = grid
    f = solver.evaluate(t, x, omega, derivs=derivs)
    f.meta["epsilon"] = metric.epsilon
    return f


def compute_frame(field, metric):
    """(b, N, L) from the spatial gradient of u: b^-1 = |grad u|, N = grad u / |grad u|."""
    n, beta, gamma = metric.adm(field.x)
    Gam = np.linalg.inv(gamma)
    up = np.einsum("nij,nj->ni", Gam, field.grad_u)
    norm = np.sqrt(np.sum(field.grad_u * up, axis=1))
    if np.any(norm < 1e-8):
        raise DegenerateGradientError(f"|grad u| = {norm.min():.3e} below 1e-8")
    b = 1.0 / norm
    N = up / norm[:, None]
    L = np.concatenate([(1.0 / n)[:, None], N - beta / n[:, None]], axis=1)
    return b, N, L


def transport_domega_u(metric, omega, grid, solver=None):
    """d_omega u in the sphere frame of ``omega`` via the linearized flow, shape (n, 2)."""
    return solve_optical_function(metric, omega, grid, solver=solver, derivs=True).domega_u


def domega_fd(solver, t, x, omega, h=1e-3, what="u", chart=None):
    """Centered great-circle differences of u or N in the directions e_A of the frame.

    Returns shape (n, 2) for ``what='u'`` and (n, 2, 3) for ``what='N'``.
    """
    t, x, omega = _broadcast(t, x, omega)
    if chart is None:
        chart = sphere.chart_of(omega)
    e = sphere.frame(omega, chart)
    outs = []
    for A in range(2):
        wp = np.cos(h) * omega + np.sin(h) * e[:, A]
        wm = np.cos(h) * omega - np.sin(h) * e[:, A]
        fp = solver.evaluate(t, x, wp)
        fm = solver.evaluate(t, x, wm)
        if what == "u":
            outs.append((fp.u - fm.u) / (2.0 * h))
        else:
            outs.append((fp.N - fm.N) / (2.0 * h))
    return np.stack(outs, axis=1)


def eikonal_residual(solver, t, x, omega, h=1e-3):
    """|g^{ab} d_a u d_b u| with every partial of u taken by centered differences."""
    t, x, omega = _broadcast(t, x, omega)
    metric = solver.metric
    du = np.zeros((len(t), 4))
    du[:, 0] = (solver.u(t + h, x, omega) - solver.u(t - h, x, omega)) / (2.0 * h)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        du[:, k + 1] = (solver.u(t, x + e, omega) - solver.u(t, x - e, omega)) / (2.0 * h)
    ginv = metric.inverse(t, x)
    return np.abs(np.einsum("na,nab,nb->n", du, ginv, du))


def t_flow_oracle(solver, t, x, omega, n_nodes=24):
    """u at (t, x) rebuilt from the initial slice along the normal flow.

    The integral curve of T through (t, x) has x' = -beta in time
    parametrization, along which du/dt = n T(u) = -n |grad u|.  Integrating
    this from t = 0 gives u(t, x) = u(0, c(0)) - int_0^t n |grad u| dt, an
    evaluation route that never follows a characteristic to (t, x).
    """
    metric = solver.metric
    t = float(t)
    x = np.asarray(x, dtype=float)
    omega = sphere.normalize(omega)

    def back(tau, y):
        return metric.adm(y)[1]  # running backward: d/dtau x(t - tau) = +beta

    sol = solve_ivp(back, (0.0, t), x, method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    tau = 0.5 * t * (nodes + 1.0)
    pts = sol.sol(tau).T  # position at time t - tau
    times = t - tau
    f = solver.evaluate(times, pts, omega)
    n, _, gamma = metric.adm(pts)
    rate = n / f.b  # n |grad u|
    integral = 0.5 * t * np.sum(weights * rate)
    start = sol.sol(t)
    u0 = float(np.dot(start, omega))
    return u0 - integral


# null geodesics from the Christoffel symbols ----------------------------------------------


@dataclass
class NullGeodesic:
    omega: np.ndarray
    base: tuple
    sigma: np.ndarray
    points: np.ndarray  # (n, 4)
    tangents: np.ndarray  # (n, 4), time component 1
    null_defect: float
    richardson_defect: float


def shoot_null_geodesic(metric, base, omega, sigma_end, solver=None, n_samples=33, rtol=1e-11, atol=1e-12):
    """Integrate D_{L'} L' = 0 from base with initial direction b^-1 L of u(., ., omega).

    The geodesic equation is reparametrized by coordinate time:
    x''^i = -Gamma^i_{ab} V^a V^b + Gamma^0_{ab} V^a V^b x'^i with V = (1, x').
    """
    t0, x0 = float(base[0]), np.asarray(base[1], dtype=float)
    omega = sphere.normalize(omega)
    if not (0.0 <= t0 <= 1.0 and 0.0 <= t0 + sigma_end <= 1.0):
        raise OutOfDomainError("geodesic time range leaves [0, 1]")
    solver = solver or optics_for(metric)
    f = solver.evaluate(t0, x0, omega)
    L = f.L[0]
    v0 = L[1:] / L[0]
    R = metric.R

    def rhs(tau, y):
        x, v = y[:3], y[3:]
        tt = t0 + tau
        G = christoffel(metric, np.clip(tt, 0.0, 1.0), x)
        V = np.concatenate([[1.0], v])
        q = np.einsum("abc,b,c->a", G, V, V)
        return np.concatenate([v, -q[1:] + q[0] * v])

    def leave(tau, y):
        return R - np.max(np.abs(y[:3]))

    leave.terminal = True
    y0 = np.concatenate([x0, v0])
    sig = np.linspace(0.0, sigma_end, n_samples)

    def run(rt, at):
        sol = solve_ivp(rhs, (0.0, sigma_end), y0, method="DOP853", rtol=rt, atol=at,
                        t_eval=sig, events=leave)
        if sol.status == 1:
            raise DomainExitError("geodesic left the box")
        if sol.status != 0:
            raise StepFailure(sol.message)
        return sol.y.T

    Y = run(rtol, atol)
    Yfine = run(rtol / 32.0, atol / 32.0)
    pts = np.concatenate([(t0 + sig)[:, None], Y[:, :3]], axis=1)
    tan = np.concatenate([np.ones((len(sig), 1)), Y[:, 3:]], axis=1)
    g = metric.components(pts[:, 0], pts[:, 1:])
    defect = float(np.max(np.abs(np.einsum("na,nab,nb->n", tan, g, tan))))
    return NullGeodesic(
        omega=omega, base=(t0, x0), sigma=sig, points=pts, tangents=tan, null_defect=defect,
        richardson_defect=float(np.max(np.abs(Y[-1] - Yfine[-1]))),
    )


# assumption checks ----------------------------------------------------------------------


@dataclass
class RegularityReport:
    sup_b_minus_1: float
    sup_domega_b: float
    sup_gram_deviation: float
    ad1_ratio_range: tuple
    sup_N_dN: float
    sup_dN_mismatch: float
    n_directions: int
    n_points: int
    n_pairs: int
    ad1_outliers: int = 0

    def to_dict(self):
        return {
            "sup_b_minus_1": self.sup_b_minus_1,
            "sup_domega_b": self.sup_domega_b,
            "sup_gram_deviation": self.sup_gram_deviation,
            "ad1_ratio_range": list(self.ad1_ratio_range),
            "sup_N_dN": self.sup_N_dN,
            "sup_dN_mismatch": self.sup_dN_mismatch,
            "n_directions": self.n_directions,
            "n_points": self.n_points,
            "n_pairs": self.n_pairs,
            "ad1_outliers": self.ad1_outliers,
        }


def verify_regularity(solver, omegas, t, x, fd_step=1e-3, min_sep=0.1, outlier_band=0.5):
    """Sup-norm deviations of b, d_omega b, the Gram matrix and the N-Lipschitz ratio.

    ``omegas`` is the direction grid, (t, x) the spatial sample cloud shared
    by every direction.  g(N, d_omega N) is evaluated with a great-circle
    difference of N, since the linearized-flow d_omega N satisfies it by
    construction.
    """
    metric = solver.metric
    omegas = sphere.normalize(omegas)
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(x)
    K, P = len(omegas), len(x)
    T = np.repeat(t[None], K, axis=0).ravel() if t.ndim else np.full(K * P, float(t))
    X = np.tile(x, (K, 1))
    W = np.repeat(omegas, P, axis=0)
    f = solver.evaluate(T, X, W, derivs=True)
    dN_fd = domega_fd(solver, T, X, W, h=fd_step, what="N", chart=f.chart)
    _, _, gamma = metric.adm(X)
    N_dN = np.einsum("ni,nij,nAj->nA", f.N, gamma, dN_fd)
    gram_dev = np.linalg.norm(f.gram - np.eye(2), ord=2, axis=(1, 2))
    Ns = f.N.reshape(K, P, 3)
    gam = gamma.reshape(K, P, 3, 3)[0]
    iu, ju = np.triu_indices(K, 1)
    sep = np.linalg.norm(omegas[iu] - omegas[ju], axis=1)
    keep = sep >= min_sep
    iu, ju, sep = iu[keep], ju[keep], sep[keep]
    dN = Ns[iu] - Ns[ju]  # (pairs, P, 3)
    dist = np.sqrt(np.einsum("qpi,pij,qpj->qp", dN, gam, dN))
    ratio = dist / sep[:, None]
    lo, hi = float(ratio.min()), float(ratio.max())
    return RegularityReport(
        sup_b_minus_1=float(np.max(np.abs(f.b - 1.0))),
        sup_domega_b=float(np.max(np.abs(f.domega_b))),
        sup_gram_deviation=float(np.max(gram_dev)),
        ad1_ratio_range=(lo, hi),
        sup_N_dN=float(np.max(np.abs(N_dN))),
        sup_dN_mismatch=float(np.max(np.abs(dN_fd - f.domega_N))),
        n_directions=K,
        n_points=P,
        n_pairs=int(len(sep)),
        ad1_outliers=int(np.sum(np.abs(ratio - 1.0) > outlier_band)),
    )


def check_global_coordinates(solver, omega, t_slice, cloud, delta=1e-3, tol=None):
    """Injectivity and volume bounds of x -> (u, d_omega u) on a slice.

    Raises CoordinateCollisionError when two cloud points farther apart than
    ``delta`` have images closer than ``tol``.  The metric density in the new
    coordinates is sqrt(det gamma) / |det J|, which must lie in [1/2, 2].
    """
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    metric = solver.metric
    f = solver.evaluate(t_slice, cloud, omega, derivs=True)
    img = np.concatenate([f.u[:, None], f.domega_u], axis=1)
    J = np.concatenate([f.grad_u[:, None, :], f.domega_grad_u], axis=1)
    detJ = np.linalg.det(J)
    _, _, gamma = metric.adm(cloud)
    density = np.sqrt(np.linalg.det(gamma)) / np.abs(detJ)
    tol = delta * 0.25 if tol is None else tol
    tree = cKDTree(img)
    for i, j in sorted(tree.query_pairs(tol)):
        if np.linalg.norm(cloud[i] - cloud[j]) > delta:
            raise CoordinateCollisionError(
                f"points {cloud[i]} and {cloud[j]} share coordinates within {tol}", (int(i), int(j))
            )
    return {
        "t": float(t_slice),
        "omega": [float(a) for a in sphere.normalize(omega)],
        "chart": int(f.chart[0]),
        "n_points": int(len(cloud)),
        "jacobian_min": float(detJ.min()),
        "jacobian_max": float(detJ.max()),
        "density_min": float(density.min()),
        "density_max": float(density.max()),
        "density_within_bounds": bool(density.min() >= 0.5 and density.max() <= 2.0),
        "injective": True,
    }
