"""Geometry of the phase phi(t, x, s, y, omega) = u(t, x, omega) - u(s, y, omega).

For a pair (t, x), (s, y) with t < s the slice point (s, y) is classified by
the sign of m0 = max_omega (u(s, y, omega) - u(t, x, omega)): on the cone S
(m0 = 0), inside it (m0 < 0) or outside it (m0 > 0).  Outside the cone the
zero set D of the phase is a closed curve theta = theta1(azimuth) around the
maximizer omega0.  The connecting curves mu (interior) and eta (exterior)
move along a slice while transporting the coordinates (u, d_omega u) in a
prescribed way; they must land exactly on (s, y).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from . import sphere
from .errors import (
    AmbiguousMaximizerError,
    BoundViolationError,
    EndpointDefectError,
    GramSingularError,
)

REGIONS = ("OnS", "Interior", "Exterior")
CASES = ("OnS", "Interior", "ExtFar", "ExtNear")


@dataclass(frozen=True)
class PhasePair:
    t: float
    x: tuple
    s: float
    y: tuple

    def __post_init__(self):
        if not (0.0 <= self.t < self.s <= 1.0):
            raise ValueError(f"need 0 <= t < s <= 1, got t={self.t}, s={self.s}")
        object.__setattr__(self, "x", tuple(float(a) for a in self.x))
        object.__setattr__(self, "y", tuple(float(a) for a in self.y))

    @property
    def gap(self):
        return self.s - self.t

    @property
    def xa(self):
        return np.asarray(self.x)

    @property
    def ya(self):
        return np.asarray(self.y)

    def to_dict(self):
        return {"t": self.t, "x": list(self.x), "s": self.s, "y": list(self.y)}


@dataclass
class PhaseDecomposition:
    pair: PhasePair
    m0: float
    omega0: np.ndarray
    region: str
    tol_region: float
    degenerate: bool = False
    maximizers: np.ndarray = None
    azimuths: Optional[np.ndarray] = None
    theta1: Optional[np.ndarray] = None
    omega1: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def theta1_curve(self, azimuth):
        """Periodic linear interpolation of the sampled D-curve."""
        az = np.concatenate([self.azimuths, [self.azimuths[0] + 2.0 * np.pi]])
        th = np.concatenate([self.theta1, [self.theta1[0]]])
        return np.interp(np.mod(azimuth, 2.0 * np.pi), az, th)

    def to_dict(self):
        out = {
            "m0": float(self.m0),
            "omega0": [float(a) for a in self.omega0],
            "region": self.region,
            "tol_region": float(self.tol_region),
            "degenerate": bool(self.degenerate),
            "n_maximizers": 0 if self.maximizers is None else int(len(self.maximizers)),
        }
        if self.theta1 is not None:
            out["theta1_min"] = float(self.theta1.min())
            out["theta1_max"] = float(self.theta1.max())
        return out


def _pair(pair):
    return pair if isinstance(pair, PhasePair) else PhasePair(*pair)


def phase(optics, pair, omega):
    """phi = u(t, x, omega) - u(s, y, omega) for one or many directions."""
    pair = _pair(pair)
    omega = np.atleast_2d(omega)
    return optics.u(pair.t, pair.xa, omega) - optics.u(pair.s, pair.ya, omega)


def m_function(optics, pair, omega, derivs=False, chart=None):
    """u(s, y, .) - u(t, x, .) and, optionally, its frame derivatives (n, 2)."""
    pair = _pair(pair)
    omega = sphere.normalize(np.atleast_2d(omega))
    if chart is None:
        chart = sphere.chart_of(omega)
    fs = optics.evaluate(pair.s, pair.ya, omega, derivs=derivs, chart=chart)
    ft = optics.evaluate(pair.t, pair.xa, omega, derivs=derivs, chart=chart)
    val = fs.u - ft.u
    if not derivs:
        return val
    return val, fs.domega_u - ft.domega_u


def _polish(optics, pair, omega_c):
    """Local maximization of m_function in a tangent chart centred at omega_c."""
    omega_c = sphere.normalize(omega_c)
    E = sphere.frame(omega_c)
    chart = int(sphere.chart_of(omega_c))

    def point(a):
        v = omega_c + a[0] * E[0] + a[1] * E[1]
        return v / np.linalg.norm(v), np.linalg.norm(v)

    def fun(a):
        w, norm = point(a)
        val, d = m_function(optics, pair, w, derivs=True, chart=chart)
        f = sphere.frame(w, chart)
        G = d[0] @ f  # ambient tangent gradient
        dw = (E - np.outer(E @ w, w)) / norm
        return -val[0], -(dw @ G)

    res = optimize.minimize(fun, np.zeros(2), jac=True, method="BFGS", options={"gtol": 1e-13, "maxiter": 200})
    a = res.x
    root = optimize.root(lambda z: fun(z)[1], a, method="hybr", options={"xtol": 1e-15})
    # hybr flags an unreachable xtol as failure even after converging, so judge by the gradient
    val_r, grad_r = fun(root.x)
    if np.linalg.norm(grad_r) < np.linalg.norm(res.jac) and -val_r >= -res.fun - 1e-14:
        a = root.x
    w, _ = point(a)
    return w, -fun(a)[0]


def decompose(optics, pair, level=2, tol_region=None, n_azimuth=32, n_theta=33, amb_tol=None):
    """Maximize u(s, y, .) - u(t, x, .) over the sphere and classify (s, y).

    Parameters
    ----------
    optics : object with ``evaluate`` and ``u``
        Optical function provider (closed form or characteristics).
    pair : PhasePair or tuple (t, x, s, y)
    level : int
        Icosahedral refinement level of the coarse scan (>= 2).
    tol_region : float, optional
        Width of the band |m0| <= tol_region labelled OnS; default 1e-5 (s - t).
    n_azimuth : int
        Number of azimuths at which theta1 is resolved (Exterior only).

    Returns
    -------
    PhaseDecomposition

    Raises
    ------
    AmbiguousMaximizerError
        If two polished maxima more than 0.1 apart agree within ``amb_tol``.
    """
    pair = _pair(pair)
    if level < 2:
        raise ValueError("icosahedral level must be at least 2")
    gap = pair.gap
    tol_region = 1e-5 * gap if tol_region is None else tol_region
    amb_tol = 1e-9 * gap if amb_tol is None else amb_tol
    grid = sphere.icosahedral_grid(level)
    vals = m_function(optics, pair, grid)
    top = vals.max()
    if np.ptp(vals) <= 1e-12 * (1.0 + abs(top)):
        ties = np.nonzero(vals >= top - 1e-12 * (1.0 + abs(top)))[0]
        omega0 = grid[ties[0]]
        m0 = float(top)
        dec = PhaseDecomposition(pair, m0, omega0, _classify(m0, tol_region), tol_region,
                                 degenerate=True, maximizers=grid[ties])
    else:
        nbrs = sphere.icosahedral_neighbors(level)
        local = [i for i in range(len(grid)) if all(vals[i] >= vals[j] for j in nbrs[i])]
        local = sorted(local, key=lambda i: -vals[i])[:6]
        cands = []
        for i in local:
            w, v = _polish(optics, pair, grid[i])
            if all(np.linalg.norm(w - c[0]) > 1e-6 for c in cands):
                cands.append((w, v))
        cands.sort(key=lambda c: -c[1])
        omega0, m0 = cands[0]
        rivals = [c for c in cands[1:] if m0 - c[1] <= amb_tol and np.linalg.norm(c[0] - omega0) > 0.1]
        if rivals:
            raise AmbiguousMaximizerError(
                f"maxima {m0:.15g} and {rivals[0][1]:.15g} are {np.linalg.norm(rivals[0][0] - omega0):.3f} apart",
                [omega0] + [c[0] for c in rivals],
            )
        dec = PhaseDecomposition(pair, float(m0), omega0, _classify(m0, tol_region), tol_region,
                                 maximizers=np.array([omega0]))
    if dec.region == "Exterior":
        az = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
        th = theta1(optics, dec, az, n_theta=n_theta)
        dec.azimuths = az
        dec.theta1 = th
        dec.omega1 = sphere.from_axis_angles(dec.omega0, th, az)
    return dec


def _classify(m0, tol):
    if abs(m0) <= tol:
        return "OnS"
    return "Interior" if m0 < 0 else "Exterior"


def theta1(optics, dec, azimuth, n_theta=33, iters=60):
    """Polar angle of D along each meridian from omega0 (vectorized bisection).

    Each meridian is scanned at ``n_theta`` angles in (0, pi]; exactly one sign
    change of phi is required before bisecting.
    """
    pair = dec.pair
    azimuth = np.atleast_1d(np.asarray(azimuth, dtype=float))
    K = len(azimuth)
    grid = np.linspace(0.0, np.pi, n_theta)[1:]
    TH, AZ = np.meshgrid(grid, azimuth, indexing="ij")
    W = sphere.from_axis_angles(dec.omega0, TH.ravel(), AZ.ravel())
    ph = phase(optics, pair, W).reshape(len(grid), K)
    ph = np.vstack([np.full(K, -dec.m0), ph])
    thg = np.concatenate([[0.0], grid])
    sign = np.sign(ph)
    changes = np.sum(sign[1:] != sign[:-1], axis=0)
    if np.any(changes != 1):
        bad = int(np.argmax(changes != 1))
        raise ValueError(f"phi changes sign {changes[bad]} times along azimuth {azimuth[bad]:.4f}")
    k = np.argmax(sign[1:] != sign[:-1], axis=0)
    lo = thg[k]
    hi = thg[k + 1]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pm = phase(optics, pair, sphere.from_axis_angles(dec.omega0, mid, azimuth))
        neg = pm < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.all(hi - lo < 1e-15):
            break
    return 0.5 * (lo + hi)


def v0_vector(optics, pair, omega1):
    """v0 = d_omega u(s, y, omega1) - d_omega u(gamma_{omega1}(s - t), omega1).

    Returns frame coefficients (n, 2) in the chart of omega1 and the ambient
    tangent vectors (n, 3).
    """
    pair = _pair(pair)
    omega1 = sphere.normalize(np.atleast_2d(omega1))
    chart = sphere.chart_of(omega1)
    z = optics.ray_point(pair.t, pair.xa, omega1, pair.s)
    fy = optics.evaluate(pair.s, pair.ya, omega1, derivs=True, chart=chart)
    fz = optics.evaluate(pair.s, z, omega1, derivs=True, chart=chart)
    coeff = fy.domega_u - fz.domega_u
    return coeff, sphere.tangent_to_ambient(omega1, coeff, chart)


# connecting curves -----------------------------------------------------------------------


@dataclass
class ConnectingCurve:
    kind: str
    coefficient: np.ndarray
    sigma: np.ndarray
    points: np.ndarray  # (n, 4) spacetime samples on the slice t = s
    endpoint_defect: float
    u_defect: float
    domega_u_defect: float
    nfev: int = 0

    def to_dict(self):
        return {
            "kind": self.kind,
            "coefficient": [float(a) for a in self.coefficient],
            "endpoint_defect": self.endpoint_defect,
            "u_defect": self.u_defect,
            "domega_u_defect": self.domega_u_defect,
            "nfev": self.nfev,
        }


def _check_gram(G, cond_max):
    c = np.linalg.cond(G)
    if not np.isfinite(c) or c > cond_max:
        raise GramSingularError(f"Gram matrix condition number {c:.3e} exceeds {cond_max:.1e}")


def _integrate_curve(optics, pair, omega, chart, velocity, sigma_end, n_samples, rtol, atol):
    """Integrate a slice curve in foot-point coordinates of the omega-characteristics.

    The curve z(sigma) on the slice t = s is represented by the foot point q
    of the characteristic through it; dq/dsigma = (dX/dq)^-1 dz/dsigma.
    """
    start = optics.evaluate(pair.t, pair.xa, omega, chart=chart).foot[0]
    nfev = [0]

    def rhs(sig, q):
        f = optics.from_foot(pair.s, q, omega, chart=chart)
        nfev[0] += 1
        dz = velocity(f)
        return np.linalg.solve(f.meta["jacobian"][0], dz)

    sig = np.linspace(0.0, sigma_end, n_samples)
    sol = solve_ivp(rhs, (0.0, sigma_end), start, method="DOP853", t_eval=sig, rtol=rtol, atol=atol)
    if sol.status != 0:
        from .errors import StepFailure

        raise StepFailure(sol.message)
    feet = sol.y.T
    f = optics.from_foot(pair.s, feet, np.broadcast_to(omega, feet.shape), chart=chart)
    return sig, f, nfev[0]


def integrate_mu(optics, pair, dec, n_samples=17, rtol=1e-11, atol=1e-12, defect_tol=1e-6,
                 cond_max=1e6, raise_on_defect=True):
    """Curve mu' = b N + a . d_omega N with a = G^-1 d_omega b, all at omega0.

    Starts at gamma_{omega0}(s - t) and runs over sigma in [0, m0] (backward
    when m0 < 0).  Along it u(., omega0) grows like sigma and d_omega u is
    frozen, so mu(m0) = (s, y).
    """
    pair = dec.pair
    omega = dec.omega0
    chart = int(sphere.chart_of(omega))

    def velocity(f):
        G = f.gram[0]
        _check_gram(G, cond_max)
        a = np.linalg.solve(G, f.domega_b[0])
        return f.b[0] * f.N[0] + a @ f.domega_N[0]

    sig, f, nfev = _integrate_curve(optics, pair, omega, chart, velocity, dec.m0, n_samples, rtol, atol)
    a0 = np.linalg.solve(f.gram[0], f.domega_b[0])
    defect = float(np.linalg.norm(f.x[-1] - pair.ya))
    u_def = float(np.max(np.abs(f.u - f.u[0] - sig)))
    d_def = float(np.max(np.abs(f.domega_u - f.domega_u[0])))
    curve = ConnectingCurve("Mu", a0, sig, np.concatenate([f.t[:, None], f.x], axis=1), defect, u_def, d_def, nfev)
    if raise_on_defect and defect > defect_tol:
        raise EndpointDefectError(f"mu(m0) misses (s, y) by {defect:.3e}")
    return curve


def integrate_eta(optics, pair, dec, omega1, n_samples=17, rtol=1e-11, atol=1e-12, defect_tol=1e-6,
                  cond_max=1e6, raise_on_defect=True):
    """Curve eta' = b a1 . d_omega N with G a1 = v0, all at a point omega1 of D.

    Starts at gamma_{omega1}(s - t) and runs over sigma in [0, 1].  Along it
    u(., omega1) is frozen and d_omega u moves affinely with slope v0, so
    eta(1) = (s, y).  G is evaluated along the curve.
    """
    pair = dec.pair
    omega1 = sphere.normalize(omega1)
    chart = int(sphere.chart_of(omega1))
    v0, _ = v0_vector(optics, pair, omega1)
    v0 = v0[0]

    def velocity(f):
        G = f.gram[0]
        _check_gram(G, cond_max)
        a1 = np.linalg.solve(G, v0)
        return f.b[0] * (a1 @ f.domega_N[0])

    sig, f, nfev = _integrate_curve(optics, pair, omega1, chart, velocity, 1.0, n_samples, rtol, atol)
    defect = float(np.linalg.norm(f.x[-1] - pair.ya))
    u_def = float(np.max(np.abs(f.u - f.u[0])))
    d_def = float(np.max(np.abs(f.domega_u - f.domega_u[0] - sig[:, None] * v0)))
    curve = ConnectingCurve("Eta", v0, sig, np.concatenate([f.t[:, None], f.x], axis=1), defect, u_def, d_def, nfev)
    if raise_on_defect and defect > defect_tol:
        raise EndpointDefectError(f"eta(1) misses (s, y) by {defect:.3e}")
    return curve


# key lemma --------------------------------------------------------------------------------


@dataclass
class KeyLemmaSample:
    omega: np.ndarray
    theta: float
    theta1: float
    omega1: Optional[np.ndarray]
    alpha: float
    phi_value: float
    bound_value: float
    case: str
    shape: float = float("nan")

    @property
    def margin(self):
        return abs(self.phi_value) - self.bound_value

    @property
    def alpha_defect(self):
        if self.case not in ("ExtFar", "ExtNear"):
            return 0.0
        return abs(self.alpha - abs(self.theta1 - self.theta) / 2.0)

    def row(self):
        return {
            "omega_x": float(self.omega[0]),
            "omega_y": float(self.omega[1]),
            "omega_z": float(self.omega[2]),
            "case": self.case,
            "abs_phi": abs(self.phi_value),
            "bound": self.bound_value,
            "margin": self.margin,
        }


CASE_CONSTANTS = {"OnS": 0.25, "Interior": 0.125, "ExtFar": 0.25}


def case4_shape(theta, th1, m0):
    """sqrt((1 - cos(theta - theta1)) / (1 - cos theta1)) m0."""
    return np.sqrt((1.0 - np.cos(theta - th1)) / (1.0 - np.cos(th1))) * m0


def check_key_lemma(optics, dec, omegas, c4=None, tol=None, raise_on_violation=True):
    """Evaluate the applicable lower bound on |phi| at every sampled direction.

    Cases OnS, Interior and ExtFar use the constants 1/4, 1/8 and 1/4.  For
    ExtNear the bound is ``c4`` times the case-4 shape; with ``c4=None`` the
    bound is 0 and the ratio |phi| / shape is left to the caller (see
    :func:`fit_case4_constant`).  For a degenerate Interior decomposition the
    Interior bound is checked against every flagged maximizer.
    """
    pair = dec.pair
    gap = pair.gap
    tol = 1e-8 * gap if tol is None else tol
    omegas = sphere.normalize(np.atleast_2d(omegas))
    phi = phase(optics, pair, omegas)
    samples = []
    if dec.region in ("OnS", "Interior"):
        const = CASE_CONSTANTS[dec.region]
        maxs = dec.maximizers if (dec.degenerate and dec.maximizers is not None) else dec.omega0[None]
        d2 = np.sum((omegas[:, None, :] - maxs[None, :, :]) ** 2, axis=2)
        worst = np.argmax(d2, axis=1)
        bounds = const * gap * d2[np.arange(len(omegas)), worst]
        theta = sphere.angle_between(omegas, dec.omega0)
        for i in range(len(omegas)):
            samples.append(KeyLemmaSample(omegas[i], float(theta[i]), float("nan"), None, float("nan"),
                                          float(phi[i]), float(bounds[i]), dec.region))
    else:
        theta, az = sphere.axis_angles(dec.omega0, omegas)
        th1 = theta1(optics, dec, az)
        om1 = sphere.from_axis_angles(dec.omega0, th1, az)
        _, v0 = v0_vector(optics, pair, om1)
        diff = om1 - omegas
        cosang = np.abs(np.sum(v0 * diff, axis=1)) / (np.linalg.norm(v0, axis=1) * np.linalg.norm(diff, axis=1))
        alpha = np.arccos(np.clip(cosang, 0.0, 1.0))
        for i in range(len(omegas)):
            if theta[i] >= th1[i]:
                case = "ExtFar"
                bound = 0.25 * gap * float(np.sum(diff[i] ** 2))
                shape = float("nan")
            else:
                case = "ExtNear"
                shape = float(case4_shape(theta[i], th1[i], dec.m0))
                bound = 0.0 if c4 is None else c4 * shape
            samples.append(KeyLemmaSample(omegas[i], float(theta[i]), float(th1[i]), om1[i], float(alpha[i]),
                                          float(phi[i]), bound, case, shape))
    if raise_on_violation:
        for smp in samples:
            if smp.margin < -tol:
                raise BoundViolationError(
                    f"|phi| = {abs(smp.phi_value):.3e} < bound {smp.bound_value:.3e} ({smp.case})", smp
                )
    return samples


def fit_case4_constant(samples, min_gap=1e-6):
    """Smallest |phi| / shape over ExtNear samples not too close to D."""
    ratios = [abs(s.phi_value) / s.shape for s in samples
              if s.case == "ExtNear" and s.theta1 - s.theta > min_gap and s.shape > 0]
    return float(min(ratios)) if ratios else float("nan")
