"""Frequency-localized parametrix

    phi_j(t, x) = int_{S^2} int_0^inf e^{i lam u(t, x, omega)} psi(2^-j lam) f(lam omega) lam^2 dlam domega

and its first two spatial derivatives, by product quadrature on S^2 x [2^(j-1), 2^(j+1)].

The lambda rule is the uniform trapezoid rule.  The integrand vanishes to
all orders at both ends of the window, so the rule converges faster than any
power of the node count, and equal spacing lets the compiled kernel generate
the exponentials by recurrence.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from . import _backend, sphere
from .errors import UnderresolvedError

PSI_LO, PSI_HI = 0.5, 2.0
_PSI_MID = 0.5 * (PSI_LO + PSI_HI)
_PSI_SHIFT = 1.0 / ((_PSI_MID - PSI_LO) * (_PSI_MID - PSI_HI))

# aliasing margin of the trapezoid rule, in units of the phase frequency
_ALIAS_MARGIN = 540.0


def psi(lam):
    """C-infinity bump supported in [1/2, 2], normalized to max 1 (at lam = 5/4)."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    m = (lam > PSI_LO) & (lam < PSI_HI)
    lm = lam[m]
    out[m] = np.exp(1.0 / ((lm - PSI_LO) * (lm - PSI_HI)) - _PSI_SHIFT)
    return out


def lambda_nodes(phase_max, n_min=128):
    """Node count of the trapezoid rule on [1/2, 2] for phases |Phi| <= phase_max."""
    width = PSI_HI - PSI_LO
    need = width * (abs(phase_max) + _ALIAS_MARGIN) / (2.0 * np.pi)
    return int(max(n_min, np.ceil(need)))


@dataclass(frozen=True)
class DyadicWindow:
    """psi(2^-j lam): frequencies in the shell [2^(j-1), 2^(j+1)]."""

    j: int

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("dyadic level must be nonnegative")

    @property
    def scale(self):
        return 2.0**self.j

    def __call__(self, lam):
        return psi(np.asarray(lam, dtype=float) / self.scale)

    def rule(self, n):
        """Trapezoid nodes and weights in lam over the shell (n intervals)."""
        mu = np.linspace(PSI_LO, PSI_HI, n + 1)
        lam = self.scale * mu
        w = np.full(n + 1, self.scale * (PSI_HI - PSI_LO) / n)
        return lam, w


def _real_sph_harm(l, m, omega):
    omega = sphere.normalize(omega)
    theta = np.arccos(np.clip(omega[..., 2], -1.0, 1.0))
    phi = np.arctan2(omega[..., 1], omega[..., 0])
    y = special.sph_harm_y(l, abs(m), theta, phi)
    if m > 0:
        return np.sqrt(2.0) * (-1) ** m * y.real
    if m < 0:
        return np.sqrt(2.0) * (-1) ** m * y.imag
    return y.real


@dataclass
class FrequencyProfile:
    """f(lam omega) = radial(lam) * angular(omega)."""

    name: str
    radial: Callable
    angular: Callable
    angular_l2: float  # ||angular||_{L^2(S^2)}
    is_isotropic: bool = False

    @classmethod
    def radial_one(cls):
        return cls("radial_one", lambda lam: np.ones_like(np.asarray(lam, dtype=float)),
                   lambda w: np.ones(np.shape(w)[:-1]), np.sqrt(4.0 * np.pi), True)

    @classmethod
    def zero(cls):
        return cls("zero", lambda lam: np.zeros_like(np.asarray(lam, dtype=float)),
                   lambda w: np.zeros(np.shape(w)[:-1]), 0.0, True)

    @classmethod
    def harmonic(cls, l, m):
        """Real spherical harmonic Y_lm (unit L^2 norm) times a flat radial part."""
        if not (0 <= l <= 4 and -l <= m <= l):
            raise ValueError("harmonic profiles support 0 <= l <= 4, |m| <= l")
        return cls(f"harmonic_{l}_{m}", lambda lam: np.ones_like(np.asarray(lam, dtype=float)),
                   lambda w: _real_sph_harm(l, m, w), 1.0, l == 0)

    @classmethod
    def from_name(cls, name):
        if name == "radial_one":
            return cls.radial_one()
        if name == "zero":
            return cls.zero()
        if name.startswith("harmonic_"):
            parts = name.split("_")
            return cls.harmonic(int(parts[1]), int(parts[2]))
        raise ValueError(f"unknown profile {name!r}")

    def scaled(self, c):
        """c * f, for linearity checks."""
        return FrequencyProfile(f"{c}*{self.name}", lambda lam: c * self.radial(lam), self.angular,
                                abs(c) * self.angular_l2, self.is_isotropic)

    def data_norm(self, window, n=4096):
        """||psi(2^-j lam) f||_{L^2(R^3)}."""
        lam, w = window.rule(n)
        rad = np.sum(w * (window(lam) * np.abs(self.radial(lam))) ** 2 * lam**2)
        return float(np.sqrt(rad) * self.angular_l2)


@dataclass
class FieldSample:
    """Values of phi_j (or a derivative) on a tensor grid of t-slices x spatial points.

    ``values`` has shape (nt, nx) for order 0, (nt, nx, 3) for the gradient
    and (nt, nx, 3, 3) for the Hessian.  Weights make Riemann sums of the
    grid; radial grids carry the 4 pi r^2 dr shell volume in ``x_weights``.
    """

    t: np.ndarray
    t_weights: np.ndarray
    x: np.ndarray
    x_weights: np.ndarray
    values: np.ndarray
    derivative_order: int
    j: int
    meta: dict = field(default_factory=dict)

    def magnitude(self):
        """Pointwise |value| (Euclidean / Frobenius over components)."""
        v = np.abs(self.values)
        if self.derivative_order == 0:
            return v
        return np.sqrt(np.sum(v**2, axis=tuple(range(2, v.ndim))))


# quadrature core ----------------------------------------------------------------------------


def _sphere_degree_for(window, optics, t, x, profile_degree=4, margin=24):
    # omega-gradient of lam u is about lam |x - t omega| ~ lam (|x| + t) near flat
    lam_max = PSI_HI * window.scale
    reach = np.max(np.linalg.norm(np.atleast_2d(x), axis=1) + np.abs(np.atleast_1d(t)))
    return sphere.sphere_degree(1.1 * lam_max * reach, margin=margin) + 2 * profile_degree


def _point_values(optics, window, profile, t, x, order, degree, n_lam, kernels):
    """phi_j derivatives of the requested order at points (t_i, x_i), shape (n, ...)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    rule = sphere.SphereRule(degree)
    W = rule.nodes
    K = len(W)
    T = np.repeat(t, K)
    X = np.repeat(x, K, axis=0)
    Om = np.tile(W, (n, 1))
    f = optics.evaluate(T, X, Om, derivs=False)
    phase = f.u.reshape(n, K)
    ang = np.asarray(profile.angular(W), dtype=float)
    base = (rule.weights * ang)[None, :]
    lam, lw = window.rule(n_lam)
    g = lw * window(lam) * np.asarray(profile.radial(lam), dtype=float) * lam**2
    lam0, dlam = lam[0], lam[1] - lam[0]
    if order == 0:
        return kernels.osc_sum(phase, np.broadcast_to(base, phase.shape), lam0, dlam, g)
    grad = f.grad_u.reshape(n, K, 3)
    if order == 1:
        out = np.empty((n, 3), dtype=complex)
        for c in range(3):
            out[:, c] = 1j * kernels.osc_sum(phase, base * grad[:, :, c], lam0, dlam, g * lam)
        return out
    out = np.empty((n, 3, 3), dtype=complex)
    hess = None
    if not getattr(optics.metric, "is_flat", False):
        hess = optics.evaluate(T, X, Om, derivs=True).hess_u.reshape(n, K, 3, 3)
    for a in range(3):
        for b in range(a, 3):
            v = -kernels.osc_sum(phase, base * grad[:, :, a] * grad[:, :, b], lam0, dlam, g * lam**2)
            if hess is not None:
                v = v + 1j * kernels.osc_sum(phase, base * hess[:, :, a, b], lam0, dlam, g * lam)
            out[:, a, b] = v
            out[:, b, a] = v
    return out


def parametrix_at(optics, window, profile, t, x, order=0, degree=None, n_lam=None, check=True,
                  rel_tol=1e-3, kernels=None):
    """phi_j, grad phi_j or the Hessian at scattered points (t_i, x_i).

    With ``check`` the sphere degree and the lambda node count are both
    refined; a relative change above ``rel_tol`` raises UnderresolvedError.
    Returns ``(values, info)``.
    """
    kernels = kernels or _backend
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t, x = np.broadcast_to(t, (len(x),)) if len(t) == 1 else t, x
    if degree is None:
        degree = _sphere_degree_for(window, optics, t, x)
    if n_lam is None:
        u_max = np.max(np.linalg.norm(x, axis=1) + np.abs(t)) + 1.0
        n_lam = lambda_nodes(window.scale * u_max)
    vals = _point_values(optics, window, profile, t, x, order, degree, n_lam, kernels)
    info = {"sphere_degree": int(degree), "n_lambda": int(n_lam), "rel_change": None}
    if check:
        fine = _point_values(optics, window, profile, t, x, order, int(1.5 * degree) + 8, 2 * n_lam, kernels)
        scale = max(np.max(np.abs(fine)), 1e-300)
        change = float(np.max(np.abs(fine - vals)) / scale)
        info["rel_change"] = change
        if change > rel_tol:
            raise UnderresolvedError(f"refinement changed values by {change:.2e} (relative)")
        vals = fine
    return vals, info


def _grid_eval(optics, window, profile, grid, order, **kw):
    t, tw, x, xw = grid
    T = np.repeat(t, len(x))
    X = np.tile(x, (len(t), 1))
    vals, info = parametrix_at(optics, window, profile, T, X, order=order, **kw)
    shape = (len(t), len(x)) + vals.shape[1:]
    return FieldSample(np.asarray(t), np.asarray(tw), np.asarray(x), np.asarray(xw),
                       vals.reshape(shape), order, window.j, info)


def eval_parametrix(optics, window, profile, grid, **kw):
    """phi_j on ``grid = (t, t_weights, x, x_weights)`` as a FieldSample."""
    return _grid_eval(optics, window, profile, grid, 0, **kw)


def eval_gradient(optics, window, profile, grid, **kw):
    """grad phi_j = int i lam grad u e^{i lam u} psi f lam^2."""
    return _grid_eval(optics, window, profile, grid, 1, **kw)


def eval_hessian(optics, window, profile, grid, **kw):
    """Hessian of phi_j: -int lam^2 du du e^{i lam u} ... + i int lam D^2 u e^{i lam u} ..."""
    return _grid_eval(optics, window, profile, grid, 2, **kw)


# flat radial reductions -------------------------------------------------------------------


class RadialFlat:
    """One-dimensional reduction of phi_j for f = radial(lam) in Minkowski space.

    With G(tau) = int psi(2^-j lam) radial(lam) lam e^{-i lam tau} dlam,

        phi_j(t, r) = (2 pi / (i r)) [G(t - r) - G(t + r)],

    and r-derivatives follow from G', G''.  At r = 0 the limit
    4 pi int e^{-i lam t} psi radial lam^2 dlam is used.
    """

    def __init__(self, window, profile=None, n_lam=None, kernels=None, span=None):
        self.window = window
        self.profile = profile or FrequencyProfile.radial_one()
        if not self.profile.is_isotropic:
            raise ValueError("radial reduction needs an isotropic profile")
        self.kernels = kernels or _backend
        span = 10.0 if span is None else span
        self.n_lam = n_lam or lambda_nodes(window.scale * span)
        lam, lw = window.rule(self.n_lam)
        self.lam = lam
        self.lam0 = lam[0]
        self.dlam = lam[1] - lam[0]
        ang = self.profile.angular(np.array([[0.0, 0.0, 1.0]]))[0]
        self.g = lw * window(lam) * np.asarray(self.profile.radial(lam), dtype=float) * lam * ang

    def _G(self, tau, power):
        # int g lam^power e^{-i lam tau}
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        vals = self.kernels.osc_sum(-flat[:, None], np.ones((len(flat), 1)), self.lam0, self.dlam,
                                    self.g * self.lam**power)
        return vals.reshape(tau.shape)

    def derivatives(self, t, r):
        """(phi, d_r phi, d_r^2 phi) on broadcast arrays t, r > 0."""
        t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
        a, b = t - r, t + r
        G0a, G0b = self._G(a, 0), self._G(b, 0)
        G1a, G1b = -1j * self._G(a, 1), -1j * self._G(b, 1)
        G2a, G2b = -self._G(a, 2), -self._G(b, 2)
        c = 2.0 * np.pi / 1j
        D0 = G0a - G0b
        D1 = -G1a - G1b
        D2 = G2a - G2b
        phi = c * D0 / r
        d1 = c * (D1 / r - D0 / r**2)
        d2 = c * (D2 / r - 2.0 * D1 / r**2 + 2.0 * D0 / r**3)
        return phi, d1, d2

    def value(self, t, r):
        t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
        out = np.empty(t.shape, dtype=complex)
        small = r == 0.0
        if np.any(~small):
            out[~small] = self.derivatives(t[~small], r[~small])[0]
        if np.any(small):
            out[small] = 4.0 * np.pi * self._G(t[small], 1)
        return out

    def gradient_norm(self, t, r):
        return np.abs(self.derivatives(t, r)[1])

    def hessian_norm(self, t, r):
        _, d1, d2 = self.derivatives(t, r)
        return np.sqrt(np.abs(d2) ** 2 + 2.0 * np.abs(d1 / r) ** 2)

    def lattice(self, delta, nt, nr, power):
        """G_power(m delta) for m = -nr .. nt + nr, the table used by :meth:`slab`."""
        m = np.arange(-nr, nt + nr + 1)
        return m, self._G(m * delta, power)

    def slab(self, delta, nt, nr, t_rows=None):
        """(phi, d_r phi, d_r^2 phi) on midpoint grids t_i = (i + 1/2) delta, r_k = (k + 1/2) delta.

        t +- r are integer multiples of delta on these grids, so G and its
        derivatives are tabulated once on a 1-D lattice.  ``t_rows`` selects
        a subset of t indices (for chunked reductions).
        """
        t_rows = np.arange(nt) if t_rows is None else np.asarray(t_rows)
        tabs = [self.lattice(delta, nt, nr, p)[1] for p in (0, 1, 2)]
        i = t_rows[:, None]
        k = np.arange(nr)[None, :]
        lo = i - k + nr  # index of (i - k) delta
        hi = i + k + 1 + nr  # index of (i + k + 1) delta
        r = (k + 0.5) * delta
        G0a, G0b = tabs[0][lo], tabs[0][hi]
        G1a, G1b = -1j * tabs[1][lo], -1j * tabs[1][hi]
        G2a, G2b = -tabs[2][lo], -tabs[2][hi]
        c = 2.0 * np.pi / 1j
        D0 = G0a - G0b
        D1 = -G1a - G1b
        D2 = G2a - G2b
        phi = c * D0 / r
        d1 = c * (D1 / r - D0 / r**2)
        d2 = c * (D2 / r - 2.0 * D1 / r**2 + 2.0 * D0 / r**3)
        return phi, d1, d2
