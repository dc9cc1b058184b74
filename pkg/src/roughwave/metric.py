"""Foliated Lorentzian metrics on [0, 1] x [-R, R]^3.

Metrics are given in lapse/shift form,

    g = -n^2 dt^2 + gamma_ij (dx^i + beta^i dt)(dx^j + beta^j dt),

with a Gaussian bump B(x) = exp(-|x - c|^2 / w^2) driving all three pieces:

    n = 1 + eps * kappa * B,   beta = eps * B * v,   gamma = I + eps * B * S.

Every derivative of this family is available in closed form, which is what
the characteristic solver and the Christoffel symbols rely on.  Minkowski
space is the eps = 0 member.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, LapseBoundError, OutOfDomainError, SignatureError

DEFAULT_SHIFT = (0.3, -0.2, 0.1)
DEFAULT_SPATIAL = ((1.0, 0.3, 0.0), (0.3, -0.5, 0.2), (0.0, 0.2, 0.4))


@dataclass(frozen=True)
class MetricSpec:
    family: str = "minkowski"
    epsilon: float = 0.0
    center: tuple = (0.0, 0.0, 0.0)
    width: float = 1.0
    lapse_coeff: float = 0.5
    shift: tuple = DEFAULT_SHIFT
    spatial: tuple = DEFAULT_SPATIAL
    box_radius: float = 4.0
    derivative_scheme: str = "analytic"
    step: float = 1e-4
    richardson: bool = False
    epsilon_max: float = 0.1

    _KEYS = (
        "family", "epsilon", "center", "width", "lapse_coeff", "shift", "spatial",
        "box_radius", "derivative_scheme", "step", "richardson", "epsilon_max",
    )

    @classmethod
    def from_mapping(cls, data, path="metric"):
        unknown = sorted(set(data) - set(cls._KEYS))
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}", "unknown key")
        kw = dict(data)
        for key in ("center", "shift"):
            if key in kw:
                v = kw[key]
                if not (isinstance(v, (list, tuple)) and len(v) == 3):
                    raise ConfigError(f"{path}.{key}", "expected a list of 3 numbers")
                kw[key] = tuple(float(a) for a in v)
        if "spatial" in kw:
            s = np.asarray(kw["spatial"], dtype=float)
            if s.shape != (3, 3) or not np.allclose(s, s.T):
                raise ConfigError(f"{path}.spatial", "expected a symmetric 3x3 matrix")
            kw["spatial"] = tuple(tuple(r) for r in s)
        for key in ("epsilon", "width", "lapse_coeff", "box_radius", "step", "epsilon_max"):
            if key in kw:
                try:
                    kw[key] = float(kw[key])
                except (TypeError, ValueError):
                    raise ConfigError(f"{path}.{key}", "expected a number") from None
        spec = cls(**kw)
        spec.validate(path)
        return spec

    def validate(self, path="metric"):
        if self.family not in ("minkowski", "bump"):
            raise ConfigError(f"{path}.family", f"unknown family {self.family!r}")
        if self.derivative_scheme not in ("analytic", "central"):
            raise ConfigError(f"{path}.derivative_scheme", f"unknown scheme {self.derivative_scheme!r}")
        if not 0.0 <= self.epsilon <= self.epsilon_max:
            raise ConfigError(f"{path}.epsilon", f"must lie in [0, {self.epsilon_max}]")
        if self.width <= 0.0:
            raise ConfigError(f"{path}.width", "must be positive")
        if self.box_radius <= 1.0:
            raise ConfigError(f"{path}.box_radius", "must exceed 1")
        if self.step <= 0.0:
            raise ConfigError(f"{path}.step", "must be positive")

    def to_dict(self):
        return {k: getattr(self, k) for k in self._KEYS}


@dataclass
class FoliationData:
    lapse: np.ndarray
    normal: np.ndarray
    induced_metric: np.ndarray
    volume_density: np.ndarray


class SpacetimeMetric:
    """Evaluable metric of the bump family (Minkowski when eps = 0).

    All evaluators broadcast over leading axes of ``x`` (shape (..., 3)).  The
    family is static, so ``t`` only enters through domain checks.
    """

    def __init__(self, spec):
        self.spec = spec
        self.kind = "Minkowski" if spec.family == "minkowski" else "Perturbed"
        self.epsilon = 0.0 if spec.family == "minkowski" else float(spec.epsilon)
        self.center = np.asarray(spec.center, dtype=float)
        self.width = float(spec.width)
        self.kappa = float(spec.lapse_coeff)
        self.shift_dir = np.asarray(spec.shift, dtype=float)
        self.S = np.asarray(spec.spatial, dtype=float)
        self.R = float(spec.box_radius)
        self.derivative_scheme = spec.derivative_scheme
        self.step = float(spec.step)

    @property
    def is_flat(self):
        return self.epsilon == 0.0

    def params(self):
        """Packed parameter vector consumed by the compiled ray kernel."""
        return np.concatenate(
            [[self.epsilon], self.center, [self.width, self.kappa], self.shift_dir, self.S.ravel()]
        ).astype(float)

    # domain ------------------------------------------------------------------

    def inside(self, t, x, pad=0.0):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        ok_t = (t >= -1e-12) & (t <= 1.0 + 1e-12)
        ok_x = np.all(np.abs(x) <= self.R - pad, axis=-1)
        return ok_t & ok_x

    def require_inside(self, t, x):
        if not np.all(self.inside(t, x)):
            raise OutOfDomainError(f"point outside [0,1] x [-{self.R},{self.R}]^3")

    # bump and its derivatives --------------------------------------------------

    def bump(self, x, order=0):
        """eps * B and, for order >= 1, its gradient and Hessian."""
        x = np.asarray(x, dtype=float)
        d = x - self.center
        w2 = self.width**2
        E = self.epsilon * np.exp(-np.sum(d * d, axis=-1) / w2)
        if order == 0:
            return E
        dE = (-2.0 / w2) * d * E[..., None]
        if order == 1:
            return E, dE
        ddE = (4.0 / w2**2) * d[..., :, None] * d[..., None, :] - (2.0 / w2) * np.eye(3)
        ddE = ddE * E[..., None, None]
        return E, dE, ddE

    def adm(self, x):
        """Lapse n, shift vector beta^i and spatial metric gamma_ij at x."""
        E = self.bump(x)
        n = 1.0 + self.kappa * E
        beta = E[..., None] * self.shift_dir
        gamma = np.eye(3) + E[..., None, None] * self.S
        return n, beta, gamma

    def adm_gradient(self, x):
        """d_k n, d_k beta^i (index order [..., k, i]) and d_k gamma_ij ([..., k, i, j])."""
        _, dE = self.bump(x, order=1)
        dn = self.kappa * dE
        dbeta = dE[..., :, None] * self.shift_dir
        dgamma = dE[..., :, None, None] * self.S
        return dn, dbeta, dgamma

    # spacetime components --------------------------------------------------------

    def components(self, t, x):
        """g_{alpha beta} with index 0 = t, shape (..., 4, 4)."""
        n, beta, gamma = self.adm(x)
        beta_low = np.einsum("...ij,...j->...i", gamma, beta)
        shape = np.shape(n) + (4, 4)
        g = np.empty(shape)
        g[..., 0, 0] = -(n**2) + np.sum(beta_low * beta, axis=-1)
        g[..., 0, 1:] = beta_low
        g[..., 1:, 0] = beta_low
        g[..., 1:, 1:] = gamma
        return g

    def inverse(self, t, x):
        """g^{alpha beta} from the lapse/shift decomposition."""
        n, beta, gamma = self.adm(x)
        gi = np.linalg.inv(gamma)
        shape = np.shape(n) + (4, 4)
        h = np.empty(shape)
        n2 = n**2
        h[..., 0, 0] = -1.0 / n2
        h[..., 0, 1:] = beta / n2[..., None]
        h[..., 1:, 0] = beta / n2[..., None]
        h[..., 1:, 1:] = gi - beta[..., :, None] * beta[..., None, :] / n2[..., None, None]
        return h

    def _analytic_dcomponents(self, x):
        n, beta, gamma = self.adm(x)
        dn, dbeta, dgamma = self.adm_gradient(x)
        beta_low = np.einsum("...ij,...j->...i", gamma, beta)
        dbeta_low = np.einsum("...kij,...j->...ki", dgamma, beta) + np.einsum(
            "...ij,...kj->...ki", gamma, dbeta
        )
        shape = np.shape(n) + (4, 4, 4)
        dg = np.zeros(shape)
        dg[..., 1:, 0, 0] = (
            -2.0 * n[..., None] * dn
            + np.einsum("...ki,...i->...k", dbeta_low, beta)
            + np.einsum("...i,...ki->...k", beta_low, dbeta)
        )
        dg[..., 1:, 0, 1:] = dbeta_low
        dg[..., 1:, 1:, 0] = dbeta_low
        dg[..., 1:, 1:, 1:] = dgamma
        return dg

    def _central_dcomponents(self, t, x, h):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = x.shape[:-1] + (4, 4, 4)
        dg = np.empty(shape)
        dg[..., 0, :, :] = (self.components(t + h, x) - self.components(t - h, x)) / (2.0 * h)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            dg[..., k + 1, :, :] = (self.components(t, x + e) - self.components(t, x - e)) / (2.0 * h)
        return dg

    def dcomponents(self, t, x, scheme=None, step=None):
        """d_mu g_{alpha beta}, index order [..., mu, alpha, beta]."""
        scheme = scheme or self.derivative_scheme
        if scheme == "analytic":
            return self._analytic_dcomponents(x)
        h = self.step if step is None else step
        d1 = self._central_dcomponents(t, x, h)
        if not self.spec.richardson:
            return d1
        d2 = self._central_dcomponents(t, x, h / 2.0)
        return (4.0 * d2 - d1) / 3.0

    # foliation ------------------------------------------------------------------------

    def lapse(self, t, x):
        """n recovered from the inverse metric via n^{-2} = -g^{tt}, i.e. n^{-1} = T(t)."""
        return 1.0 / np.sqrt(-self.inverse(t, x)[..., 0, 0])

    def foliation(self, t, x):
        n, beta, gamma = self.adm(x)
        normal = np.concatenate([(1.0 / n)[..., None], -beta / n[..., None]], axis=-1)
        return FoliationData(
            lapse=n,
            normal=normal,
            induced_metric=gamma,
            volume_density=np.sqrt(np.linalg.det(gamma)),
        )

    def validation_grid(self, nt=5, nx=9, pad=0.0):
        ts = np.linspace(0.0, 1.0, nt)
        xs = np.linspace(-self.R + pad, self.R - pad, nx)
        T, X, Y, Z = np.meshgrid(ts, xs, xs, xs, indexing="ij")
        return T.ravel(), np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)


def make_metric(spec, grid=None):
    """Build a metric and validate signature and lapse bounds on a grid."""
    if isinstance(spec, dict):
        spec = MetricSpec.from_mapping(spec)
    spec.validate()
    metric = SpacetimeMetric(spec)
    t, x = grid if grid is not None else metric.validation_grid()
    g = metric.components(t, x)
    if not np.array_equal(g, np.swapaxes(g, -1, -2)):
        raise SignatureError("metric components are not symmetric")
    eig = np.linalg.eigvalsh(g)
    n_neg = np.sum(eig < 0.0, axis=-1)
    if np.any(n_neg != 1) or np.any(np.abs(eig) < 1e-12):
        bad = int(np.argmax(n_neg != 1))
        raise SignatureError(f"non-Lorentzian sample at t={t[bad]}, x={x[bad]}")
    n = metric.lapse(t, x)
    if np.any(n < 0.5) or np.any(n > 2.0):
        raise LapseBoundError(f"lapse range [{n.min()}, {n.max()}] leaves [1/2, 2]")
    return metric


def minkowski(box_radius=4.0):
    return make_metric(MetricSpec(family="minkowski", box_radius=box_radius))


def bump_metric(epsilon, **kw):
    return make_metric(MetricSpec(family="bump", epsilon=epsilon, **kw))


def christoffel(metric, t, x, scheme=None, step=None):
    """Gamma^alpha_{beta gamma}, shape (..., 4, 4, 4), upper index first."""
    metric.require_inside(t, x)
    dg = metric.dcomponents(t, x, scheme=scheme, step=step)
    ginv = metric.inverse(t, x)
    # lower-index symbol Gamma_{delta beta gamma}
    low = 0.5 * (
        np.swapaxes(dg, -3, -2)  # d_beta g_{delta gamma} -> [delta, beta, gamma]
        + np.moveaxis(dg, -3, -1)  # d_gamma g_{delta beta}
        - np.moveaxis(dg, -3, -3)  # d_delta g_{beta gamma}
    )
    return np.einsum("...ad,...dbc->...abc", ginv, low)


def check_volume_comparison(metric, grid=None):
    """Lapse range on a grid; the comparison dM ~ dSigma_t dt needs n in [1/2, 2]."""
    t, x = grid if grid is not None else metric.validation_grid()
    n = metric.lapse(t, x)
    lo, hi = float(n.min()), float(n.max())
    eps = metric.epsilon
    return {
        "lapse_min": lo,
        "lapse_max": hi,
        "within_bounds": bool(lo >= 0.5 and hi <= 2.0),
        "epsilon": eps,
        "deviation_constant": (max(abs(lo - 1.0), abs(hi - 1.0)) / eps) if eps > 0 else 0.0,
        "n_samples": int(n.size),
    }
