"""The TT* kernel

    K(t, x, s, y) = int_{S^2} int_0^inf e^{i lam 2^j (u(t/2^j, x/2^j, omega) - u(s/2^j, y/2^j, omega))}
                    a(t/2^j, x/2^j, omega) a(s/2^j, y/2^j, omega) psi(lam)^2 lam^2 dlam domega

on the rescaled slab 2^j M, its integration-by-parts majorant and the
dispersive and rescaling checks built on it.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import _backend, sphere
from .errors import BoundViolationError, OutOfDomainError, UnderresolvedError
from .parametrix import PSI_HI, PSI_LO, DyadicWindow, lambda_nodes, psi
from .phase_geometry import PhasePair, decompose


def _g(lam):
    return psi(lam) ** 2 * lam**2


@lru_cache(maxsize=1)
def psi_constants():
    """L^1 norms of g = psi^2 lam^2 and of g'' and the majorant constant C_psi.

    Two integrations by parts in lam give |int g e^{i lam Phi}| <= ||g''||_1 / Phi^2,
    and trivially <= ||g||_1; min(1, Phi^-2) <= 2 / (1 + Phi^2) turns the pair
    into C_psi / (1 + Phi^2) with C_psi = 2 max(||g||_1, ||g''||_1).
    """
    lam = np.linspace(PSI_LO, PSI_HI, 200001)
    h = lam[1] - lam[0]
    g = _g(lam)
    g2 = np.zeros_like(g)
    g2[1:-1] = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / (h * h)
    l1 = float(integrate.trapezoid(np.abs(g), lam))
    l1_dd = float(integrate.trapezoid(np.abs(g2), lam))
    return {"g_l1": l1, "g2_l1": l1_dd, "C_psi": 2.0 * max(l1, l1_dd)}


@dataclass
class KernelConfig:
    """Level ``j``, amplitude a(t, x, omega) with sup |a| <= 1 and the bump psi."""

    j: int
    a_symbol: Optional[Callable] = None
    window: DyadicWindow = field(default_factory=lambda: DyadicWindow(0))

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("dyadic level must be nonnegative")

    @property
    def scale(self):
        return 2.0**self.j

    def amplitude(self, t, x, omega):
        if self.a_symbol is None:
            return np.ones(len(np.atleast_2d(omega)))
        return np.asarray(self.a_symbol(t, x, omega), dtype=float)

    def check_symbol(self, rng, n=256, box=1.0):
        """Sample |a| on random points; raise BoundViolationError above 1."""
        if self.a_symbol is None:
            return 1.0
        t = rng.uniform(0.0, 1.0, n)
        x = rng.uniform(-box, box, (n, 3))
        w = sphere.random_directions(rng, n)
        a = np.abs(self.amplitude(t, x, w))
        k = int(np.argmax(a))
        if a[k] > 1.0 + 1e-12:
            raise BoundViolationError(f"|a| = {a[k]:.6g} > 1", (t[k], x[k], w[k]))
        return float(a[k])


@dataclass
class KernelSample:
    pair: tuple  # (t, x, s, y) in rescaled coordinates
    value: complex
    ibp_majorant: float
    dispersive_ratio: float
    meta: dict = field(default_factory=dict)

    def row(self):
        t, x, s, y = self.pair
        return {
            "t": t, "x": list(x), "s": s, "y": list(y),
            "re": self.value.real, "im": self.value.imag, "absK": abs(self.value),
            "majorant": self.ibp_majorant, "ratio": self.dispersive_ratio,
        }


def _unpack_pair(pair):
    t, x, s, y = pair
    return float(t), np.asarray(x, dtype=float), float(s), np.asarray(y, dtype=float)


def _phase_on_rule(optics, config, pair, rule):
    """Rescaled phase 2^j phi and amplitude product on the nodes of ``rule``."""
    t, x, s, y = _unpack_pair(pair)
    c = config.scale
    tt, xx, ss, yy = t / c, x / c, s / c, y / c
    R = optics.metric.R
    for tau, z in ((tt, xx), (ss, yy)):
        if not (-1e-12 <= tau <= 1.0 + 1e-12) or np.any(np.abs(z) > R):
            raise OutOfDomainError(f"rescaled point ({tau}, {list(z)}) outside [0,1] x box")
    W = rule.nodes
    u1 = optics.u(tt, xx, W)
    u2 = optics.u(ss, yy, W)
    amp = config.amplitude(tt, xx, W) * config.amplitude(ss, yy, W)
    return c * (u1 - u2), amp


def _default_rules(optics, config, pair):
    t, x, s, y = _unpack_pair(pair)
    r = float(np.linalg.norm(x - y))
    tau = abs(t - s)
    bend = 0.0 if getattr(optics.metric, "is_flat", False) else 0.5 * (r + tau)
    degree = sphere.sphere_degree(PSI_HI * (1.05 * r + bend))
    pole = (x - y) if r > 0 else (0.0, 0.0, 1.0)
    n_lam = lambda_nodes(1.2 * (r + tau) + 1.0)
    return degree, pole, n_lam


def _lam_rule(n_lam):
    lam = np.linspace(PSI_LO, PSI_HI, n_lam + 1)
    d = lam[1] - lam[0]
    return lam[0], d, d * _g(lam)


def _evaluate(optics, config, pair, degree, pole, n_lam, kernels):
    rule = sphere.SphereRule(degree, pole)
    Phi, amp = _phase_on_rule(optics, config, pair, rule)
    lam0, d, wts = _lam_rule(n_lam)
    val = kernels.osc_sum(Phi[None, :], (rule.weights * amp)[None, :], lam0, d, wts)[0]
    maj = psi_constants()["C_psi"] * float(np.sum(rule.weights / (1.0 + Phi**2)))
    return complex(val), maj


def eval_kernel(optics, config, pair, degree=None, n_lam=None, check=True, rel_tol=1e-3, kernels=None):
    """K at one rescaled pair (t, x, s, y) in 2^j M.

    The sphere rule's pole is aligned with x - y.  With ``check`` the value
    is recomputed on refined rules; a relative change above ``rel_tol``
    (relative to max(|K|, K at zero separation * 1e-6)) raises
    UnderresolvedError and the refined value is returned otherwise.
    """
    kernels = kernels or _backend
    d0, pole, n0 = _default_rules(optics, config, pair)
    degree = d0 if degree is None else degree
    n_lam = n0 if n_lam is None else n_lam
    val, maj = _evaluate(optics, config, pair, degree, pole, n_lam, kernels)
    meta = {"sphere_degree": int(degree), "n_lambda": int(n_lam)}
    if check:
        fine, maj = _evaluate(optics, config, pair, int(1.5 * degree) + 8, pole, 2 * n_lam, kernels)
        floor = 1e-6 * 4.0 * np.pi * psi_constants()["g_l1"]
        change = abs(fine - val) / max(abs(fine), floor)
        meta["rel_change"] = float(change)
        if change > rel_tol:
            raise UnderresolvedError(f"kernel refinement changed value by {change:.2e} (relative)")
        val = fine
    t, _, s, _ = _unpack_pair(pair)
    p = (float(pair[0]), tuple(float(a) for a in pair[1]), float(pair[2]), tuple(float(a) for a in pair[3]))
    return KernelSample(p, val, maj, abs(val) * abs(t - s), meta)


def ibp_majorant(optics, config, pair, omega_rule=None):
    """C_psi int_{S^2} domega / (1 + (2^j phi)^2) on ``omega_rule`` (default: eval_kernel's rule)."""
    if omega_rule is None:
        degree, pole, _ = _default_rules(optics, config, pair)
        omega_rule = sphere.SphereRule(degree, pole)
    Phi, _ = _phase_on_rule(optics, config, pair, omega_rule)
    return psi_constants()["C_psi"] * float(np.sum(omega_rule.weights / (1.0 + Phi**2)))


# flat oracle --------------------------------------------------------------------------------


def flat_kernel_oracle(tau, r, epsabs=1e-14, epsrel=1e-12):
    """(4 pi / r) int e^{-i lam tau} psi^2 lam sin(lam r) dlam by adaptive quadrature (r = 0 limit included)."""

    def part(fun):
        return integrate.quad(fun, PSI_LO, PSI_HI, epsabs=epsabs, epsrel=epsrel, limit=400)[0]

    if r == 0.0:
        re = part(lambda l: _g(l) * np.cos(l * tau))
        im = part(lambda l: -_g(l) * np.sin(l * tau))
        return 4.0 * np.pi * complex(re, im)
    re = part(lambda l: psi(l) ** 2 * l * np.sin(l * r) * np.cos(l * tau))
    im = part(lambda l: -psi(l) ** 2 * l * np.sin(l * r) * np.sin(l * tau))
    return 4.0 * np.pi / r * complex(re, im)


# dispersive decay ---------------------------------------------------------------------------


@dataclass
class DispersiveReport:
    j: int
    rows: list
    slopes: dict  # region -> fitted log-log slope of max |K| vs |t - s|
    max_ratio: float
    majorant_ok: bool
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "j": self.j, "slopes": dict(self.slopes), "max_ratio": self.max_ratio,
            "majorant_ok": self.majorant_ok, "n_pairs": len(self.rows), "meta": dict(self.meta),
        }


def loglog_slope(dt, vals):
    """Least-squares slope of log vals against log dt."""
    return float(np.polyfit(np.log(np.asarray(dt, dtype=float)), np.log(np.asarray(vals, dtype=float)), 1)[0])


def dispersive_pairs(optics, j, taus, base_x=(0.0, 0.0, 0.0), directions=None, offset=0.1, t0=0.0):
    """Rescaled pairs straddling the light cone for each |t - s| in ``taus``.

    For every direction the cone point y_S = ray point at time s is found,
    then Interior and Exterior points are placed a fixed rescaled distance
    ``offset`` inside and outside along the chord from x.  Every pair is
    labelled by the sign of m0 on the unrescaled pair, not by construction.
    """
    c = 2.0**j
    if directions is None:
        directions = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [-0.48, 0.64, -0.6]])
    directions = sphere.normalize(np.atleast_2d(directions))
    x = np.asarray(base_x, dtype=float)
    out = []
    for tau in taus:
        s = t0 + tau
        for w in directions:
            yS = optics.ray_point(t0 / c, x / c, w, s / c)[0] * c
            d = yS - x
            r = np.linalg.norm(d)
            for shift in (0.0, -offset, offset):
                y = x + d * (1.0 + shift / r)
                dec = decompose(optics, PhasePair(t0 / c, x / c, s / c, y / c))
                out.append({"tau": float(tau), "pair": (t0, tuple(x), s, tuple(y)), "region": dec.region,
                            "m0": dec.m0})
    return out


def check_dispersive(optics, config, pair_set, ratio_ceiling=None, check=True):
    """|K|, majorant and |K| |t - s| over ``pair_set`` with the per-region decay slope.

    ``pair_set`` is a list of dicts with keys ``tau``, ``pair`` and ``region``
    (see :func:`dispersive_pairs`).  Pairs with t = s are excluded from the
    regression.
    """
    rows = []
    scale_K = 4.0 * np.pi * psi_constants()["g_l1"]
    ok = True
    for item in pair_set:
        ks = eval_kernel(optics, config, item["pair"], check=check)
        row = ks.row()
        row.update({"tau": item["tau"], "region": item["region"], "j": config.j})
        if ks.ibp_majorant + 1e-4 * scale_K < abs(ks.value):
            ok = False
        rows.append(row)
    slopes = {}
    for region in ("OnS", "Interior", "Exterior"):
        by_tau = {}
        for r in rows:
            if r["region"] == region and r["tau"] > 0:
                by_tau[r["tau"]] = max(by_tau.get(r["tau"], 0.0), r["absK"])
        if len(by_tau) >= 3:
            taus = sorted(by_tau)
            slopes[region] = loglog_slope(taus, [by_tau[t] for t in taus])
    ratios = [r["ratio"] for r in rows if r["tau"] > 0]
    max_ratio = float(max(ratios)) if ratios else 0.0
    rep = DispersiveReport(config.j, rows, slopes, max_ratio, ok, {"K_scale": scale_K})
    if ratio_ceiling is not None:
        rep.meta["ratio_ceiling"] = ratio_ceiling
        rep.meta["ratio_ok"] = max_ratio <= ratio_ceiling
    return rep


# TT* rescaling identity ----------------------------------------------------------------------


@dataclass
class RescalingReport:
    j: int
    probes: np.ndarray  # rescaled probe points (n, 4)
    lhs: np.ndarray  # U_j h at the unrescaled probes
    rhs: np.ndarray  # 2^-j A h_j at the rescaled probes
    rel_error: float

    def to_dict(self):
        return {"j": self.j, "n_probes": int(len(self.probes)), "rel_error": self.rel_error,
                "lhs_abs_max": float(np.max(np.abs(self.lhs))) if len(self.lhs) else 0.0}


def source_grid(center, half_width, n_space, s_nodes):
    """Tensor midpoint grid (points (n, 4) and cell volumes) for the source h on M."""
    c = np.asarray(center, dtype=float)
    e = (np.arange(n_space) + 0.5) / n_space * 2.0 - 1.0
    g1 = e * half_width
    X, Y, Z = np.meshgrid(c[0] + g1, c[1] + g1, c[2] + g1, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    s_nodes = np.asarray(s_nodes, dtype=float)
    ds = (s_nodes[-1] - s_nodes[0]) / max(len(s_nodes) - 1, 1) if len(s_nodes) > 1 else 1.0
    dV = (2.0 * half_width / n_space) ** 3 * ds
    S = np.repeat(s_nodes, len(pts))
    P = np.tile(pts, (len(s_nodes), 1))
    return np.column_stack([S, P]), np.full(len(S), dV)


def apply_TTstar(optics, config, h_vals, src, dV, probes, degree, n_lam, pole=(0.0, 0.0, 1.0)):
    """U_j h = T_j T_j^* h at unrescaled ``probes`` by nested quadrature.

    T_j^* h(lam omega) = psi(2^-j lam) int a e^{-i lam u(s, y, omega)} h ds dy is tabulated on a
    fixed sphere rule x lam rule, then T_j integrates it against e^{i lam u(t, x, omega)}.
    """
    rule = sphere.SphereRule(degree, pole)
    W = rule.nodes
    c = config.scale
    lam = c * np.linspace(PSI_LO, PSI_HI, n_lam + 1)
    dlam = lam[1] - lam[0]
    win = psi(lam / c)
    Tstar = np.zeros((len(W), len(lam)), dtype=complex)
    for k, w in enumerate(W):
        u_src = optics.u(src[:, 0], src[:, 1:4], w)
        a_src = config.amplitude(src[:, 0], src[:, 1:4], np.broadcast_to(w, (len(src), 3)))
        Tstar[k] = win * ((h_vals * dV * a_src) @ np.exp(-1j * np.outer(u_src, lam)))
    out = np.zeros(len(probes), dtype=complex)
    wl = dlam * win * lam**2
    for i, (t, *x) in enumerate(probes):
        u_p = optics.u(t, np.asarray(x), W)
        a_p = config.amplitude(t, np.asarray(x), W)
        E = np.exp(1j * np.outer(u_p, lam))
        out[i] = np.sum(rule.weights[:, None] * a_p[:, None] * E * Tstar * wl[None, :])
    return out


def apply_A(optics, config, h_vals, src, dV, probes, check=False):
    """2^-j A h_j at rescaled probes, A h_j(t, x) = int K(t, x, s, y) h_j(s, y) ds dy over 2^j M.

    The source sum uses the same points as :func:`apply_TTstar`, mapped to
    2^j M (volume element 2^{4j}).
    """
    c = config.scale
    out = np.zeros(len(probes), dtype=complex)
    for i, (t, *x) in enumerate(probes):
        acc = 0.0 + 0.0j
        for q in range(len(src)):
            if h_vals[q] == 0.0:
                continue
            pair = (c * t, c * np.asarray(x), c * src[q, 0], c * src[q, 1:4])
            K = eval_kernel(optics, config, pair, check=check).value
            acc += K * h_vals[q] * dV[q] * c**4
        out[i] = acc / c
    return out


def check_rescaling(optics, config, test_h, probes, src=None, dV=None, degree=None, n_lam=None):
    """Verify U_j h(t/2^j, x/2^j) = 2^-j A h_j(t, x) at the given unrescaled probes.

    ``test_h`` maps an (n, 4) array of unrescaled (s, y) points to real values.
    Returns a RescalingReport with the maximum relative discrepancy.
    """
    if src is None:
        src, dV = source_grid((0.0, 0.0, 0.0), 0.3, 6, [0.2, 0.35, 0.5])
    h_vals = np.asarray(test_h(src), dtype=float)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    reach = np.max(np.linalg.norm(probes[:, None, 1:] - src[None, :, 1:4], axis=2))
    c = config.scale
    if degree is None:
        degree = sphere.sphere_degree(PSI_HI * c * 1.05 * (reach + np.max(np.linalg.norm(src[:, 1:4], axis=1))))
    if n_lam is None:
        n_lam = lambda_nodes(c * 1.2 * (reach + 1.0) + 1.0)
    lhs = apply_TTstar(optics, config, h_vals, src, dV, probes, degree, n_lam)
    rhs = apply_A(optics, config, h_vals, src, dV, probes)
    scale = max(float(np.max(np.abs(lhs))), 1e-300)
    err = float(np.max(np.abs(lhs - rhs)) / scale) if np.any(h_vals) else float(np.max(np.abs(lhs - rhs)))
    return RescalingReport(config.j, probes * c, lhs, rhs, err)
