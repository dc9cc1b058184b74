"""Mixed space-time norms of parametrix fields and the dyadic exponent laws.

For an admissible pair (p, q), p, q >= 2, q < inf, 1/p + 1/q <= 1/2, the
frequency-localized parametrix obeys

    ||phi_j||_{L^p_{[0,1]} L^q} <~ 2^{j r} ||psi(2^-j lam) f||_{L^2},  r = 3/2 - 1/p - 3/q,

with one more power of 2^j per derivative.  Norms on each slice are
euclidean coordinate norms.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import AdmissibilityError
from .parametrix import DyadicWindow, FieldSample, FrequencyProfile, RadialFlat, eval_gradient, eval_hessian, eval_parametrix

_QUANTITIES = ("value", "gradient", "hessian")


def _as_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, int):
        return Fraction(v)
    # floats: recover the intended rational (8/3 -> Fraction(8, 3))
    return Fraction(v).limit_denominator(10**6)


def _inv(v):
    return Fraction(0) if v == math.inf else 1 / _as_fraction(v)


@dataclass(frozen=True)
class StrichartzPair:
    p: object  # Fraction or math.inf
    q: Fraction
    r: Fraction

    @property
    def p_float(self):
        return math.inf if self.p == math.inf else float(self.p)

    @property
    def q_float(self):
        return float(self.q)

    def to_dict(self):
        return {"p": "inf" if self.p == math.inf else str(self.p), "q": str(self.q), "r": str(self.r)}


def admissible(p, q):
    """Validate (p, q) exactly and return the pair with r = 3/2 - 1/p - 3/q.

    ``p`` may be ``math.inf`` (or "inf"); ``q`` must be finite.
    """
    if isinstance(p, str) and p.strip().lower() in ("inf", "infinity"):
        p = math.inf
    if isinstance(q, str) and q.strip().lower() in ("inf", "infinity"):
        q = math.inf
    if q == math.inf:
        raise AdmissibilityError("q = inf")
    pf = p if p == math.inf else _as_fraction(p)
    qf = _as_fraction(q)
    if pf != math.inf and pf < 2:
        raise AdmissibilityError("p < 2")
    if qf < 2:
        raise AdmissibilityError("q < 2")
    if _inv(pf) + 1 / qf > Fraction(1, 2):
        raise AdmissibilityError("1/p + 1/q > 1/2")
    r = Fraction(3, 2) - _inv(pf) - 3 / qf
    return StrichartzPair(pf, qf, r)


def _lq(mag, weights, q):
    """L^q over the last axis with quadrature ``weights``."""
    if q == math.inf:
        return np.max(mag, axis=-1) if mag.shape[-1] else np.zeros(mag.shape[:-1])
    q = float(q)
    return np.sum(weights * mag**q, axis=-1) ** (1.0 / q)


def _outer(slice_norms, t_weights, p):
    return float(_lq(np.asarray(slice_norms, dtype=float), np.asarray(t_weights, dtype=float), p))


def mixed_norm(sample: FieldSample, pair: StrichartzPair):
    """(sum_t w_t ||F(t, .)||_{L^q}^p)^{1/p} with Riemann sums in the sample's weights."""
    mag = sample.magnitude()
    slices = _lq(mag, np.asarray(sample.x_weights, dtype=float), pair.q)
    return _outer(slices, sample.t_weights, pair.p)


def spacetime_norm(sample: FieldSample, q):
    """L^q over the space-time grid as one integral."""
    mag = sample.magnitude().ravel()
    w = np.outer(sample.t_weights, sample.x_weights).ravel()
    return float(_lq(mag, w, q))


@dataclass
class NormReport:
    quantity: str
    pair: StrichartzPair
    per_j: list  # (j, norm, data_norm)
    slope: float
    target_r: float
    residual: float
    constant: float  # C fitted at the first level
    constant_ratios: list  # norm_j / (C 2^{j r} data_j) for later levels
    single_constant_ok: bool
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "quantity": self.quantity, "pair": self.pair.to_dict(),
            "per_j": [{"j": j, "norm": n, "data_norm": d} for j, n, d in self.per_j],
            "slope": self.slope, "target_r": self.target_r, "residual": self.residual,
            "constant": self.constant, "constant_ratios": list(self.constant_ratios),
            "single_constant_ok": self.single_constant_ok, "meta": dict(self.meta),
        }


def radial_flat_norms(j, pair, profile=None, box_radius=4.0, cells_per_scale=8, chunk=256):
    """Level-normalized mixed norms of phi_j, grad phi_j, Hess phi_j for flat radial data.

    Midpoint grids in t in [0, 1] and r in [0, R] with spacing 2^-j / cells_per_scale;
    the spatial weight of the shell at r is 4 pi r^2 dr.  Returns a dict with
    the three norms, the data norm and a truncation-tail estimate (share of
    the L^q integral outside r = R/2, largest over slices).
    """
    profile = profile or FrequencyProfile.radial_one()
    window = DyadicWindow(j)
    delta = 2.0**-j / cells_per_scale
    nt = int(round(1.0 / delta))
    nr = int(round(box_radius / delta))
    rf = RadialFlat(window, profile, span=1.0 + box_radius)
    r = (np.arange(nr) + 0.5) * delta
    xw = 4.0 * np.pi * r**2 * delta
    tw = np.full(nt, delta)
    outer_shell = r > 0.5 * box_radius
    slices = {k: np.empty(nt) for k in _QUANTITIES}
    tail = 0.0
    q = pair.q
    for start in range(0, nt, chunk):
        rows = np.arange(start, min(nt, start + chunk))
        phi, d1, d2 = rf.slab(delta, nt, nr, rows)
        mags = {
            "value": np.abs(phi),
            "gradient": np.abs(d1),
            "hessian": np.sqrt(np.abs(d2) ** 2 + 2.0 * np.abs(d1 / r) ** 2),
        }
        for k, mag in mags.items():
            slices[k][rows] = _lq(mag, xw, q)
        if q != math.inf:
            qf = float(q)
            full = np.sum(xw * mags["value"] ** qf, axis=1)
            part = np.sum(xw[outer_shell] * mags["value"][:, outer_shell] ** qf, axis=1)
            tail = max(tail, float(np.max(part / np.maximum(full, 1e-300))))
    data = profile.data_norm(window)
    out = {k: _outer(slices[k], tw, pair.p) / data for k in _QUANTITIES}
    out.update({"data_norm": data, "tail": tail, "delta": delta, "nt": nt, "nr": nr})
    return out


def grid_norms(optics, j, pair, profile, grid, **kw):
    """Level-normalized norms from full sphere x lam quadrature on an explicit grid."""
    window = DyadicWindow(j)
    data = profile.data_norm(window)
    out = {
        "value": mixed_norm(eval_parametrix(optics, window, profile, grid, **kw), pair) / data,
        "gradient": mixed_norm(eval_gradient(optics, window, profile, grid, **kw), pair) / data,
        "hessian": mixed_norm(eval_hessian(optics, window, profile, grid, **kw), pair) / data,
    }
    out["data_norm"] = data
    return out


_ORDER = {"value": 0, "gradient": 1, "hessian": 2}


def scaling_regression(js, pair, profile=None, optics=None, grid_for=None, quantities=_QUANTITIES,
                       slope_margin=0.1, constant_slack=1e-9, **kw):
    """Fit log2 of the level-normalized norm against j for each quantity.

    Without ``optics`` (or for a flat metric with an isotropic profile and no
    ``grid_for``) the radial reduction is used; otherwise ``grid_for(j)``
    supplies the (t, t_weights, x, x_weights) grid for full quadrature.

    The single-constant check fits C at the first level and requires
    norm_j <= C 2^{(j - j0)(r + order)} norm_{j0} at every later level.
    Returns ``{quantity: NormReport}``.
    """
    profile = profile or FrequencyProfile.radial_one()
    js = [int(j) for j in js]
    radial = grid_for is None
    if radial and optics is not None and not (getattr(optics.metric, "is_flat", False) and profile.is_isotropic):
        raise ValueError("the radial reduction needs a flat metric and an isotropic profile; pass grid_for")
    rows = {}
    tails = {}
    for j in js:
        if radial:
            rows[j] = radial_flat_norms(j, pair, profile, **kw)
            tails[j] = rows[j]["tail"]
        else:
            rows[j] = grid_norms(optics, j, pair, profile, grid_for(j))
    reports = {}
    for qty in quantities:
        target = float(pair.r) + _ORDER[qty]
        vals = np.array([rows[j][qty] for j in js])
        logs = np.log2(vals)
        A = np.vstack([js, np.ones(len(js))]).T
        coef, res, *_ = np.linalg.lstsq(A, logs, rcond=None)
        resid = float(np.sqrt(np.mean((A @ coef - logs) ** 2)))
        C = vals[0] / 2.0 ** (target * js[0])
        ratios = [float(v / (C * 2.0 ** (target * j))) for j, v in zip(js[1:], vals[1:])]
        ok = all(rr <= 1.0 + constant_slack for rr in ratios)
        reports[qty] = NormReport(
            qty, pair, [(j, float(rows[j][qty] * rows[j]["data_norm"]), float(rows[j]["data_norm"])) for j in js],
            float(coef[0]), target, resid, float(C), ratios, ok,
            {"normalized": [float(v) for v in vals], "slope_ok": bool(coef[0] <= target + slope_margin),
             "tails": {str(j): tails[j] for j in tails}},
        )
    return reports
