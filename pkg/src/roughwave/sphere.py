"""Geometry and quadrature on the unit sphere S^2.

Tangent frames use two charts.  The primary chart projects the reference
axis x onto T_omega S^2; it degenerates only at +-x, so directions inside the
caps |omega_x| > CAP_COS use the secondary chart built from the z axis.
"""

from functools import lru_cache

import numpy as np

CAP_COS = 0.9

_PRIMARY_AXIS = np.array([1.0, 0.0, 0.0])
_CAP_AXIS = np.array([0.0, 0.0, 1.0])


def normalize(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def chart_of(omega):
    """Chart id per direction: 0 = primary, 1 = polar caps about the x axis."""
    omega = np.asarray(omega, dtype=float)
    return (np.abs(omega[..., 0]) > CAP_COS).astype(np.int64)


def frame(omega, chart=None):
    """Orthonormal basis (e1, e2) of T_omega S^2, shape (..., 2, 3).

    ``e1`` is the normalized projection of the chart axis and
    ``e2 = omega x e1``, so (e1, e2, omega) is positively oriented.
    """
    omega = np.asarray(omega, dtype=float)
    if chart is None:
        chart = chart_of(omega)
    chart = np.broadcast_to(chart, omega.shape[:-1])
    axis = np.where(chart[..., None] == 0, _PRIMARY_AXIS, _CAP_AXIS)
    e1 = axis - np.sum(axis * omega, axis=-1, keepdims=True) * omega
    e1 = e1 / np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(omega, e1)
    return np.stack([e1, e2], axis=-2)


def tangent_to_ambient(omega, coeffs, chart=None):
    """Map frame coefficients (..., 2) to ambient tangent vectors (..., 3)."""
    e = frame(omega, chart)
    return np.einsum("...a,...ai->...i", coeffs, e)


def chord(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)


def angle_between(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.cross(a, b)
    return np.arctan2(np.linalg.norm(c, axis=-1), np.sum(a * b, axis=-1))


def from_axis_angles(axis, theta, phi):
    """Direction at polar angle theta, azimuth phi about ``axis``.

    The azimuth is measured in the tangent frame of ``axis``.
    """
    axis = normalize(axis)
    f = frame(axis)
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    return np.cos(theta) * axis + np.sin(theta) * (np.cos(phi) * f[0] + np.sin(phi) * f[1])


def axis_angles(axis, omega):
    """Inverse of :func:`from_axis_angles`: returns (theta, phi) with phi in [0, 2pi)."""
    axis = normalize(axis)
    f = frame(axis)
    omega = np.asarray(omega, dtype=float)
    z = omega @ axis
    x = omega @ f[0]
    y = omega @ f[1]
    theta = np.arctan2(np.hypot(x, y), z)
    phi = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    return theta, phi


def fibonacci_sphere(n):
    """Quasi-uniform deterministic point set of size n."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5.0**0.5) * i
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def random_directions(rng, n):
    return normalize(rng.standard_normal((n, 3)))


# icosahedral grids ----------------------------------------------------------


def _icosahedron():
    g = (1.0 + 5.0**0.5) / 2.0
    v = np.array(
        [
            [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
            [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
            [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return normalize(v), f


@lru_cache(maxsize=8)
def _icosphere(level):
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(level):
        cache = {}
        new_faces = []

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                verts.append(normalize(verts[a] + verts[b]))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces)
    return np.array(verts), np.array(faces)


def icosahedral_grid(level):
    """Vertices of the refined icosahedron: 12, 42, 162, 642, ... directions."""
    v, _ = _icosphere(level)
    return v.copy()


def icosahedral_neighbors(level):
    """Adjacency lists of the refined icosahedron vertices."""
    v, faces = _icosphere(level)
    nbrs = [set() for _ in range(len(v))]
    for a, b, c in faces:
        nbrs[a] |= {b, c}
        nbrs[b] |= {a, c}
        nbrs[c] |= {a, b}
    return [sorted(s) for s in nbrs]


# product quadrature -----------------------------------------------------------


class SphereRule:
    """Gauss-Legendre (cos theta) x trapezoid (phi) product rule.

    Exact for spherical harmonics of degree <= ``degree``.  The polar axis is
    ``pole``; aligning it with the dominant oscillation direction keeps the
    node count low but does not change exactness.
    """

    def __init__(self, degree, pole=(0.0, 0.0, 1.0)):
        self.degree = int(degree)
        n_theta = self.degree // 2 + 1
        n_phi = self.degree + 1
        z, wz = np.polynomial.legendre.leggauss(n_theta)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        pole = normalize(pole)
        f = frame(pole)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1.0 - zz**2)
        pts = (
            zz[..., None] * pole
            + rho[..., None] * (np.cos(pp)[..., None] * f[0] + np.sin(pp)[..., None] * f[1])
        )
        self.nodes = pts.reshape(-1, 3)
        self.weights = np.repeat(wz * (2.0 * np.pi / n_phi), n_phi)
        self.pole = pole

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        """Integrate samples at ``nodes`` (last axis indexes nodes)."""
        return np.asarray(values) @ self.weights

    def refined(self):
        return SphereRule(2 * self.degree + 1, self.pole)


def sphere_degree(bandwidth, margin=24):
    """Harmonic degree resolving exp(i f(omega)) with |grad_omega f| <= bandwidth."""
    bandwidth = float(max(bandwidth, 0.0))
    return int(np.ceil(bandwidth + 4.0 * bandwidth ** (1.0 / 3.0) + margin))
