"""Closed-form test problems: densities and exact layer-potential values.

Exact values take the indicator ``chi`` (1 inside, 0 outside, 1/2 on the
surface) so that targets lying exactly on the surface get the average of the
two one-sided limits, which is what the subtracted double layer produces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRegion
from .surface import (CassiniOvalRevolved, Ellipsoid, MolecularSurface, ProlateSpheroid,
                      RotatedEllipsoid, UnitSphere)


# spherical harmonic test density on the unit sphere

def sphere_harmonic(x):
    x = np.asarray(x, dtype=float)
    return 1.75 * (x[..., 0] - 2.0 * x[..., 1]) * (7.5 * x[..., 2] ** 2 - 1.5)


def _radial(y):
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    return y, r


def _homogeneous_harmonic(y):
    y, r = _radial(y)
    return 1.75 * (y[..., 0] - 2.0 * y[..., 1]) * (7.5 * y[..., 2] ** 2 - 1.5 * r * r), r


def harmonic_inner(y):
    """``u-(y) = r^3 f(y/r)``, the cubic harmonic polynomial."""
    return _homogeneous_harmonic(y)[0]


def harmonic_outer(y):
    """``u+(y) = r^-4 f(y/r)``."""
    p, r = _homogeneous_harmonic(y)
    return p / r**7


# combined harmonic test: u- = (sin y1 + sin y2) exp(y3), u+ = 0

def combined_u(y):
    y = np.asarray(y, dtype=float)
    return (np.sin(y[..., 0]) + np.sin(y[..., 1])) * np.exp(y[..., 2])


def combined_grad(y):
    y = np.asarray(y, dtype=float)
    e = np.exp(y[..., 2])
    return np.stack([np.cos(y[..., 0]) * e, np.cos(y[..., 1]) * e,
                     (np.sin(y[..., 0]) + np.sin(y[..., 1])) * e], axis=-1)


# interior Stokeslet test

STOKESLET_POS = np.array([2.0, 0.0, 0.0])
STOKESLET_STRENGTH = np.array([4.0 * math.pi, 0.0, 0.0])


def stokeslet_velocity(y, y0=STOKESLET_POS, strength=STOKESLET_STRENGTH):
    yh = np.asarray(y, dtype=float) - y0
    r = np.linalg.norm(yh, axis=-1)[..., None]
    yb = np.sum(yh * strength, axis=-1)[..., None]
    return (strength / r + yh * yb / r**3) / (8.0 * math.pi)


def stokeslet_stress(y, y0=STOKESLET_POS, strength=STOKESLET_STRENGTH):
    """``sigma_ik = (-6 / 8pi) yh_i yh_j yh_k b_j / r^5`` as an (..., 3, 3) array."""
    yh = np.asarray(y, dtype=float) - y0
    r = np.linalg.norm(yh, axis=-1)[..., None, None]
    yb = np.sum(yh * strength, axis=-1)[..., None, None]
    return -6.0 / (8.0 * math.pi) * yb * yh[..., :, None] * yh[..., None, :] / r**5


def stress_traction(x, n, y0=STOKESLET_POS, strength=STOKESLET_STRENGTH):
    """Traction ``sigma . n`` of the interior Stokeslet at surface points."""
    return np.einsum("...ik,...k->...i", stokeslet_stress(x, y0, strength), np.asarray(n, dtype=float))


# translating prolate spheroid

SPHEROID_E = math.sqrt(0.75)
_LOG_E = math.log((1 + SPHEROID_E) / (1 - SPHEROID_E))
# total drag 16 pi e^3 / ((1 + e^2) L - 2 e) for unit speed and viscosity,
# spread over the surface as F / (4 pi a b c |grad(phi)/2|)
SPHEROID_DRAG = 16.0 * math.pi * SPHEROID_E**3 / ((1 + SPHEROID_E**2) * _LOG_E - 2 * SPHEROID_E)
SPHEROID_F0 = SPHEROID_DRAG / (2.0 * math.pi)


def spheroid_traction(x):
    x = np.asarray(x, dtype=float)
    f = np.zeros(x.shape)
    f[..., 0] = SPHEROID_F0 / np.sqrt(1.0 - 0.75 * x[..., 0] ** 2)
    return f


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(200)


def spheroid_exterior_velocity(y):
    """Velocity outside a prolate spheroid (semi-axes 1, .5, .5) translating with (1, 0, 0).

    Line distribution of Stokeslets and potential dipoles on the focal segment
    ``|x1| <= c``; this is an optional oracle, checked in the tests by the
    no-slip condition on the surface.
    """
    e = SPHEROID_E
    c = e  # a = 1
    alpha = e**2 / ((1 + e**2) * _LOG_E - 2 * e)
    beta = (1 - e**2) / (2 * e**2) * alpha
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xi = c * _GL_NODES
    wq = c * _GL_WEIGHTS
    d = y[:, None, :] - np.stack([xi, 0 * xi, 0 * xi], axis=-1)[None]
    R = np.linalg.norm(d, axis=-1)
    e1 = np.array([1.0, 0.0, 0.0])
    us = e1 / R[..., None] + d * (d[..., :1] / R[..., None] ** 3)
    ud = e1 / R[..., None] ** 3 - 3.0 * d * (d[..., :1] / R[..., None] ** 5)
    integrand = alpha * us + beta * (c * c - xi**2)[None, :, None] * ud
    return np.einsum("q,tqi->ti", wq, integrand)


@dataclass
class TestCase:
    """A closed-form test problem.

    ``kind`` says which evaluators to combine: ``laplace_single``,
    ``laplace_double``, ``laplace_combined``, ``stokes_single``,
    ``stokes_double`` or ``stokes_combined``.
    """

    __test__ = False

    name: str
    surface_factory: object
    kind: str
    single_density: object = None
    double_density: object = None
    inside: object = None
    outside: object = None
    valid_region: str = "both"
    default_rhos: tuple = (2.0, 3.0, 4.0)
    default_octant: bool = False
    default_side: str = "both"
    norms: dict = field(default_factory=dict)
    exact_optional: bool = False

    @property
    def vector(self):
        return self.kind.startswith("stokes")

    def surface(self):
        return self.surface_factory()

    def exact_value(self, y, chi=None):
        """Exact value at targets ``y``; ``chi`` defaults to the side given by the level set."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if chi is None:
            chi = np.where(self.surface().level(y) < 0.0, 1.0, 0.0)
        chi = np.broadcast_to(np.asarray(chi, dtype=float), (len(y),))
        if self.valid_region == "inside" and np.any(chi < 1.0):
            raise OutOfRegion(f"{self.name}: exact value only known inside")
        if self.valid_region == "outside" and np.any(chi > 0.0) and self.inside is None:
            raise OutOfRegion(f"{self.name}: exact value only known outside")
        if self.name.startswith("stokes") and np.any(np.linalg.norm(y - STOKESLET_POS, axis=-1) == 0):
            raise OutOfRegion("target at the Stokeslet location")
        vin = self.inside(y) if np.any(chi > 0.0) else 0.0
        vout = self.outside(y) if np.any(chi < 1.0) else 0.0
        c = chi[:, None] if self.vector else chi
        return c * vin + (1.0 - c) * vout

    def sanity_norms(self, octant=False):
        key = "octant" if octant else "all"
        return self.norms.get(key) or self.norms.get("all") or self.norms.get("octant")


def _zero_scalar(y):
    return np.zeros(len(np.atleast_2d(y)))


def _zero_vector(y):
    return np.zeros((len(np.atleast_2d(y)), 3))


def _combined_single_density(surface):
    # f = [du/dn] = -du-/dn
    def f(x):
        return -np.sum(combined_grad(x) * surface.normal(x), axis=-1)
    return f


def _combined_double_density(x):
    # g = -[u] = u-
    return combined_u(x)


def _rotation_q(x):
    x = np.asarray(x, dtype=float)
    return np.stack([np.zeros(x.shape[:-1]), -x[..., 2], x[..., 1]], axis=-1)


def _stokes_combined_single(surface):
    # with zero exterior flow, -[f] = f- = sigma- . n
    def f(x):
        return stress_traction(x, surface.normal(x))
    return f


def _combined_case(name, factory, norms, octant):
    return TestCase(
        name=name, surface_factory=factory, kind="laplace_combined",
        single_density=_combined_single_density(factory()), double_density=_combined_double_density,
        inside=combined_u, outside=_zero_scalar, default_octant=octant, norms=norms)


def _stokes_case(name, factory, norms, octant):
    return TestCase(
        name=name, surface_factory=factory, kind="stokes_combined",
        single_density=_stokes_combined_single(factory()), double_density=stokeslet_velocity,
        inside=stokeslet_velocity, outside=_zero_vector, default_rhos=(3.0, 4.0, 5.0),
        default_octant=octant, norms=norms)


def _build_catalog():
    cases = [
        TestCase(
            name="sphere_single", surface_factory=UnitSphere, kind="laplace_single",
            single_density=sphere_harmonic,
            inside=lambda y: -harmonic_inner(y) / 7.0, outside=lambda y: -harmonic_outer(y) / 7.0,
            norms={"all": (1.15, 0.50)}),
        TestCase(
            name="sphere_double", surface_factory=UnitSphere, kind="laplace_double",
            double_density=sphere_harmonic,
            inside=lambda y: 4.0 * harmonic_inner(y) / 7.0, outside=lambda y: -3.0 * harmonic_outer(y) / 7.0,
            norms={"all": (4.6, 1.8)}),
        _combined_case("combined_ellipsoid", RotatedEllipsoid,
                       {"all": (1.7, 0.5), "octant": (1.4, 0.76)}, False),
        _combined_case("combined_cassini", CassiniOvalRevolved, {"octant": (1.45, 0.78)}, True),
        _combined_case("combined_molecule", MolecularSurface, {"octant": (1.0, 0.57)}, True),
        TestCase(
            name="spheroid_translation", surface_factory=ProlateSpheroid, kind="stokes_single",
            single_density=spheroid_traction,
            inside=lambda y: np.tile([1.0, 0.0, 0.0], (len(np.atleast_2d(y)), 1)),
            outside=spheroid_exterior_velocity, default_rhos=(3.0, 4.0, 5.0),
            default_side="outside", norms={"all": (1.0, 1.0)}, exact_optional=True),
        TestCase(
            name="stresslet_sphere", surface_factory=UnitSphere, kind="stokes_double",
            double_density=_rotation_q, inside=_rotation_q, outside=_zero_vector,
            default_rhos=(3.0, 4.0, 5.0), norms={"all": (1.0, 0.57)}),
        TestCase(
            name="stresslet_spheroid", surface_factory=ProlateSpheroid, kind="stokes_double",
            double_density=_rotation_q, inside=_rotation_q, outside=_zero_vector,
            default_rhos=(3.0, 4.0, 5.0), norms={"all": (0.5, 0.3)}),
        _stokes_case("stokes_sphere", UnitSphere, {"all": (1.0, 0.35)}, False),
        _stokes_case("stokes_ellipsoid", lambda: Ellipsoid((1.0, 0.8, 0.6)), {"all": (1.0, 0.37)}, False),
        _stokes_case("stokes_molecule", MolecularSurface, {"octant": (0.9, 0.4)}, True),
    ]
    return {c.name: c for c in cases}


CATALOG = _build_catalog()


def get_case(name):
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(CATALOG)}") from None


def exact_value(case, y, chi=None):
    if isinstance(case, str):
        case = get_case(case)
    return case.exact_value(y, chi)


def sanity_norms(case, octant=False):
    if isinstance(case, str):
        case = get_case(case)
    return case.sanity_norms(octant)
