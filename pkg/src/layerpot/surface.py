"""Level-set surfaces, closest-point projection and the built-in test geometries.

Every surface is described by a scalar level function ``phi`` with ``phi < 0``
inside, ``phi > 0`` outside and ``phi = 0`` on the surface, together with its
analytic gradient.  All geometry evaluation is vectorised over arrays of
points with shape ``(..., 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence

SQ3 = np.sqrt(3.0)
SQ6 = np.sqrt(6.0)

# Tolerances are relative to the surface scale (bounding-box diagonal).
CP_TOL = 1e-12
CP_MAX_ITER = 100


class ImplicitSurface:
    """Closed surface given as the zero set of a level function.

    Subclasses implement ``level`` and ``gradient`` and set ``lower``/``upper``
    to an axis-aligned box that contains the surface.
    """

    name = "surface"
    lower: np.ndarray
    upper: np.ndarray

    def level(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    @property
    def bounding_box(self):
        return self.lower, self.upper

    @property
    def scale(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def normal(self, x):
        g = self.gradient(x)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def inside(self, x):
        return self.level(x) < 0.0

    def __repr__(self):
        return f"{type(self).__name__}()"


class UnitSphere(ImplicitSurface):
    name = "sphere"

    def __init__(self):
        self.lower = -np.ones(3)
        self.upper = np.ones(3)

    def level(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1) - 1.0

    def gradient(self, x):
        return 2.0 * np.asarray(x, dtype=float)


class Ellipsoid(ImplicitSurface):
    """Ellipsoid ``sum(z_i^2 / s_i^2) = 1`` in rotated coordinates ``z = M x``."""

    name = "ellipsoid"

    def __init__(self, semi_axes=(1.0, 0.8, 0.6), rotation=None):
        self.semi_axes = np.asarray(semi_axes, dtype=float)
        self.rotation = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        ext = np.sqrt((self.rotation**2 * self.semi_axes[:, None] ** 2).sum(axis=0))
        self.lower = -ext
        self.upper = ext

    def level(self, x):
        z = np.asarray(x, dtype=float) @ self.rotation.T
        return np.sum((z / self.semi_axes) ** 2, axis=-1) - 1.0

    def gradient(self, x):
        z = np.asarray(x, dtype=float) @ self.rotation.T
        return (2.0 * z / self.semi_axes**2) @ self.rotation

    def __repr__(self):
        return f"Ellipsoid(semi_axes={tuple(self.semi_axes)})"


ROTATION_M = np.array(
    [[np.sqrt(2.0), 0.0, -2.0],
     [np.sqrt(2.0), SQ3, 1.0],
     [np.sqrt(2.0), -SQ3, 1.0]]
) / SQ6


class RotatedEllipsoid(Ellipsoid):
    name = "rotated_ellipsoid"

    def __init__(self):
        super().__init__((1.0, 0.8, 0.6), ROTATION_M)


class ProlateSpheroid(Ellipsoid):
    """``x1^2 + 4 x2^2 + 4 x3^2 = 1``."""

    name = "spheroid"

    def __init__(self):
        super().__init__((1.0, 0.5, 0.5))


class CassiniOvalRevolved(ImplicitSurface):
    """Cassini oval revolved about the x3 axis."""

    name = "cassini"

    def __init__(self, a=0.65, b=0.7):
        self.a = a
        self.b = b
        self.lower = np.array([-1.0, -1.0, -0.42])
        self.upper = np.array([1.0, 1.0, 0.42])

    def level(self, x):
        x = np.asarray(x, dtype=float)
        a2 = self.a**2
        r2 = np.sum(x * x, axis=-1)
        p2 = x[..., 0] ** 2 + x[..., 1] ** 2
        return (r2 + a2) ** 2 - 4.0 * a2 * p2 - self.b**4

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        a2 = self.a**2
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        g = 4.0 * (r2 + a2) * x
        g[..., :2] -= 8.0 * a2 * x[..., :2]
        return g


MOLECULE_CENTERS = np.array(
    [[SQ3 / 3, 0.0, -SQ6 / 12],
     [-SQ3 / 6, 0.5, -SQ6 / 12],
     [-SQ3 / 6, -0.5, -SQ6 / 12],
     [0.0, 0.0, SQ6 / 4]]
)


class MolecularSurface(ImplicitSurface):
    """Four-atom molecule ``sum exp(-|x - x_k|^2 / r^2) = c``, stored as ``c - sum``."""

    name = "molecule"

    def __init__(self, r=0.5, c=0.6, centers=MOLECULE_CENTERS):
        self.r = r
        self.c = c
        self.centers = np.asarray(centers, dtype=float)
        self.lower = np.array([-0.7, -0.91, -0.62])
        self.upper = np.array([0.98, 0.91, 1.02])

    def _terms(self, x):
        d = np.asarray(x, dtype=float)[..., None, :] - self.centers
        return d, np.exp(-np.sum(d * d, axis=-1) / self.r**2)

    def level(self, x):
        _, e = self._terms(x)
        return self.c - e.sum(axis=-1)

    def gradient(self, x):
        d, e = self._terms(x)
        return (2.0 / self.r**2) * np.sum(d * e[..., None], axis=-2)


SURFACES = {
    "sphere": UnitSphere,
    "rotated_ellipsoid": RotatedEllipsoid,
    "ellipsoid": Ellipsoid,
    "spheroid": ProlateSpheroid,
    "cassini": CassiniOvalRevolved,
    "molecule": MolecularSurface,
}


@dataclass(frozen=True)
class NearTargetFrame:
    """Target ``y`` written as ``x0 + b n0`` with ``x0`` the closest surface point."""

    y: np.ndarray
    x0: np.ndarray
    b: float
    n0: np.ndarray
    chi: float


@dataclass
class FrameBatch:
    """Struct-of-arrays version of :class:`NearTargetFrame` for many targets."""

    y: np.ndarray
    x0: np.ndarray
    b: np.ndarray
    n0: np.ndarray
    chi: np.ndarray

    def __len__(self):
        return len(self.b)

    def __getitem__(self, i):
        return NearTargetFrame(self.y[i], self.x0[i], float(self.b[i]), self.n0[i], float(self.chi[i]))

    def subset(self, mask):
        return FrameBatch(self.y[mask], self.x0[mask], self.b[mask], self.n0[mask], self.chi[mask])


def closest_points(surface, y, max_iter=CP_MAX_ITER, tol=CP_TOL, strict=True):
    """Closest surface points for an array of targets.

    Runs first-order projection onto ``phi = 0`` and then Gauss-Newton steps
    for ``min |y - x|^2`` subject to the linearised constraint.  Each step moves
    ``x`` to the foot of ``y`` on the tangent plane at ``x``; the fixed point
    has ``phi(x) = 0`` and ``y - x`` parallel to the normal.

    Raises NonConvergence if any target fails (vanishing gradient or no
    convergence in ``max_iter`` steps).  With ``strict=False`` failures are
    reported instead: the result is ``(frames, ok)`` with NaN rows where
    ``ok`` is False.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    scale = surface.scale
    eps = tol * scale
    x = y.copy()
    failed = np.zeros(len(y), dtype=bool)
    active = np.ones(len(y), dtype=bool)

    def drop_bad(idx, g2, stage):
        bad = ~(g2 > 0.0) | ~np.isfinite(g2)
        if np.any(bad):
            if strict:
                raise NonConvergence(f"vanishing gradient ({stage}) at target(s) {idx[bad][:5].tolist()}")
            failed[idx[bad]] = True
            active[idx[bad]] = False
        return ~bad

    # coarse projection, stops once the first-order distance estimate is small
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        phi = surface.level(xa)
        g = surface.gradient(xa)
        g2 = np.sum(g * g, axis=-1)
        good = drop_bad(idx, g2, "projection")
        idx, xa, phi, g, g2 = idx[good], xa[good], phi[good], g[good], g2[good]
        x[idx] = xa - (phi / g2)[:, None] * g
        active[idx] = np.abs(phi) / np.sqrt(g2) > 1e-3 * scale

    active = ~failed
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        phi = surface.level(xa)
        g = surface.gradient(xa)
        g2 = np.sum(g * g, axis=-1)
        good = drop_bad(idx, g2, "refinement")
        idx, xa, phi, g, g2 = idx[good], xa[good], phi[good], g[good], g2[good]
        d = y[idx] - xa
        gd = np.sum(g * d, axis=-1)
        tang = d - (gd / g2)[:, None] * g
        done = (np.abs(phi) <= eps) & (np.abs(phi) <= eps * np.sqrt(g2)) & (
            np.linalg.norm(tang, axis=-1) <= eps)
        # the step is also taken on convergence; it only polishes the last digits
        x[idx] = xa + tang - (phi / g2)[:, None] * g
        active[idx[done]] = False
    if np.any(active):
        bad = np.flatnonzero(active)
        if strict:
            raise NonConvergence(
                f"closest point did not converge for {bad.size} target(s), e.g. y={y[bad[0]].tolist()}")
        failed[bad] = True
    x[failed] = np.nan

    with np.errstate(invalid="ignore"):
        n0 = surface.normal(x)
    b = np.sum((y - x) * n0, axis=-1)
    chi = np.where(b < -eps, 1.0, np.where(b > eps, 0.0, 0.5))
    b = np.where(chi == 0.5, 0.0, b)
    frames = FrameBatch(y, x, b, n0, chi)
    return frames if strict else (frames, ~failed)


def closest_point(surface, y, max_iter=CP_MAX_ITER):
    return closest_points(surface, np.asarray(y, dtype=float)[None, :], max_iter=max_iter)[0]


def signed_distance(surface, y):
    return closest_point(surface, y).b


def outward_normal(surface, x):
    """Unit outward normal ``grad phi / |grad phi|`` at points on the surface."""
    return surface.normal(np.asarray(x, dtype=float))
