"""Shape functions and erf-regularised Laplace / Stokes kernels.

Each shape function has the form ``erf(r) + (2/sqrt(pi)) P(r) exp(-r^2)``
with an odd polynomial ``P`` chosen so that it vanishes to some order at
``r = 0``.  Kernels need the quotients ``s(r)/r^p``, which are evaluated from
a power series for small ``r`` (the direct formula loses all digits to
cancellation there) and from the closed form otherwise.

The scalar ``*_q`` functions are numba-compiled and are what the summation
loops in :mod:`layerpot.evaluators` call; the public functions are thin
vectorised wrappers.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from numba import njit, vectorize

from .surface import NearTargetFrame

SQRT_PI = math.sqrt(math.pi)
TWO_OVER_SQRT_PI = 2.0 / SQRT_PI
SERIES_SWITCH = 0.5
N_SERIES = 14


def _series(poly, power):
    """Coefficients c_i with s(r)/r^power = (2/sqrt(pi)) sum_i c_i r^(2i).

    ``poly`` lists the odd-degree coefficients of P: P(r) = sum_m poly[m] r^(2m+1).
    """
    n = N_SERIES + power
    c = []
    for k in range(n):
        ck = Fraction((-1) ** k, math.factorial(k) * (2 * k + 1))
        for m, pm in enumerate(poly):
            j = k - m
            if j >= 0:
                ck += Fraction(pm) * Fraction((-1) ** j, math.factorial(j))
        c.append(ck)
    k0 = (power - 1) // 2
    assert all(ck == 0 for ck in c[:k0]), "shape function does not vanish to the stated order"
    return np.array([float(ck) for ck in c[k0:k0 + N_SERIES]])


_C_S1 = _series([], 1)
_C_S2 = _series([-1], 3)
_C_S3 = _series([-1, Fraction(-2, 3)], 5)
_C_S1_SHARP = _series([Fraction(5, 3), Fraction(-2, 3)], 1)
_C_S2_SHARP = _series([-1, Fraction(2, 3)], 3)


@njit(cache=True)
def _horner(c, x2):
    acc = 0.0
    for i in range(len(c) - 1, -1, -1):
        acc = acc * x2 + c[i]
    return TWO_OVER_SQRT_PI * acc


@njit(cache=True)
def s1_q(r):
    """s1(r) / r."""
    if r < SERIES_SWITCH:
        return _horner(_C_S1, r * r)
    return math.erf(r) / r


@njit(cache=True)
def s2_q(r):
    """s2(r) / r^3."""
    if r < SERIES_SWITCH:
        return _horner(_C_S2, r * r)
    return (math.erf(r) - TWO_OVER_SQRT_PI * r * math.exp(-r * r)) / (r * r * r)


@njit(cache=True)
def s3_q(r):
    """s3(r) / r^5."""
    if r < SERIES_SWITCH:
        return _horner(_C_S3, r * r)
    r2 = r * r
    return (math.erf(r) - TWO_OVER_SQRT_PI * (2.0 / 3.0 * r2 * r + r) * math.exp(-r2)) / (r2 * r2 * r)


@njit(cache=True)
def s1_sharp_q(r):
    """s1#(r) / r."""
    if r < SERIES_SWITCH:
        return _horner(_C_S1_SHARP, r * r)
    return (math.erf(r) + TWO_OVER_SQRT_PI / 3.0 * (5.0 * r - 2.0 * r * r * r) * math.exp(-r * r)) / r


@njit(cache=True)
def s2_sharp_q(r):
    """s2#(r) / r^3."""
    if r < SERIES_SWITCH:
        return _horner(_C_S2_SHARP, r * r)
    r2 = r * r
    return (math.erf(r) - TWO_OVER_SQRT_PI * (r - 2.0 * r2 * r / 3.0) * math.exp(-r2)) / (r2 * r)


@vectorize(["float64(float64)"], cache=True)
def erfc_accurate(x):
    """Complementary error function (libm ``erfc``, accurate to a few ulp)."""
    return math.erfc(x)


# Plain shape functions, vectorised over r >= 0.

_erf = np.vectorize(math.erf, otypes=[float])


def s1(r):
    val = _erf(np.asarray(r, dtype=float))
    return val if val.ndim else float(val)


def _shape(q, power):
    fq = np.vectorize(q, otypes=[float])

    def s(r):
        r = np.asarray(r, dtype=float)
        val = fq(r) * r**power
        return val if val.ndim else float(val)
    return s


s2 = _shape(s2_q, 3)
s3 = _shape(s3_q, 5)
s1_sharp = _shape(s1_sharp_q, 1)
s2_sharp = _shape(s2_sharp_q, 3)


def laplace_single_kernel(r, delta):
    """Regularised ``G_delta(r) = -s1(|r|/delta) / (4 pi |r|)``; vectors along the last axis."""
    rn = np.linalg.norm(np.asarray(r, dtype=float), axis=-1)
    val = -np.vectorize(s1_q, otypes=[float])(rn / delta) / (4.0 * math.pi * delta)
    return val if np.ndim(val) else float(val)


def laplace_double_kernel(r, n_x, delta):
    """``(r . n_x) s2(|r|/delta) / (4 pi |r|^3)`` with ``r = x - y``."""
    r = np.asarray(r, dtype=float)
    rn = np.linalg.norm(r, axis=-1)
    q = np.vectorize(s2_q, otypes=[float])(rn / delta) / delta**3
    val = np.sum(r * np.asarray(n_x, dtype=float), axis=-1) * q / (4.0 * math.pi)
    return val if np.ndim(val) else float(val)


def stokeslet_kernel_reg(y, x, delta):
    """Regularised Stokeslet ``S^delta_ij(y, x)`` (3x3)."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = float(np.linalg.norm(d))
    rho = r / delta
    return s1_q(rho) / delta * np.eye(3) + np.outer(d, d) * s2_q(rho) / delta**3


def stokeslet_kernel(y, x):
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = float(np.linalg.norm(d))
    return np.eye(3) / r + np.outer(d, d) / r**3


def stresslet_kernel(y, x):
    """Singular stresslet ``T_ijk = -6 d_i d_j d_k / r^5`` with ``d = y - x``."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = float(np.linalg.norm(d))
    return -6.0 * np.einsum("i,j,k->ijk", d, d, d) / r**5


def stresslet_split_parts(x, frame: NearTargetFrame):
    """The two numerator tensors ``t1``, ``t2`` and ``r^2 - b^2`` of the split stresslet."""
    b = frame.b
    n = np.asarray(frame.n0, dtype=float)
    xh = np.asarray(x, dtype=float) - np.asarray(frame.x0, dtype=float)
    nnn = np.einsum("i,j,k->ijk", n, n, n)
    xnn = np.einsum("i,j,k->ijk", xh, n, n)
    nxn = np.einsum("i,j,k->ijk", n, xh, n)
    nnx = np.einsum("i,j,k->ijk", n, n, xh)
    xxn = np.einsum("i,j,k->ijk", xh, xh, n)
    xnx = np.einsum("i,j,k->ijk", xh, n, xh)
    nxx = np.einsum("i,j,k->ijk", n, xh, xh)
    xxx = np.einsum("i,j,k->ijk", xh, xh, xh)
    t1 = b * nnn - (xnn + nxn + nnx)
    t2 = b * (xxn + xnx + nxx) - xxx
    rb = float(xh @ xh - 2.0 * b * (xh @ n))
    return t1, t2, rb


def stresslet_kernel_split_reg(y, x, n_x, frame: NearTargetFrame, delta):
    """Split regularised stresslet ``T1 s2(r/delta) + T2 s3(r/delta)`` (3x3x3).

    ``n_x`` is accepted for interface symmetry with the double-layer integrand;
    the kernel itself only needs the target frame.
    """
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = float(np.linalg.norm(d))
    rho = r / delta
    t1, t2, rb = stresslet_split_parts(x, frame)
    return -6.0 * (t1 * s2_q(rho) / delta**3 + (t2 - rb * t1) * s3_q(rho) / delta**5)


def stresslet_split_unregularized(y, x, frame: NearTargetFrame):
    """``T1 + T2`` with no regularisation; equals the singular stresslet."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = float(np.linalg.norm(d))
    t1, t2, rb = stresslet_split_parts(x, frame)
    return -6.0 * (t1 / r**3 + (t2 - rb * t1) / r**5)
