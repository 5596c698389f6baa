"""Regularisation-error integrals and the multi-delta extrapolation weights.

For a target at signed distance ``b`` the regularised integral at smoothing
length ``delta_i = rho_i * s`` satisfies

    S_i = S + c1 rho_i I0(lam_i) + c2 rho_i^3 I2(lam_i) [+ c3 rho_i^5 I4(lam_i)],

with ``lam_i = b / delta_i``.  Solving the 3x3 (or 4x4) system for ``S`` gives
``S = sum a_i S_i``; the weights ``a_i`` are the first row of the inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PositivityViolated, RelationViolated, SingularSystem
from .kernels import erfc_accurate

SQRT_PI = math.sqrt(math.pi)
H0_DEFAULT = 1.0 / 64.0
COND_LIMIT = 1e12
RESIDUAL_LIMIT = 1e-12


def I0(lam):
    L = np.abs(np.asarray(lam, dtype=float))
    return np.exp(-L * L) / SQRT_PI - L * erfc_accurate(L)


def I2(lam):
    L = np.abs(np.asarray(lam, dtype=float))
    return (2.0 / 3.0) * ((0.5 - L * L) * np.exp(-L * L) / SQRT_PI + L**3 * erfc_accurate(L))


def I4(lam):
    # integration by parts of int_L^inf erfc(t) (t^2 - L^2)^2 dt
    L = np.abs(np.asarray(lam, dtype=float))
    L2 = L * L
    poly = (8.0 / 15.0) * L2 * L2 - (4.0 / 15.0) * L2 + 0.4
    return np.exp(-L2) / SQRT_PI * poly - (8.0 / 15.0) * L2 * L2 * L * erfc_accurate(L)


_I = (I0, I2, I4)


@dataclass(frozen=True)
class ExtrapolationPlan:
    """Smoothing multipliers, order and the rule tying delta to h.

    ``q = 1`` gives ``delta_i = rho_i h``; ``q < 1`` gives
    ``delta_i = rho_i h^q h0^(1-q)``, which agrees with ``rho_i h`` at ``h = h0``.
    """

    rhos: tuple = (2.0, 3.0, 4.0)
    order: int = 5
    q: float = 1.0
    h0: float = H0_DEFAULT
    far_cutoff: float = 4.0

    def __post_init__(self):
        rhos = tuple(float(r) for r in self.rhos)
        object.__setattr__(self, "rhos", rhos)
        if self.order not in (5, 7):
            raise ValueError(f"order must be 5 or 7, got {self.order}")
        if len(rhos) != (3 if self.order == 5 else 4):
            raise ValueError(f"order {self.order} needs {3 if self.order == 5 else 4} rho values")
        if rhos[0] <= 0 or any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise ValueError("rho values must be positive and strictly increasing")
        if not 0.0 < self.q <= 1.0:
            raise ValueError("q must lie in (0, 1]")

    @property
    def fractional(self):
        return self.q != 1.0

    def deltas(self, h):
        s = h if not self.fractional else h**self.q * self.h0 ** (1.0 - self.q)
        return np.array(self.rhos) * s

    def describe_rule(self):
        if not self.fractional:
            return "proportional"
        return f"fractional(q={self.q:.6g};h0={self.h0:.6g})"


@dataclass
class ExtrapolationWeights:
    a: np.ndarray
    lam: np.ndarray
    degenerate_far: bool = False
    cond: float = field(default=1.0, repr=False)


def system_matrix(rhos, lam):
    """Rows ``[1, rho I0(lam), rho^3 I2(lam) (, rho^5 I4(lam))]``; ``lam`` may be batched (..., m)."""
    rhos = np.asarray(rhos, dtype=float)
    lam = np.asarray(lam, dtype=float)
    m = len(rhos)
    cols = [np.ones_like(lam)]
    for k in range(1, m):
        cols.append(rhos ** (2 * k - 1) * _I[k - 1](lam))
    return np.stack(cols, axis=-1)


def _weights_from_matrix(M):
    """First row of M^-1 for a stack of matrices, after column equilibration.

    Scaling column j by c_j leaves the first row of the inverse unchanged
    because the first column is all ones, so the weights are computed from the
    better conditioned equilibrated matrix.
    """
    Me = _equilibrate(M)
    e1 = np.zeros(M.shape[:-1])
    e1[..., 0] = 1.0
    MeT = np.swapaxes(Me, -1, -2)
    try:
        a = np.linalg.solve(MeT, e1[..., None])[..., 0]
    except np.linalg.LinAlgError:
        # some matrix is exactly singular in floating point; NaN marks it for the fallback
        a = np.full(M.shape[:-1], np.nan)
        for k in np.ndindex(M.shape[:-2]):
            try:
                a[k] = np.linalg.solve(MeT[k], e1[k])
            except np.linalg.LinAlgError:
                pass
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(Me)
    return a, np.where(np.isfinite(cond), cond, np.inf)


def _equilibrate(M):
    scale = np.max(np.abs(M), axis=-2, keepdims=True)
    return M / np.where(scale > 0.0, scale, 1.0)


def _min_norm_weights(M):
    """Minimum-norm solution of ``M^T a = e1`` by truncated SVD, and its residual.

    Far from the surface the rows of the smallest deltas all tend to
    ``(1, 0, 0)``: the matrix is numerically rank deficient although the
    equations are consistent, and any solution extrapolates equally well.
    """
    Me = _equilibrate(M)
    e1 = np.zeros(M.shape[-1])
    e1[0] = 1.0
    a = np.linalg.lstsq(Me.T, e1, rcond=1e-13)[0]
    return a, float(np.max(np.abs(Me.T @ a - e1)))


def solve_weights_batch(plan: ExtrapolationPlan, b, h):
    """Extrapolation weights for an array of signed distances.

    Returns ``(a, lam, far)`` with ``a`` of shape (N, m).  Targets with
    ``|b| >= far_cutoff * max(delta)`` get ``(1, 0, ...)`` and ``far = True``.
    A badly conditioned system is accepted when its minimum-norm solution
    satisfies the equations to ``RESIDUAL_LIMIT``; otherwise SingularSystem.
    """
    b = np.atleast_1d(np.asarray(b, dtype=float))
    deltas = plan.deltas(h)
    lam = b[:, None] / deltas[None, :]
    far = np.abs(b) >= plan.far_cutoff * deltas.max()
    a = np.zeros((len(b), len(deltas)))
    a[:, 0] = 1.0
    near = np.flatnonzero(~far)
    if near.size:
        M = system_matrix(plan.rhos, lam[near])
        an, cond = _weights_from_matrix(M)
        for k in np.flatnonzero(~(cond <= COND_LIMIT) | ~np.all(np.isfinite(an), axis=1)):
            an[k], resid = _min_norm_weights(M[k])
            if not resid <= RESIDUAL_LIMIT:
                raise SingularSystem(
                    f"extrapolation system at b={b[near[k]]:.6g} has condition {cond[k]:.3g} "
                    f"(limit {COND_LIMIT:g}) and no solution within {RESIDUAL_LIMIT:g} (residual {resid:.3g})")
        a[near] = an
    return a, lam, far


def solve_weights(plan: ExtrapolationPlan, b, h):
    a, lam, far = solve_weights_batch(plan, [b], h)
    cond = 1.0
    if not far[0]:
        cond = float(_weights_from_matrix(system_matrix(plan.rhos, lam))[1][0])
    return ExtrapolationWeights(a=a[0], lam=lam[0], degenerate_far=bool(far[0]), cond=cond)


def extrapolate(values, weights):
    """``sum_i a_i values_i``; ``values`` has the delta index first."""
    a = weights.a if isinstance(weights, ExtrapolationWeights) else np.asarray(weights, dtype=float)
    values = np.asarray(values, dtype=float)
    return np.tensordot(a, values, axes=(0, 0))


def determinant(rhos, x):
    """3x3 determinant with rows ``[1, rho I0(x/rho), rho^3 I2(x/rho)]`` over an array of x."""
    rhos = np.asarray(rhos, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.linalg.det(system_matrix(rhos, x[:, None] / rhos[None, :]))


def determinant_at_zero(rhos):
    r1, r2, r3 = rhos
    return (r3 - r2) * (r2 - r1) * (r3 - r1) * (r1 + r2 + r3) / (3.0 * math.pi)


def determinant_positivity_check(rhos, x_grid):
    """Check D > 0 on ``x_grid`` and the closed form at x = 0; returns a small report dict."""
    D = determinant(rhos, x_grid)
    d0 = float(determinant(rhos, [0.0])[0])
    closed = determinant_at_zero(rhos)
    if np.any(D <= 0.0):
        k = int(np.argmin(D))
        raise PositivityViolated(f"D({x_grid[k]}) = {D[k]:.3g} for rho={tuple(rhos)}")
    if abs(d0 - closed) > 1e-12 * max(1.0, abs(closed)):
        raise PositivityViolated(f"D(0) = {d0!r} differs from closed form {closed!r}")
    return {"rhos": tuple(rhos), "min_D": float(D.min()), "D0": d0, "D0_closed": closed}


# Companion integrals, checked by quadrature.  The kernels are
# phi(r) = -erfc(r) - (2/sqrt(pi)) r exp(-r^2) for J_n and phi3 = 1 - s3 for K_n.

def _phi_double(t):
    return -math.erfc(t) - 2.0 / SQRT_PI * t * math.exp(-t * t)


def _phi3(t):
    return math.erfc(t) + 2.0 / SQRT_PI * (2.0 / 3.0 * t**3 + t) * math.exp(-t * t)


def _radial_quad(fn, lam):
    from scipy.integrate import quad

    val, _ = quad(fn, 0.0, np.inf, args=(lam,), epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def I_quad(n, lam):
    def f(s, lam):
        t = math.sqrt(s * s + lam * lam)
        return math.erfc(t) / t * s ** (n + 1) if t > 0 else 0.0
    return _radial_quad(f, lam)


def J_quad(n, lam):
    def f(s, lam):
        t = math.sqrt(s * s + lam * lam)
        return _phi_double(t) / t**3 * s ** (n + 3) if t > 0 else 0.0
    return _radial_quad(f, lam)


def K_quad(n, lam):
    def f(s, lam):
        t = math.sqrt(s * s + lam * lam)
        return _phi3(t) / t**5 * s ** (n + 5) if t > 0 else 0.0
    return _radial_quad(f, lam)


COMPANION_RELATIONS = (
    ("J0", J_quad, 0, -2.0),
    ("J2", J_quad, 2, -4.0),
    ("J4", J_quad, 4, -6.0),
    ("K0", K_quad, 0, 8.0 / 3.0),
    ("K2", K_quad, 2, 8.0),
)


def companion_relations_check(lams=None, tol=1e-8):
    """Integrate J_n, K_n numerically and check their stated multiples of I_n.

    Returns a list of ``(name, lam, ratio_error)`` rows; raises RelationViolated
    if any absolute mismatch exceeds ``tol``.
    """
    if lams is None:
        lams = np.arange(0.0, 3.0 + 1e-9, 0.25)
    rows = []
    for name, integral, n, factor in COMPANION_RELATIONS:
        In = _I[n // 2]
        for lam in lams:
            lhs = integral(n, float(lam))
            rhs = factor * float(In(lam))
            err = abs(lhs - rhs)
            rows.append((name, float(lam), err))
            if err > tol:
                raise RelationViolated(f"{name}({lam}) = {lhs!r}, expected {rhs!r}")
    return rows
