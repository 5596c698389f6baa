"""Layer-potential evaluation near and on the surface.

All evaluators share one pattern: for every target the regularised integral
is summed over the quadrature nodes for each smoothing length, then the
per-delta values are combined with the extrapolation weights.  Nodes farther
than ``CUT * max(delta)`` from a target see the singular kernel (the shape
functions equal 1 to double precision there), so they are accumulated once
and shared by all deltas.

Summation over nodes is sequential in rule order for each target; targets
are distributed over threads, so results do not depend on the thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .extrapolation import ExtrapolationPlan, ExtrapolationWeights, solve_weights_batch
from .kernels import s1_q, s1_sharp_q, s2_q, s2_sharp_q, s3_q
from .surface import FrameBatch, NearTargetFrame, closest_points

CUT = 7.0
FOUR_PI = 4.0 * math.pi
EIGHT_PI = 8.0 * math.pi

NEAR = "near-extrapolated"
ON_SURFACE = "on-surface-sharp"
FAR = "far-unregularized"


@njit(parallel=True, cache=True)
def _laplace_single_sums(Y, X, W, F, deltas, far, sharp, out):
    T = Y.shape[0]
    N = X.shape[0]
    K = deltas.shape[0]
    cut2 = (CUT * deltas.max()) ** 2
    for t in prange(T):
        y0, y1, y2 = Y[t, 0], Y[t, 1], Y[t, 2]
        ft = far[t]
        acc = 0.0
        near = np.zeros(K)
        for q in range(N):
            d0 = X[q, 0] - y0
            d1 = X[q, 1] - y1
            d2 = X[q, 2] - y2
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            wf = W[q] * F[q]
            if ft or r2 >= cut2:
                if r2 > 0.0:
                    acc += wf / math.sqrt(r2)
            else:
                r = math.sqrt(r2)
                for k in range(K):
                    dk = deltas[k]
                    if sharp:
                        near[k] += wf * s1_sharp_q(r / dk) / dk
                    else:
                        near[k] += wf * s1_q(r / dk) / dk
        for k in range(K):
            out[t, k] = -(acc + near[k]) / FOUR_PI


@njit(parallel=True, cache=True)
def _laplace_double_sums(Y, X, NX, W, G, G0, deltas, far, sharp, out):
    T = Y.shape[0]
    N = X.shape[0]
    K = deltas.shape[0]
    cut2 = (CUT * deltas.max()) ** 2
    for t in prange(T):
        y0, y1, y2 = Y[t, 0], Y[t, 1], Y[t, 2]
        g0 = G0[t]
        ft = far[t]
        acc = 0.0
        near = np.zeros(K)
        for q in range(N):
            d0 = X[q, 0] - y0
            d1 = X[q, 1] - y1
            d2 = X[q, 2] - y2
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            c = W[q] * (G[q] - g0) * (d0 * NX[q, 0] + d1 * NX[q, 1] + d2 * NX[q, 2])
            if ft or r2 >= cut2:
                if r2 > 0.0:
                    acc += c / (r2 * math.sqrt(r2))
            else:
                r = math.sqrt(r2)
                for k in range(K):
                    dk = deltas[k]
                    if sharp:
                        near[k] += c * s2_sharp_q(r / dk) / (dk * dk * dk)
                    else:
                        near[k] += c * s2_q(r / dk) / (dk * dk * dk)
        for k in range(K):
            out[t, k] = (acc + near[k]) / FOUR_PI


@njit(parallel=True, cache=True)
def _stokes_single_sums(Y, X, NX, W, F, FN0, deltas, far, out):
    T = Y.shape[0]
    N = X.shape[0]
    K = deltas.shape[0]
    cut2 = (CUT * deltas.max()) ** 2
    for t in prange(T):
        y0, y1, y2 = Y[t, 0], Y[t, 1], Y[t, 2]
        fn = FN0[t]
        ft = far[t]
        acc = np.zeros(3)
        near = np.zeros((K, 3))
        for q in range(N):
            d0 = y0 - X[q, 0]
            d1 = y1 - X[q, 1]
            d2 = y2 - X[q, 2]
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            w = W[q]
            f0 = F[q, 0] - fn * NX[q, 0]
            f1 = F[q, 1] - fn * NX[q, 1]
            f2 = F[q, 2] - fn * NX[q, 2]
            df = d0 * f0 + d1 * f1 + d2 * f2
            if ft or r2 >= cut2:
                if r2 > 0.0:
                    ir = 1.0 / math.sqrt(r2)
                    ir3 = ir * ir * ir * df
                    acc[0] += w * (f0 * ir + d0 * ir3)
                    acc[1] += w * (f1 * ir + d1 * ir3)
                    acc[2] += w * (f2 * ir + d2 * ir3)
            else:
                r = math.sqrt(r2)
                for k in range(K):
                    dk = deltas[k]
                    a1 = s1_q(r / dk) / dk
                    a3 = s2_q(r / dk) / (dk * dk * dk) * df
                    near[k, 0] += w * (f0 * a1 + d0 * a3)
                    near[k, 1] += w * (f1 * a1 + d1 * a3)
                    near[k, 2] += w * (f2 * a1 + d2 * a3)
        for k in range(K):
            for i in range(3):
                out[t, k, i] = (acc[i] + near[k, i]) / EIGHT_PI


@njit(parallel=True, cache=True)
def _stokes_double_sums(Y, X0, B, N0, X, NX, W, Q, Q0, deltas, far, out):
    T = Y.shape[0]
    N = X.shape[0]
    K = deltas.shape[0]
    cut2 = (CUT * deltas.max()) ** 2
    for t in prange(T):
        y0, y1, y2 = Y[t, 0], Y[t, 1], Y[t, 2]
        x00, x01, x02 = X0[t, 0], X0[t, 1], X0[t, 2]
        m0, m1, m2 = N0[t, 0], N0[t, 1], N0[t, 2]
        b = B[t]
        ft = far[t]
        acc = np.zeros(3)
        near = np.zeros((K, 3))
        for q in range(N):
            d0 = y0 - X[q, 0]
            d1 = y1 - X[q, 1]
            d2 = y2 - X[q, 2]
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            w = W[q]
            q0 = Q[q, 0] - Q0[t, 0]
            q1 = Q[q, 1] - Q0[t, 1]
            q2 = Q[q, 2] - Q0[t, 2]
            n0 = NX[q, 0]
            n1 = NX[q, 1]
            n2 = NX[q, 2]
            if ft or r2 >= cut2:
                if r2 > 0.0:
                    c = -6.0 * w * (d0 * q0 + d1 * q1 + d2 * q2) * (d0 * n0 + d1 * n1 + d2 * n2) / (
                        r2 * r2 * math.sqrt(r2))
                    acc[0] += c * d0
                    acc[1] += c * d1
                    acc[2] += c * d2
            else:
                h0 = X[q, 0] - x00
                h1 = X[q, 1] - x01
                h2 = X[q, 2] - x02
                A = m0 * q0 + m1 * q1 + m2 * q2
                Bq = h0 * q0 + h1 * q1 + h2 * q2
                C = m0 * n0 + m1 * n1 + m2 * n2
                E = h0 * n0 + h1 * n1 + h2 * n2
                u = b * A * C - Bq * C - A * E
                v = A * C
                c10 = m0 * u - h0 * v
                c11 = m1 * u - h1 * v
                c12 = m2 * u - h2 * v
                u2 = b * Bq * C + b * A * E - Bq * E
                v2 = b * Bq * E
                rb = h0 * h0 + h1 * h1 + h2 * h2 - 2.0 * b * (h0 * m0 + h1 * m1 + h2 * m2)
                e0 = h0 * u2 + m0 * v2 - rb * c10
                e1 = h1 * u2 + m1 * v2 - rb * c11
                e2 = h2 * u2 + m2 * v2 - rb * c12
                r = math.sqrt(r2)
                for k in range(K):
                    dk = deltas[k]
                    dk3 = dk * dk * dk
                    p2 = -6.0 * w * s2_q(r / dk) / dk3
                    p3 = -6.0 * w * s3_q(r / dk) / (dk3 * dk * dk)
                    near[k, 0] += c10 * p2 + e0 * p3
                    near[k, 1] += c11 * p2 + e1 * p3
                    near[k, 2] += c12 * p2 + e2 * p3
        for k in range(K):
            for i in range(3):
                out[t, k, i] = (acc[i] + near[k, i]) / EIGHT_PI


@dataclass
class PotentialResult:
    """Value at one target with the per-delta integrals and weights behind it."""

    value: object
    raw: np.ndarray
    weights: ExtrapolationWeights
    frame: NearTargetFrame
    path: str


@dataclass
class BatchResult:
    """Values at many targets; ``raw`` has shape (T, K[, 3]) and ``a`` (T, K)."""

    values: np.ndarray
    raw: np.ndarray
    a: np.ndarray
    lam: np.ndarray
    far: np.ndarray
    frames: FrameBatch
    paths: np.ndarray

    def __len__(self):
        return len(self.values)

    def __getitem__(self, t):
        w = ExtrapolationWeights(a=self.a[t], lam=self.lam[t], degenerate_far=bool(self.far[t]))
        return PotentialResult(self.values[t], self.raw[t], w, self.frames[t], str(self.paths[t]))


def _node_values(f, rule, vector):
    v = f(rule.x) if callable(f) else np.asarray(f, dtype=float)
    v = np.ascontiguousarray(np.broadcast_to(np.asarray(v, dtype=float),
                                             (len(rule), 3) if vector else (len(rule),)))
    return v


def _point_values(f, pts, vector):
    v = np.asarray(f(pts), dtype=float)
    return np.ascontiguousarray(np.broadcast_to(v, (len(pts), 3) if vector else (len(pts),)))


def _prepare(frames, rule, plan, regularize):
    if regularize:
        a, lam, far = solve_weights_batch(plan, frames.b, rule.h)
        deltas = plan.deltas(rule.h)
    else:
        n = len(frames)
        deltas = np.array([rule.h])
        a = np.ones((n, 1))
        lam = np.zeros((n, 1))
        far = np.ones(n, dtype=bool)
    paths = np.where(far, FAR, NEAR)
    return np.ascontiguousarray(deltas, dtype=float), a, lam, far, paths


def _combine(a, raw):
    if raw.ndim == 2:
        return np.einsum("tk,tk->t", a, raw)
    return np.einsum("tk,tki->ti", a, raw)


def _as_frames(surface, targets):
    if isinstance(targets, FrameBatch):
        return targets
    return closest_points(surface, targets)


def laplace_single_batch(targets, rule, f, plan=ExtrapolationPlan(), surface=None, regularize=True):
    """Single layer ``int G(x - y) f(x) dS`` at many targets.

    ``targets`` is either a FrameBatch or an (T, 3) array (then ``surface`` is
    needed to compute the frames).  ``regularize=False`` gives the plain
    unregularised sum.
    """
    frames = _as_frames(surface, targets)
    deltas, a, lam, far, paths = _prepare(frames, rule, plan, regularize)
    F = _node_values(f, rule, False)
    raw = np.empty((len(frames), len(deltas)))
    _laplace_single_sums(np.ascontiguousarray(frames.y), rule.x, rule.w, F, deltas, far, False, raw)
    raw[far, 1:] = raw[far, :1]
    return BatchResult(_combine(a, raw), raw, a, lam, far, frames, paths)


def laplace_double_batch(targets, rule, g, plan=ExtrapolationPlan(), surface=None, regularize=True):
    """Double layer in subtracted form, ``int dG/dn(x) [g(x) - g(x0)] dS + chi g(x0)``."""
    frames = _as_frames(surface, targets)
    deltas, a, lam, far, paths = _prepare(frames, rule, plan, regularize)
    G = _node_values(g, rule, False)
    G0 = _point_values(g, frames.x0, False)
    raw = np.empty((len(frames), len(deltas)))
    _laplace_double_sums(np.ascontiguousarray(frames.y), rule.x, rule.n, rule.w, G, G0, deltas, far,
                         False, raw)
    raw[far, 1:] = raw[far, :1]
    # the jump term is added after extrapolation so constants come out exact
    jump = frames.chi * G0
    values = _combine(a, raw) + jump
    raw += jump[:, None]
    return BatchResult(values, raw, a, lam, far, frames, paths)


def stokes_single_batch(targets, rule, f, plan=ExtrapolationPlan(), surface=None, regularize=True):
    """Stokeslet layer ``(1/8pi) int S(y, x) [f(x) - (f(x0).n0) n(x)] dS``."""
    frames = _as_frames(surface, targets)
    deltas, a, lam, far, paths = _prepare(frames, rule, plan, regularize)
    F = _node_values(f, rule, True)
    F0 = _point_values(f, frames.x0, True)
    FN0 = np.ascontiguousarray(np.sum(F0 * frames.n0, axis=-1))
    raw = np.empty((len(frames), len(deltas), 3))
    _stokes_single_sums(np.ascontiguousarray(frames.y), rule.x, rule.n, rule.w, F, FN0, deltas, far, raw)
    raw[far, 1:] = raw[far, :1]
    return BatchResult(_combine(a, raw), raw, a, lam, far, frames, paths)


def stokes_double_batch(targets, rule, q, plan=ExtrapolationPlan(), surface=None, regularize=True):
    """Stresslet layer ``(1/8pi) int T(y, x) [q(x) - q(x0)] n(x) dS + chi q(x0)`` with the split kernel."""
    frames = _as_frames(surface, targets)
    deltas, a, lam, far, paths = _prepare(frames, rule, plan, regularize)
    Q = _node_values(q, rule, True)
    Q0 = _point_values(q, frames.x0, True)
    raw = np.empty((len(frames), len(deltas), 3))
    _stokes_double_sums(np.ascontiguousarray(frames.y), np.ascontiguousarray(frames.x0),
                        np.ascontiguousarray(frames.b), np.ascontiguousarray(frames.n0),
                        rule.x, rule.n, rule.w, Q, Q0, deltas, far, raw)
    raw[far, 1:] = raw[far, :1]
    jump = frames.chi[:, None] * Q0
    values = _combine(a, raw) + jump
    raw += jump[:, None, :]
    return BatchResult(values, raw, a, lam, far, frames, paths)


def _single(batch_fn, y, surface, rule, density, plan):
    frames = closest_points(surface, np.asarray(y, dtype=float)[None, :])
    return batch_fn(frames, rule, density, plan)[0]


def laplace_single(y, surface, rule, f, plan=ExtrapolationPlan()):
    return _single(laplace_single_batch, y, surface, rule, f, plan)


def laplace_double(y, surface, rule, g, plan=ExtrapolationPlan()):
    return _single(laplace_double_batch, y, surface, rule, g, plan)


def stokes_single(y, surface, rule, f, plan=ExtrapolationPlan()):
    return _single(stokes_single_batch, y, surface, rule, f, plan)


def stokes_double(y, surface, rule, q, plan=ExtrapolationPlan()):
    return _single(stokes_double_batch, y, surface, rule, q, plan)


def _on_surface_points(surface, x0):
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    return closest_points(surface, x0)


def laplace_single_on(x0, surface, rule, f, delta=None):
    """Single layer at surface points with the fifth-order on-surface kernel (default delta = 3h)."""
    frames = _on_surface_points(surface, x0)
    delta = 3.0 * rule.h if delta is None else delta
    F = _node_values(f, rule, False)
    out = np.empty((len(frames), 1))
    _laplace_single_sums(np.ascontiguousarray(frames.x0), rule.x, rule.w, F, np.array([float(delta)]),
                         np.zeros(len(frames), dtype=bool), True, out)
    return out[:, 0] if np.ndim(x0) > 1 else float(out[0, 0])


def laplace_double_on(x0, surface, rule, g, delta=None):
    """Double layer at surface points, on-surface kernel and ``chi = 1/2``."""
    frames = _on_surface_points(surface, x0)
    delta = 3.0 * rule.h if delta is None else delta
    G = _node_values(g, rule, False)
    G0 = _point_values(g, frames.x0, False)
    out = np.empty((len(frames), 1))
    _laplace_double_sums(np.ascontiguousarray(frames.x0), rule.x, rule.n, rule.w, G, G0,
                         np.array([float(delta)]), np.zeros(len(frames), dtype=bool), True, out)
    val = out[:, 0] + 0.5 * G0
    return val if np.ndim(x0) > 1 else float(val[0])
