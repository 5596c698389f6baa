"""Grid-projection surface quadrature with a partition of unity on the normal.

Nodes are the intersections of the surface with the lines of a cubic grid of
spacing ``h``.  A node found on a line parallel to axis ``d`` is kept if
``|n_d| >= cos(theta)`` and gets the weight ``psi_d(n) h^2 / |n_d|``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AllComponentsBelowCutoff, RootRefinementFailure

THETA_DEFAULT = np.deg2rad(70.0)
BUMP_A_DEFAULT = 2.0


def bump(r, a=BUMP_A_DEFAULT):
    """``exp(a r^2 / (r^2 - 1))`` for ``|r| < 1``, zero otherwise."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    out[inside] = np.exp(a * r2[inside] / (r2[inside] - 1.0))
    return out if out.ndim else float(out)


def partition_weights(n, theta=THETA_DEFAULT, a=BUMP_A_DEFAULT):
    """Partition of unity ``(psi_1, psi_2, psi_3)`` evaluated at unit normals ``n``."""
    n = np.asarray(n, dtype=float)
    c = np.clip(np.abs(n), 0.0, 1.0)
    beta = bump(np.arccos(c) / theta, a)
    beta = np.where(c >= np.cos(theta), beta, 0.0)
    total = beta.sum(axis=-1, keepdims=True)
    if np.any(total <= 0.0):
        raise AllComponentsBelowCutoff("no normal component reaches cos(theta)")
    return beta / total


@dataclass(frozen=True)
class QuadratureRule:
    """Surface nodes, normals and weights; arrays are in deterministic order."""

    x: np.ndarray       # (N, 3)
    n: np.ndarray       # (N, 3)
    w: np.ndarray       # (N,)
    axis: np.ndarray    # (N,) distinguished direction 0, 1, 2
    index: np.ndarray   # (N, 2) grid indices of the two other coordinates
    h: float
    theta: float = THETA_DEFAULT
    bump_a: float = BUMP_A_DEFAULT

    def __len__(self):
        return len(self.w)


def _line_roots(surface, d, h, n_sub=4):
    """Roots of phi along all grid lines parallel to axis d, inside the inflated box."""
    lo, hi = surface.bounding_box
    lo = lo - 2 * h
    hi = hi + 2 * h
    o1, o2 = [k for k in range(3) if k != d]
    i_range = np.arange(np.ceil(lo[o1] / h), np.floor(hi[o1] / h) + 1).astype(int)
    j_range = np.arange(np.ceil(lo[o2] / h), np.floor(hi[o2] / h) + 1).astype(int)
    ii, jj = np.meshgrid(i_range, j_range, indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    ds = h / n_sub
    t = lo[d] + ds * np.arange(int(np.ceil((hi[d] - lo[d]) / ds)) + 1)

    roots_idx, roots_a, roots_b = [], [], []
    chunk = max(1, 2_000_000 // len(t))
    for start in range(0, len(ii), chunk):
        ci = ii[start:start + chunk]
        cj = jj[start:start + chunk]
        pts = np.empty((len(ci), len(t), 3))
        pts[..., o1] = (ci * h)[:, None]
        pts[..., o2] = (cj * h)[:, None]
        pts[..., d] = t[None, :]
        phi = surface.level(pts)
        sgn = phi > 0
        line, k = np.nonzero(sgn[:, 1:] != sgn[:, :-1])
        roots_idx.append(start + line)
        roots_a.append(t[k])
        roots_b.append(t[k + 1])
    line = np.concatenate(roots_idx)
    return ii[line], jj[line], np.concatenate(roots_a), np.concatenate(roots_b)


def _refine(surface, d, o1, o2, ci, cj, ta, tb, h, tol):
    def pts(tv):
        p = np.empty((len(tv), 3))
        p[:, o1] = ci * h
        p[:, o2] = cj * h
        p[:, d] = tv
        return p

    fa = surface.level(pts(ta))
    a, b = ta.copy(), tb.copy()
    for _ in range(10):
        m = 0.5 * (a + b)
        fm = surface.level(pts(m))
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, m)
    t = 0.5 * (a + b)
    lo_b, hi_b = ta, tb
    for _ in range(30):
        p = pts(t)
        f = surface.level(p)
        if np.all(np.abs(f) <= tol):
            break
        df = surface.gradient(p)[:, d]
        t = t - np.where(np.abs(f) <= tol, 0.0, f / df)
    p = pts(t)
    f = surface.level(p)
    bad = (np.abs(f) > tol) | (t < lo_b - 1e-12) | (t > hi_b + 1e-12) | ~np.isfinite(t)
    if np.any(bad):
        k = np.flatnonzero(bad)[0]
        raise RootRefinementFailure(
            f"root on axis {d} line ({ci[k]}, {cj[k]}) did not converge (|phi|={abs(f[k]):.3g})")
    return p


def generate_rule(surface, h, theta=THETA_DEFAULT, a=BUMP_A_DEFAULT, membership=None):
    """Build the quadrature rule for ``surface`` on the grid of spacing ``h``.

    ``membership`` overrides the angle used to admit nodes into a direction's
    set (default ``theta``); a wider angle only adds nodes of zero weight.
    """
    tol = 1e-12 * surface.scale
    cos_t = np.cos(theta if membership is None else membership)
    xs, ns, ws, axes, idx = [], [], [], [], []
    for d in range(3):
        o1, o2 = [k for k in range(3) if k != d]
        ci, cj, ta, tb = _line_roots(surface, d, h)
        if len(ci) == 0:
            continue
        p = _refine(surface, d, o1, o2, ci, cj, ta, tb, h, tol)
        n = surface.normal(p)
        keep = np.abs(n[:, d]) >= cos_t
        ci, cj, p, n = ci[keep], cj[keep], p[keep], n[keep]
        order = np.lexsort((p[:, d], cj, ci))
        ci, cj, p, n = ci[order], cj[order], p[order], n[order]
        # merge duplicates on one line
        if len(p) > 1:
            same = (ci[1:] == ci[:-1]) & (cj[1:] == cj[:-1]) & (
                np.abs(p[1:, d] - p[:-1, d]) < 1e-8 * h)
            keep = np.concatenate([[True], ~same])
            ci, cj, p, n = ci[keep], cj[keep], p[keep], n[keep]
        psi = partition_weights(n, theta, a)[:, d]
        xs.append(p)
        ns.append(n)
        nd = np.abs(n[:, d])
        ws.append(np.where(psi > 0.0, psi * h * h / np.maximum(nd, 1e-300), 0.0))
        axes.append(np.full(len(p), d))
        idx.append(np.stack([ci, cj], axis=1))
    return QuadratureRule(
        x=np.concatenate(xs), n=np.concatenate(ns), w=np.concatenate(ws),
        axis=np.concatenate(axes), index=np.concatenate(idx), h=float(h),
        theta=float(theta), bump_a=float(a))


def integrate(rule, f):
    """Weighted node sum of ``f``: a callable on node positions or an array of node values."""
    vals = f(rule.x) if callable(f) else np.asarray(f)
    if vals.ndim == 1:
        return float(np.dot(rule.w, vals))
    return rule.w @ vals


def write_nodes_csv(rule, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["axis", "i", "j", "x1", "x2", "x3", "n1", "n2", "n3", "w"])
        for k in range(len(rule)):
            wr.writerow([int(rule.axis[k]) + 1, int(rule.index[k, 0]), int(rule.index[k, 1]),
                         *map(repr, rule.x[k].tolist()), *map(repr, rule.n[k].tolist()),
                         repr(float(rule.w[k]))])
