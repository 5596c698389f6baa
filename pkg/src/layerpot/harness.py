"""Convergence-study driver: targets on grid points near the surface, h-sweeps, error norms."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

import numba
import numpy as np

from .errors import ConfigError, EmptySelection, NonConvergence
from .evaluators import (laplace_double_batch, laplace_single_batch, stokes_double_batch,
                         stokes_single_batch)
from .extrapolation import H0_DEFAULT, ExtrapolationPlan
from .quadrature import generate_rule, write_nodes_csv
from .reference import get_case
from .surface import CP_TOL, FrameBatch, closest_points

log = logging.getLogger(__name__)

CSV_HEADER = ["case", "h", "order", "rho_set", "delta_rule", "n_targets",
              "l2_err", "max_err", "l2_exact", "max_exact", "seconds"]
DUMP_HEADER = ["case", "h", "order", "rho_set", "delta_rule", "y1", "y2", "y3", "b", "err"]


@dataclass(frozen=True)
class TargetSelection:
    """``shell=None`` selects the band ``|b| <= h``; ``shell=m`` selects ``m h < |b| <= (m+1) h``."""

    shell: int | None = None
    octant: bool = False
    side: str = "both"

    def __post_init__(self):
        if self.shell is not None and self.shell < 1:
            raise ConfigError("shell index m must be >= 1")
        if self.side not in ("inside", "outside", "both"):
            raise ConfigError(f"side must be inside/outside/both, got {self.side!r}")

    def bounds(self, h):
        if self.shell is None:
            return None, h
        return self.shell * h, (self.shell + 1) * h


def select_targets(surface, h, selection=TargetSelection()):
    """Grid points ``(i h, j h, k h)`` satisfying the distance band/shell, side and octant filters.

    Returns a FrameBatch in lexicographic (i, j, k) order.
    """
    lo_b, hi_b = selection.bounds(h)
    lo, hi = surface.bounding_box
    pad = hi_b + 2 * h
    lo = lo - pad
    hi = hi + pad
    if selection.octant:
        lo = np.maximum(lo, 0.0)
    ranges = [np.arange(math.ceil(lo[d] / h), math.floor(hi[d] / h) + 1) for d in range(3)]
    jj, kk = np.meshgrid(ranges[1], ranges[2], indexing="ij")
    slab = np.stack([np.zeros(jj.size), jj.ravel() * h, kk.ravel() * h], axis=1)
    cand = []
    for i in ranges[0]:
        pts = slab.copy()
        pts[:, 0] = i * h
        phi = surface.level(pts)
        g = np.linalg.norm(surface.gradient(pts), axis=-1)
        est = np.abs(phi) / np.maximum(g, 1e-300)
        cand.append(pts[est <= 2.0 * hi_b + 2.0 * h])
    cand = np.concatenate(cand)
    if len(cand) == 0:
        raise EmptySelection("no grid points near the surface")
    frames, ok = closest_points(surface, cand, strict=False)
    if not np.all(ok):
        # a failure only matters for a candidate that might belong to the selection
        est = np.abs(surface.level(cand[~ok])) / np.linalg.norm(surface.gradient(cand[~ok]), axis=-1)
        if np.any(~(est > 1.5 * hi_b)):
            raise NonConvergence(f"closest point failed for {int(np.sum(~ok))} candidate target(s)")
        log.debug("dropped %d far candidates without a closest point", int(np.sum(~ok)))
    # ties at the band edges are decided with the closest-point tolerance
    slack = CP_TOL * surface.scale
    ab = np.abs(frames.b)
    keep = ok & (ab <= hi_b + slack)
    if lo_b is not None:
        keep &= ab > lo_b + slack
    if selection.side == "inside":
        keep &= frames.b < 0.0
    elif selection.side == "outside":
        keep &= frames.b > 0.0
    if selection.octant:
        keep &= np.all(frames.y >= 0.0, axis=1)
    if not np.any(keep):
        raise EmptySelection(f"selection {selection} is empty at h={h}")
    return frames.subset(keep)


def evaluate_case(case, frames: FrameBatch, rule, plan, regularize=True):
    """Computed values of a catalog case at the targets (shape (T,) or (T, 3))."""
    kw = dict(plan=plan, regularize=regularize)
    kind = case.kind
    if kind == "laplace_single":
        return laplace_single_batch(frames, rule, case.single_density, **kw).values
    if kind == "laplace_double":
        return laplace_double_batch(frames, rule, case.double_density, **kw).values
    if kind == "laplace_combined":
        s = laplace_single_batch(frames, rule, case.single_density, **kw).values
        return s + laplace_double_batch(frames, rule, case.double_density, **kw).values
    if kind == "stokes_single":
        return stokes_single_batch(frames, rule, case.single_density, **kw).values
    if kind == "stokes_double":
        return stokes_double_batch(frames, rule, case.double_density, **kw).values
    if kind == "stokes_combined":
        s = stokes_single_batch(frames, rule, case.single_density, **kw).values
        return s + stokes_double_batch(frames, rule, case.double_density, **kw).values
    raise ConfigError(f"unknown case kind {kind!r}")


def fitted_orders(hs, errs):
    """Pairwise orders ``log(e1/e2)/log(h1/h2)`` and the least-squares slope over all points."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    pair = [float(np.log(errs[i] / errs[i + 1]) / np.log(hs[i] / hs[i + 1]))
            for i in range(len(hs) - 1)]
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0]) if len(hs) > 1 else float("nan")
    return pair, slope


def parse_h(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        value = value.split(",")
    out = []
    for v in value:
        try:
            out.append(float(Fraction(str(v).strip())))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad grid spacing {v!r}") from None
    return out


@dataclass
class RunConfig:
    case: str = "sphere_single"
    h: list = field(default_factory=lambda: [1 / 32, 1 / 48, 1 / 64])
    rho: list | None = None
    order: int = 5
    q: float = 1.0
    h0: float = H0_DEFAULT
    far_cutoff: float = 4.0
    shell: int | None = None
    octant: bool | None = None
    side: str | None = None
    baseline: bool = False
    out: str = "results"
    threads: int = 1
    dump_targets: bool = False
    dump_nodes: bool = False
    order_band: list | None = None
    plot: bool = True

    def __post_init__(self):
        self.h = parse_h(self.h)
        if any(v <= 0 for v in self.h):
            raise ConfigError("grid spacings must be positive")
        if any(b >= a for a, b in zip(self.h, self.h[1:])):
            raise ConfigError("grid spacings must be strictly decreasing")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            get_case(self.case)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_mapping(data)

    def plan(self):
        case = get_case(self.case)
        rhos = self.rho if self.rho is not None else (
            case.default_rhos if self.order == 5 else (2.0, 3.0, 4.0, 5.0))
        try:
            return ExtrapolationPlan(rhos=tuple(rhos), order=self.order, q=self.q, h0=self.h0,
                                     far_cutoff=self.far_cutoff)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def selection(self):
        case = get_case(self.case)
        return TargetSelection(
            shell=self.shell,
            octant=case.default_octant if self.octant is None else self.octant,
            side=case.default_side if self.side is None else self.side)

    def default_band(self):
        if self.order_band is not None:
            return tuple(self.order_band)
        if self.order == 5 and self.q == 1.0:
            return (4.2, 5.8)
        if self.order == 5 and abs(self.q - 0.8) < 1e-12:
            return (3.3, 4.7)
        return None


@dataclass
class ErrorRow:
    case: str
    h: float
    order: int
    rho_set: str
    delta_rule: str
    n_targets: int
    l2_err: float
    max_err: float
    l2_exact: float
    max_exact: float
    seconds: float

    def csv_fields(self):
        return [self.case, repr(self.h), str(self.order), self.rho_set, self.delta_rule,
                str(self.n_targets), repr(self.l2_err), repr(self.max_err), repr(self.l2_exact),
                repr(self.max_exact), f"{self.seconds:.3f}"]


@dataclass
class ErrorReport:
    rows: list
    baseline_rows: list
    orders: list
    fitted_order: float
    baseline_orders: list = field(default_factory=list)
    baseline_fitted_order: float = float("nan")
    order_band: tuple | None = None
    csv_path: str | None = None

    @property
    def within_band(self):
        if self.order_band is None:
            return None
        lo, hi = self.order_band
        return lo <= self.fitted_order <= hi

    def summary(self):
        lines = []
        for r in self.rows + self.baseline_rows:
            lines.append(f"{r.case:22s} h=1/{1 / r.h:<6.4g} {r.delta_rule:28s} N={r.n_targets:<7d} "
                         f"L2={r.l2_err:.3e} max={r.max_err:.3e} |u|max={r.max_exact:.3g} "
                         f"|u|L2={r.l2_exact:.3g} t={r.seconds:.1f}s")
        lines.append("orders (pairwise): " + ", ".join(f"{o:.2f}" for o in self.orders)
                     + f"; fitted {self.fitted_order:.2f}")
        if self.baseline_rows:
            lines.append("baseline orders: " + ", ".join(f"{o:.2f}" for o in self.baseline_orders)
                         + f"; fitted {self.baseline_fitted_order:.2f}")
        if self.order_band is not None:
            verdict = "inside" if self.within_band else "OUTSIDE"
            lines.append(f"fitted order {verdict} band {self.order_band}")
        return "\n".join(lines)


def set_threads(n):
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _norms(err, exact, vector):
    if vector:
        err = np.linalg.norm(err, axis=-1)
        exact = np.linalg.norm(exact, axis=-1)
    else:
        err = np.abs(err)
        exact = np.abs(exact)
    return (float(np.sqrt(np.mean(err**2))), float(err.max()),
            float(np.sqrt(np.mean(exact**2))), float(exact.max()), err)


def run(config: RunConfig, write=True):
    """Run the h-sweep described by ``config``; writes CSV (and optional dumps) under ``config.out``."""
    set_threads(config.threads)
    case = get_case(config.case)
    plan = config.plan()
    selection = config.selection()
    surface = case.surface()
    rho_set = ";".join(f"{r:g}" for r in plan.rhos)
    rows, base_rows, dumps = [], [], []
    if write:
        os.makedirs(config.out, exist_ok=True)
    for h in config.h:
        t0 = time.perf_counter()
        rule = generate_rule(surface, h)
        if write and config.dump_nodes:
            write_nodes_csv(rule, os.path.join(config.out, f"{case.name}_nodes_h{1 / h:g}.csv"))
        frames = select_targets(surface, h, selection)
        exact = case.exact_value(frames.y, frames.chi)
        t_setup = time.perf_counter() - t0
        t1 = time.perf_counter()
        vals = evaluate_case(case, frames, rule, plan)
        l2e, mxe, l2x, mxx, err = _norms(vals - exact, exact, case.vector)
        rows.append(ErrorRow(case.name, h, plan.order, rho_set, plan.describe_rule(), len(frames),
                             l2e, mxe, l2x, mxx, t_setup + time.perf_counter() - t1))
        log.info("%s h=%g: L2 %.3e max %.3e (%d targets)", case.name, h, l2e, mxe, len(frames))
        if config.dump_targets:
            dumps.append((rows[-1], frames, err))
        if config.baseline:
            t2 = time.perf_counter()
            bvals = evaluate_case(case, frames, rule, plan, regularize=False)
            bl2, bmx, _, _, berr = _norms(bvals - exact, exact, case.vector)
            base_rows.append(ErrorRow(case.name, h, 0, "", "unregularized", len(frames),
                                      bl2, bmx, l2x, mxx, t_setup + time.perf_counter() - t2))
            if config.dump_targets:
                dumps.append((base_rows[-1], frames, berr))
    orders, fitted = fitted_orders(config.h, [r.l2_err for r in rows])
    report = ErrorReport(rows, base_rows, orders, fitted, order_band=config.default_band())
    if base_rows:
        report.baseline_orders, report.baseline_fitted_order = fitted_orders(
            config.h, [r.l2_err for r in base_rows])
    if write:
        path = os.path.join(config.out, f"{case.name}.csv")
        write_csv(report, path)
        report.csv_path = path
        if dumps:
            write_target_dump(dumps, os.path.join(config.out, f"{case.name}_targets.csv"))
        if config.plot:
            emit_plot_script(report, os.path.join(config.out, f"{case.name}_plot.py"))
    return report


def write_csv(report, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in report.rows + report.baseline_rows:
            wr.writerow(r.csv_fields())


def write_target_dump(dumps, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(DUMP_HEADER)
        for row, frames, err in dumps:
            for t in range(len(frames)):
                wr.writerow([row.case, repr(row.h), str(row.order), row.rho_set, row.delta_rule,
                             *map(repr, frames.y[t].tolist()), repr(float(frames.b[t])),
                             repr(float(err[t]))])


_PLOT_TEMPLATE = '''\
"""Log-log plot of the errors in {csv_name} against h, with reference slopes 4 and 5."""
import csv
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = defaultdict(lambda: ([], [], []))
with open(os.path.join(here, "{csv_name}")) as fh:
    for row in csv.DictReader(fh):
        key = row["delta_rule"] + " order " + row["order"]
        hs, l2, mx = series[key]
        hs.append(float(row["h"]))
        l2.append(float(row["l2_err"]))
        mx.append(float(row["max_err"]))

fig, ax = plt.subplots(figsize=(6, 4.5))
for key, (hs, l2, mx) in series.items():
    ax.loglog(hs, l2, "o-", label=key + " L2")
    ax.loglog(hs, mx, "s--", label=key + " max")
hs = sorted({{h for s in series.values() for h in s[0]}})
ref = max(min(s[1]) for s in series.values())
for slope in (4, 5):
    ax.loglog(hs, [ref * (h / hs[0]) ** slope for h in hs], "k:", lw=1)
    ax.annotate(f"slope {{slope}}", (hs[-1], ref * (hs[-1] / hs[0]) ** slope))
ax.set_xlabel("h")
ax.set_ylabel("error")
ax.set_title("{case}")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(here, "{png_name}"), dpi=150)
'''


def emit_plot_script(report, path):
    if not report.rows:
        raise ValueError("empty report")
    csv_name = os.path.basename(report.csv_path or f"{report.rows[0].case}.csv")
    png_name = os.path.splitext(os.path.basename(path))[0] + ".png"
    with open(path, "w") as fh:
        fh.write(_PLOT_TEMPLATE.format(csv_name=csv_name, png_name=png_name, case=report.rows[0].case))
    return path


def config_dict(config):
    return asdict(config)
