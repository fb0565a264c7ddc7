"""Error metrics between loss curves, convergence diagnostics, and the
orchestration of mesh-refinement studies.

The error of record is the sup distance between step-extrapolated curves,
which for step functions is an exact max over the union of their grids.
Rates come from ordinary least squares on (log n, log error), with a
finite-reference variant that removes the slope inflation caused by
measuring against a nested reference mesh instead of the true limit.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .curves import LossCurve, refinement_factor
from .errors import DegenerateInput, MeshMismatch, ValidationError
from .grid import run_grid_scheme
from .particle import run_particle_scheme

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# sup-norm error


def sup_error(curve: LossCurve, reference: LossCurve, normalized: bool = False) -> float:
    """Sup distance between the step extrapolations of a coarse curve and a
    finer reference over their shared horizon.

    Both curves are piecewise constant, so the sup over the whole horizon is
    an exact max over the reference's grid times.  Divides by alpha when
    normalized is set.
    """
    refinement_factor(curve, reference)  # raises MeshMismatch when not nested
    times = np.arange(reference.values.size) * reference.dt
    coarse = curve.values[np.minimum(
        (times / curve.dt + 1e-9).astype(np.int64), curve.values.size - 1
    )]
    err = float(np.max(np.abs(coarse - reference.values)))
    return err / curve.alpha if normalized else err


# ---------------------------------------------------------------------------
# pointwise and graph diagnostics


def m1_pointwise_check(
    curves: Sequence[LossCurve],
    limit_candidate: LossCurve,
    probe_times: Sequence[float],
) -> np.ndarray:
    """Residual |finest(t) - limit(t)| at each probe time.

    `curves` must be ordered by strictly decreasing dt; away from jump times
    a shrinking residual witnesses pointwise (hence graph-sense) convergence.
    """
    if not curves:
        raise ValidationError("need at least one curve")
    dts = [c.dt for c in curves]
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValidationError("curves must be ordered by strictly decreasing dt")
    horizon = min(c.horizon for c in curves)
    horizon = min(horizon, limit_candidate.horizon)
    probes = np.asarray(probe_times, dtype=float)
    if probes.size and (probes.min() < 0 or probes.max() > horizon * (1 + 1e-9)):
        raise ValidationError("probe times must lie within every curve's horizon")
    finest = curves[-1]
    return np.array(
        [abs(finest.value_at(t) - limit_candidate.value_at(t)) for t in probes]
    )


def continuity_probe_times(
    finest: LossCurve, coarse_dt: float, candidates: Sequence[float] | None = None
) -> np.ndarray:
    """Probe times at which the finest curve moves by at most alpha/10 over a
    one-coarse-step neighborhood on each side; jump neighborhoods (including a
    jump sitting exactly at the probe) are excluded."""
    if candidates is None:
        n_coarse = int(round(finest.horizon / coarse_dt))
        candidates = np.arange(n_coarse + 1) * coarse_dt
    out = []
    for t in np.asarray(candidates, dtype=float):
        lo = finest.value_at(max(t - coarse_dt, 0.0))
        hi = finest.value_at(min(t + coarse_dt, finest.horizon))
        if hi - lo <= finest.alpha / 10.0:
            out.append(t)
    return np.array(out)


def _completed_graph(curve: LossCurve) -> np.ndarray:
    """Vertices of the completed staircase graph in the (t, value) plane.

    Jumps contribute vertical segments, flat stretches horizontal ones; the
    polyline is monotone in both coordinates.
    """
    t = np.arange(curve.values.size) * curve.dt
    v = curve.values
    verts = [(0.0, v[0])]
    for k in range(1, v.size):
        verts.append((t[k], v[k - 1]))
        if v[k] != v[k - 1]:
            verts.append((t[k], v[k]))
    last = verts[-1]
    if last != (curve.horizon, v[-1]):
        verts.append((curve.horizon, v[-1]))
    return np.asarray(verts, dtype=float)


def _sample_polyline(verts: np.ndarray, max_points: int = 20_000) -> np.ndarray:
    lengths = np.hypot(*np.diff(verts, axis=0).T)
    total = float(lengths.sum())
    if total == 0.0:
        return verts[:1]
    spacing = total / max_points
    pts = [verts[0]]
    for k, seg_len in enumerate(lengths):
        if seg_len == 0.0:
            continue
        n_sub = max(1, int(math.ceil(seg_len / spacing)))
        frac = np.arange(1, n_sub + 1) / n_sub
        pts.append(verts[k] + frac[:, None] * (verts[k + 1] - verts[k]))
    return np.vstack(pts)


def _directed_hausdorff(points: np.ndarray, verts: np.ndarray) -> float:
    a = verts[:-1]
    d = verts[1:] - a
    seg_sq = np.einsum("ij,ij->i", d, d)
    seg_sq[seg_sq == 0.0] = 1.0
    worst = 0.0
    for chunk in np.array_split(points, max(1, points.shape[0] // 512)):
        w = chunk[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pki,ki->pk", w, d) / seg_sq, 0.0, 1.0)
        closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.min(np.linalg.norm(chunk[:, None, :] - closest, axis=2), axis=1)
        worst = max(worst, float(dist.max()))
    return worst


def m1_graph_distance(a: LossCurve, b: LossCurve, max_points: int = 20_000) -> float:
    """Hausdorff distance between the completed staircase graphs of two
    monotone loss curves, by dense sampling with vertices always included.

    A computable proxy for graph-sense closeness: never exceeds the sup
    distance, and stays small when identical jumps are slightly offset in
    time (where the sup distance spikes).
    """
    if abs(a.horizon - b.horizon) > 1e-9 * max(1.0, a.horizon):
        raise MeshMismatch("graph distance needs matching horizons")
    if a.dt == b.dt and np.array_equal(a.values, b.values):
        return 0.0
    va, vb = _completed_graph(a), _completed_graph(b)
    pa = np.vstack([_sample_polyline(va, max_points), va])
    pb = np.vstack([_sample_polyline(vb, max_points), vb])
    return max(_directed_hausdorff(pa, vb), _directed_hausdorff(pb, va))


# ---------------------------------------------------------------------------
# rate regression


class RateFit(NamedTuple):
    rate: float
    intercept: float
    r_squared: float


def fit_rate(pairs: Sequence[tuple[int, float]]) -> RateFit:
    """Ordinary least squares of log(error) on log(n); rate is the negated
    slope.  Needs at least 3 pairs with strictly positive errors."""
    if len(pairs) < 3:
        raise DegenerateInput("rate regression needs at least 3 points")
    ns = np.array([p[0] for p in pairs], dtype=float)
    errs = np.array([p[1] for p in pairs], dtype=float)
    if np.any(ns <= 0):
        raise DegenerateInput("mesh counts must be positive")
    if np.any(errs <= 0):
        raise DegenerateInput("rate regression needs strictly positive errors")
    x, y = np.log(ns), np.log(errs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return RateFit(rate=-float(slope), intercept=float(intercept), r_squared=min(r2, 1.0))


def fit_rate_with_reference(
    pairs: Sequence[tuple[int, float]], reference_mesh: int
) -> RateFit:
    """Rate fit that accounts for errors measured against a finite reference
    mesh instead of the true limit.

    For a monotone scheme with error C*n^-r toward the limit, the measured
    distance to a nested reference at nbar steps is C*(n^-r - nbar^-r), which
    steepens the naive log-log slope as n approaches nbar.  This fit uses the
    finite-reference model directly: least squares of log(error) on
    log(n^-r - nbar^-r) with the prefactor profiled out, minimized over r.
    Always at or below the naive fit on monotone data.
    """
    if len(pairs) < 3:
        raise DegenerateInput("rate regression needs at least 3 points")
    ns = np.array([p[0] for p in pairs], dtype=float)
    errs = np.array([p[1] for p in pairs], dtype=float)
    nbar = float(reference_mesh)
    if np.any(ns <= 0):
        raise DegenerateInput("mesh counts must be positive")
    if np.any(errs <= 0):
        raise DegenerateInput("rate regression needs strictly positive errors")
    if np.any(ns >= nbar):
        raise ValidationError("every mesh count must be below the reference mesh")
    y = np.log(errs)

    def ssr(r: float) -> float:
        resid = y - np.log(ns**-r - nbar**-r)
        resid -= resid.mean()
        return float(resid @ resid)

    opt = minimize_scalar(ssr, bounds=(1e-4, 5.0), method="bounded",
                          options={"xatol": 1e-10})
    r = float(opt.x)
    intercept = float((y - np.log(ns**-r - nbar**-r)).mean())
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float(opt.fun) / ss_tot)
    return RateFit(rate=r, intercept=intercept, r_squared=min(r2, 1.0))


# ---------------------------------------------------------------------------
# study orchestration


@dataclass(frozen=True)
class ParticleEngine:
    """Monte Carlo engine spec for studies: N particles, one seed for all runs."""

    n_particles: int
    seed: int
    workers: int = 1

    def run(self, law, alpha, dt, horizon) -> LossCurve:
        return run_particle_scheme(
            law, alpha, dt, horizon, self.n_particles, seed=self.seed, workers=self.workers
        )

    def to_config(self) -> dict:
        return {
            "engine": "particle",
            "n_particles": self.n_particles,
            "seed": self.seed,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class GridEngine:
    """Density-evolution engine spec; h=None lets each run pick sqrt(dt)/20."""

    h: float | None = None

    def run(self, law, alpha, dt, horizon) -> LossCurve:
        return run_grid_scheme(law, alpha, dt, horizon, h=self.h)

    def to_config(self) -> dict:
        return {"engine": "grid", "h": self.h}


@dataclass
class ConvergenceReport:
    """Mesh-refinement study: per-mesh sup errors and the fitted rate."""

    mesh_counts: list
    errors: list
    fitted_rate: float
    intercept: float
    r_squared: float
    reference_mesh: int
    errors_raw: list = field(default_factory=list)
    errors_normalized: list = field(default_factory=list)
    normalized: bool = False
    debiased_rate: float = math.nan
    bound_values: list | None = None
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.mesh_counts) != len(self.errors):
            raise ValidationError("mesh_counts and errors must have equal length")
        if any(b <= a for a, b in zip(self.mesh_counts, self.mesh_counts[1:])):
            raise ValidationError("mesh_counts must be strictly increasing")

    def to_json_dict(self) -> dict:
        out = {
            "schema": "stefan-euler/1",
            "kind": "convergence_report",
            "mesh_counts": [int(n) for n in self.mesh_counts],
            "errors": [float(e) for e in self.errors],
            "errors_raw": [float(e) for e in self.errors_raw],
            "errors_normalized": [float(e) for e in self.errors_normalized],
            "normalized": self.normalized,
            "fitted_rate": None if math.isnan(self.fitted_rate) else self.fitted_rate,
            "debiased_rate": None if math.isnan(self.debiased_rate) else self.debiased_rate,
            "intercept": None if math.isnan(self.intercept) else self.intercept,
            "r_squared": None if math.isnan(self.r_squared) else self.r_squared,
            "reference_mesh": int(self.reference_mesh),
            "inputs": self.inputs,
        }
        if self.bound_values is not None:
            out["bound_values"] = [
                None if v is None else float(v) for v in self.bound_values
            ]
        return out

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["n", "error"]
            if self.bound_values is not None:
                header.append("bound")
            writer.writerow(header)
            for k, (n, e) in enumerate(zip(self.mesh_counts, self.errors)):
                row = [int(n), repr(float(e))]
                if self.bound_values is not None:
                    v = self.bound_values[k]
                    row.append("" if v is None else repr(float(v)))
                writer.writerow(row)

    def to_markdown(self) -> str:
        lines = ["| n | sup error |", "| ---: | ---: |"]
        lines += ["| %d | %.6g |" % (n, e) for n, e in zip(self.mesh_counts, self.errors)]
        lines.append("")
        lines.append(
            "fitted rate %.3f (r^2 %.4f, reference n=%d)"
            % (self.fitted_rate, self.r_squared, self.reference_mesh)
        )
        if not math.isnan(self.debiased_rate):
            lines.append("reference-debiased rate %.3f" % self.debiased_rate)
        return "\n".join(lines)


def convergence_study(
    law,
    alpha: float,
    horizon: float,
    n_list: Sequence[int],
    n_reference: int,
    engine,
    normalized: bool = False,
    workers: int = 1,
    bound_fn: Callable[[float], float | None] | None = None,
) -> ConvergenceReport:
    """Run the chosen engine at each mesh and at the reference mesh, measure
    sup errors against the reference, and fit the rate.

    n_reference must be a common multiple of every n; references below 8x the
    largest n are accepted with a warning since comparison bias grows.  All
    runs share the engine's seed, so particle errors isolate the time
    discretization.  bound_fn, when given, maps dt to a bound value (or None)
    recorded alongside each error.
    """
    ns = sorted(int(n) for n in n_list)
    if len(set(ns)) != len(ns):
        raise ValidationError("n_list must not contain duplicates")
    for n in ns:
        if n <= 0:
            raise ValidationError("mesh counts must be positive")
        if n_reference % n != 0:
            raise MeshMismatch(
                "reference mesh %d is not a multiple of n=%d" % (n_reference, n)
            )
    if n_reference < 8 * max(ns):
        logger.warning(
            "reference mesh %d is below 8x the largest study mesh %d; "
            "comparison bias may distort the last points", n_reference, max(ns)
        )

    def run_one(n):
        return engine.run(law, alpha, horizon / n, horizon)

    reference = run_one(n_reference)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(run_one, ns))
    else:
        curves = [run_one(n) for n in ns]
    raw = [sup_error(c, reference) for c in curves]
    norm = [e / alpha for e in raw]
    errors = norm if normalized else raw
    try:
        fit = fit_rate(list(zip(ns, errors)))
    except DegenerateInput:
        # all-zero errors (loss never starts): no rate to fit
        fit = RateFit(rate=math.nan, intercept=math.nan, r_squared=math.nan)
    try:
        debiased = fit_rate_with_reference(list(zip(ns, errors)), n_reference).rate
    except (DegenerateInput, ValidationError):
        debiased = math.nan
    bounds = None
    if bound_fn is not None:
        bounds = [bound_fn(horizon / n) for n in ns]
    return ConvergenceReport(
        mesh_counts=ns,
        errors=errors,
        fitted_rate=fit.rate,
        intercept=fit.intercept,
        r_squared=fit.r_squared,
        reference_mesh=int(n_reference),
        errors_raw=raw,
        errors_normalized=norm,
        normalized=normalized,
        debiased_rate=debiased,
        bound_values=bounds,
        inputs={
            "law": law.to_config(),
            "alpha": alpha,
            "horizon": horizon,
            "n_list": ns,
            "n_reference": int(n_reference),
            "engine_config": engine.to_config(),
            "normalized": normalized,
        },
    )
