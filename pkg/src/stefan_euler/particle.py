"""Particle Monte Carlo engine for the discrete loss curve.

N particles draw initial positions from the law and advance by independent
Gaussian increments; a particle dies the first time its position, shifted by
the current loss, sits below zero, and the loss fed back at each step is
alpha times the dead fraction.  All randomness is keyed by
(seed, particle id, step), so results are bit-identical for any worker count
and any horizon extension.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from scipy.special import ndtri

from .curves import LossCurve, step_count
from .errors import InvalidMesh, MeshMismatch, ValidationError
from .laws import InitialLaw
from .rng import INCREMENT_LANE, stream_base, uniforms_from_base


@dataclass
class ParticleEnsemble:
    """State of the N-particle system after `step_index` steps.

    driver_positions hold the un-shifted driving paths of the alive
    particles; dead particles keep the position they died at.
    """

    driver_positions: np.ndarray
    alive: np.ndarray
    dead_count: int
    step_index: int

    def __post_init__(self):
        if self.driver_positions.shape != self.alive.shape:
            raise ValidationError("positions and alive flags must align")
        if self.dead_count != int((~self.alive).sum()):
            raise ValidationError("dead_count out of sync with alive flags")


def _advance_slice(w, base, step, sqrt_dt):
    u = uniforms_from_base(base, np.uint64(INCREMENT_LANE + step))
    w += sqrt_dt * ndtri(u)


def run_particle_scheme(
    law: InitialLaw,
    alpha: float,
    dt: float,
    horizon: float,
    n_particles: int,
    seed: int,
    workers: int = 1,
    record_alive_history: bool = False,
):
    """Monte Carlo loss curve on the time grid 0, dt, ..., ceil(horizon/dt)*dt.

    Step order per grid time n >= 1: report loss = alpha/N * deaths through
    step n-1, advance alive drivers by N(0, dt), kill drivers whose shifted
    position went below zero.  The step-0 value is alpha * #{X0 <= 0} / N and
    the step-0 kill uses the strict test on the shifted position.

    Returns the LossCurve; with record_alive_history=True returns
    (curve, ensemble, history) where history[n] is the alive count after
    step n (used by the no-resurrection property test).
    """
    if dt <= 0 or horizon < dt:
        raise InvalidMesh("need 0 < dt <= horizon")
    if n_particles < 1:
        raise ValidationError("n_particles must be >= 1")
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if workers < 1:
        raise ValidationError("workers must be >= 1")

    n_steps = step_count(dt, horizon)
    n = int(n_particles)
    sqrt_dt = math.sqrt(dt)

    ids = np.arange(n, dtype=np.uint64)
    w = law.sample_keyed(seed, ids, block=0)
    alive = np.ones(n, dtype=bool)

    values = np.empty(n_steps + 1)
    lam0 = alpha * float((w <= 0.0).sum()) / n
    values[0] = lam0
    newly_dead = w - lam0 < 0.0
    alive[newly_dead] = False
    dead = int(newly_dead.sum())

    live_ids = np.flatnonzero(alive).astype(np.uint64)
    live_w = w[live_ids]
    live_base = stream_base(seed, live_ids)

    history = [n - dead] if record_alive_history else None
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for step in range(1, n_steps + 1):
            lam = alpha * dead / n
            values[step] = lam
            if live_w.size:
                if pool is None or live_w.size < 4096:
                    _advance_slice(live_w, live_base, step, sqrt_dt)
                else:
                    # contiguous slices per worker; per-particle values do not
                    # depend on the partitioning, so any split is bit-exact
                    bounds = np.linspace(0, live_w.size, workers + 1, dtype=int)
                    futures = [
                        pool.submit(_advance_slice, live_w[a:b], live_base[a:b], step, sqrt_dt)
                        for a, b in zip(bounds[:-1], bounds[1:])
                        if b > a
                    ]
                    for f in futures:
                        f.result()
                killed = live_w - lam < 0.0
                k = int(killed.sum())
                if k:
                    dead += k
                    dead_ids = live_ids[killed].astype(np.int64)
                    alive[dead_ids] = False
                    w[dead_ids] = live_w[killed]
                    keep = ~killed
                    live_ids = live_ids[keep]
                    live_w = live_w[keep]
                    live_base = live_base[keep]
            if record_alive_history:
                history.append(n - dead)
    finally:
        if pool is not None:
            pool.shutdown()

    w[live_ids.astype(np.int64)] = live_w
    meta = {
        "engine": "particle",
        "law": law.to_config(),
        "alpha": alpha,
        "dt": dt,
        "horizon": horizon,
        "n_particles": n,
        "seed": int(seed),
        "workers": int(workers),
    }
    curve = LossCurve(dt=dt, values=values, alpha=alpha, meta=meta)
    if record_alive_history:
        ensemble = ParticleEnsemble(
            driver_positions=w, alive=alive, dead_count=dead, step_index=n_steps
        )
        return curve, ensemble, history
    return curve


def particle_scaling_study(
    law: InitialLaw,
    alpha: float,
    dt: float,
    horizon: float,
    n_list: list[int],
    n_seeds: int,
    reference: LossCurve,
    seed: int = 0,
    workers: int = 1,
) -> list[tuple[int, float]]:
    """Mean (over seeds) of the sup-norm gap to a same-mesh reference curve.

    The gap is max over grid times 1..n_steps of |curve - reference|, the
    Monte Carlo error of the particle scheme at each population size N.
    Seed r of n_seeds uses seed + r.
    """
    n_steps = step_count(dt, horizon)
    if reference.n_steps != n_steps or abs(reference.dt - dt) > 1e-9 * dt:
        raise MeshMismatch(
            "reference mesh (dt=%g, n=%d) differs from requested (dt=%g, n=%d)"
            % (reference.dt, reference.n_steps, dt, n_steps)
        )
    if abs(reference.alpha - alpha) > 1e-12 * max(1.0, alpha):
        raise MeshMismatch("reference alpha differs")
    if n_seeds < 1:
        raise ValidationError("n_seeds must be >= 1")
    out = []
    ref = reference.values
    for n_particles in n_list:
        errs = []
        for r in range(n_seeds):
            curve = run_particle_scheme(
                law, alpha, dt, horizon, n_particles, seed + r, workers=workers
            )
            errs.append(float(np.max(np.abs(curve.values[1:] - ref[1:]))))
        out.append((int(n_particles), float(np.mean(errs))))
    return out



