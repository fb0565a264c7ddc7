"""Deterministic density-evolution engine for the discrete loss curve.

Evolves the sub-probability density of surviving particles on a uniform
spatial grid: one Gaussian convolution per time step, a leftward shift by the
known loss increment, absorption of everything below zero.  The loss at the
next grid time is alpha times the mass lost so far.  This is the
deterministic counterpart of the particle engine and serves as its oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .curves import LossCurve, step_count
from .errors import InvalidGrid, InvalidMesh
from .laws import InitialLaw

_BOUNDARY_MASS_LIMIT = 1e-6
_KERNEL_REACH = 8.0  # kernel truncated at +-8*sqrt(dt)


@dataclass
class SurvivorDensity:
    """Density per unit length on cells [j*h, (j+1)*h), centers origin + j*h."""

    h: float
    origin: float
    values: np.ndarray
    mass: float = None  # cached h * sum(values); filled in __post_init__

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.h <= 0:
            raise InvalidGrid("spatial step h must be positive")
        if np.any(self.values < 0):
            raise InvalidGrid("survivor density values must be nonnegative")
        computed = float(self.h * self.values.sum())
        if self.mass is None:
            self.mass = computed
        elif abs(self.mass - computed) > 1e-12 * max(1.0, computed):
            raise InvalidGrid("cached mass inconsistent with values")

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.values.size)


def gaussian_kernel(dt: float, h: float) -> np.ndarray:
    """Discrete N(0, dt) kernel on spacing h, truncated at +-8*sqrt(dt),
    renormalized to unit mass."""
    reach = int(math.ceil(_KERNEL_REACH * math.sqrt(dt) / h))
    m = np.arange(-reach, reach + 1)
    w = np.exp(-0.5 * (m * h) ** 2 / dt)
    return w / w.sum()


def _convolve_shift(values: np.ndarray, kernel: np.ndarray, shift_cells: float):
    """Full convolution, leftward shift with linear redistribution, and a
    split of the result into kept cells (same index range as the input),
    mass absorbed below zero, and mass spilled past the right edge."""
    reach = (kernel.size - 1) // 2
    full = np.convolve(values, kernel)  # cell j of the convolution sits at index j + reach
    s = int(math.floor(shift_cells))
    frac = shift_cells - s
    n = values.size
    size = full.size
    ext = np.concatenate([full, [0.0]])

    def shifted(cells: np.ndarray) -> np.ndarray:
        i = cells + s + reach
        a = np.where((i >= 0) & (i < size), ext[np.clip(i, 0, size)], 0.0)
        j = i + 1
        b = np.where((j >= 0) & (j < size), ext[np.clip(j, 0, size)], 0.0)
        return (1.0 - frac) * a + frac * b

    kept = shifted(np.arange(n))
    lowest = -reach - s - 1  # lowest shifted cell that can hold mass
    absorbed = 0.0
    if lowest < 0:
        absorbed = float(shifted(np.arange(lowest, 0)).sum())
    total = float(full.sum())
    spilled = max(total - float(kept.sum()) - absorbed, 0.0)
    return kept, absorbed, spilled


def convolve_step(p: SurvivorDensity, dt: float, shift: float) -> SurvivorDensity:
    """One transition: convolve with N(0,dt), translate left by shift,
    restrict to [0, infinity).  Output mass never exceeds input mass.

    The cell window grows to hold all reachable mass, but never extends
    below the absorbing boundary at physical zero.
    """
    if shift < 0:
        raise InvalidGrid("shift must be nonnegative")
    kernel = gaussian_kernel(dt, p.h)
    reach = (kernel.size - 1) // 2
    needed_left = reach + int(math.ceil(shift / p.h)) + 1
    to_boundary = int(math.floor((p.origin - 0.5 * p.h) / p.h + 1e-9))
    left_pad = min(needed_left, max(to_boundary, 0))
    padded = np.concatenate([np.zeros(left_pad), p.values, np.zeros(reach)])
    kept, _, _ = _convolve_shift(padded, kernel, shift / p.h)
    kept = np.maximum(kept, 0.0)
    return SurvivorDensity(h=p.h, origin=p.origin - left_pad * p.h, values=kept)


def initial_survivor_density(law: InitialLaw, h: float, x_max: float) -> tuple[SurvivorDensity, float]:
    """Cell-averaged initial density and the unresolved far-tail mass.

    Cell j covers [j*h, (j+1)*h); averages come from exact cdf differences so
    the grid mass plus the far tail is exactly 1.
    """
    n = int(math.ceil(x_max / h))
    edges = h * np.arange(n + 1)
    cdf = law.cdf(edges)
    values = np.diff(cdf) / h
    values = np.maximum(values, 0.0)
    far = float(1.0 - cdf[-1])
    return SurvivorDensity(h=h, origin=0.5 * h, values=values), far


def run_grid_scheme(
    law: InitialLaw,
    alpha: float,
    dt: float,
    horizon: float,
    h: float | None = None,
    x_max: float | None = None,
    snapshot_every: int = 0,
    snapshot_path=None,
) -> LossCurve:
    """Deterministic loss curve on the time grid 0, dt, ..., n*dt.

    Defaults: h = sqrt(dt)/20, x_max = law support + 6*sqrt(horizon).  Mass
    reaching the right boundary above 1e-6 in a single step aborts the run
    (InvalidGrid) rather than being clipped; below that threshold it is kept
    as far mass that can never be absorbed within the horizon.
    """
    if dt <= 0 or horizon < dt:
        raise InvalidMesh("need 0 < dt <= horizon")
    if alpha <= 0:
        raise InvalidMesh("alpha must be positive")
    if h is None:
        h = math.sqrt(dt) / 20.0
    if h <= 0:
        raise InvalidGrid("spatial step h must be positive")
    if x_max is None:
        x_max = law.support_upper() + 6.0 * math.sqrt(horizon)

    n_steps = step_count(dt, horizon)
    density, far_mass = initial_survivor_density(law, h, x_max)
    kernel = gaussian_kernel(dt, h)

    values = np.empty(n_steps + 1)
    values[0] = alpha * float(law.cdf(0.0))
    p = density.values
    # survivor mass after the step-0 kill; a probability, so clamp round-off
    mass = min(density.mass + far_mass, 1.0)
    values[1] = max(alpha * (1.0 - mass), values[0])
    snapshots = []
    if snapshot_every and snapshot_path is not None:
        snapshots.append((0.0, p.copy()))

    for n in range(1, n_steps):
        shift_cells = (values[n] - values[n - 1]) / h
        p, _, spilled = _convolve_shift(p, kernel, shift_cells)
        p = np.maximum(p, 0.0)
        if spilled > _BOUNDARY_MASS_LIMIT:
            raise InvalidGrid(
                "mass %.3g reached the right boundary at step %d; enlarge x_max"
                % (spilled, n)
            )
        far_mass += spilled
        new_mass = min(float(h * p.sum()) + far_mass, mass)  # truncation cannot create mass
        # accumulate the loss as alpha * (mass lost this step): the
        # bookkeeping identity is then exact in floating point
        values[n + 1] = values[n] + alpha * (mass - new_mass)
        mass = new_mass
        if snapshot_every and snapshot_path is not None and n % snapshot_every == 0:
            snapshots.append((n * dt, p.copy()))

    if snapshot_every and snapshot_path is not None:
        with open(snapshot_path, "w", newline="") as fh:
            fh.write("t,x,p\n")
            centers = 0.5 * h + h * np.arange(p.size)
            for t, dens in snapshots:
                for x, v in zip(centers, dens):
                    fh.write("%r,%r,%r\n" % (t, float(x), float(v)))

    meta = {
        "engine": "grid",
        "law": law.to_config(),
        "alpha": alpha,
        "dt": dt,
        "horizon": horizon,
        "h": h,
        "x_max": x_max,
    }
    return LossCurve(dt=dt, values=values, alpha=alpha, meta=meta)


def one_step_oracle(law: InitialLaw, alpha: float, dt: float) -> float:
    """Closed-form loss two grid times in: alpha * int f(x) Phi(-x/sqrt(dt)) dx.

    Valid because the first grid value vanishes for laws supported on
    [0, infinity).  Independent quadrature cross-check for both engines.
    """
    from scipy.special import ndtr

    if dt <= 0:
        raise InvalidMesh("dt must be positive")
    root = math.sqrt(dt)
    upper = min(law.support_upper(), 40.0 * root)
    if upper <= 0:
        return 0.0
    val, _ = quad(lambda x: law.pdf(x) * ndtr(-x / root), 0.0, upper, limit=400)
    return alpha * val



