"""Discrete loss curves: the central output type of both engines.

A LossCurve holds the loss values at grid times 0, dt, 2dt, ...; between grid
times the curve is the piecewise-constant extrapolation from the left grid
point, which is exactly how both engines and all error norms interpret it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SCHEMA = "stefan-euler/1"


@dataclass
class LossCurve:
    dt: float
    values: np.ndarray
    alpha: float
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValidationError("values must be a nonempty 1-d array")
        tol = 1e-12 * max(1.0, self.alpha)
        if np.any(np.diff(self.values) < 0.0):
            raise ValidationError("loss values must be non-decreasing")
        if self.values[0] < -tol or self.values[-1] > self.alpha + tol:
            raise ValidationError("loss values must lie in [0, alpha]")

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    def value_at(self, t):
        """Piecewise-constant extrapolation from the last grid time <= t."""
        ta = np.asarray(t, dtype=float)
        if np.any(ta < -1e-12):
            raise ValidationError("curve is defined for t >= 0")
        # the 1e-9 guard snaps t sitting one rounding error below a grid time
        idx = np.floor(np.maximum(ta, 0.0) / self.dt + 1e-9).astype(np.int64)
        idx = np.clip(idx, 0, self.n_steps)
        out = self.values[idx]
        return float(out) if np.ndim(t) == 0 else out

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    # -- serialization ------------------------------------------------------

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,lambda,loss_fraction\n")
            for k, v in enumerate(self.values):
                fh.write("%r,%r,%r\n" % (k * self.dt, float(v), float(v) / self.alpha))

    def to_json_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "loss_curve",
            "dt": self.dt,
            "alpha": self.alpha,
            "n_steps": self.n_steps,
            "values": [float(v) for v in self.values],
            "meta": self.meta,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "LossCurve":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("schema") != SCHEMA:
            raise ValidationError("unexpected schema: %r" % doc.get("schema"))
        return cls(
            dt=float(doc["dt"]),
            values=np.array(doc["values"], dtype=float),
            alpha=float(doc["alpha"]),
            meta=doc.get("meta", {}),
        )


def step_count(dt: float, horizon: float) -> int:
    """Number of steps covering the horizon: ceil(horizon/dt) with a guard
    that snaps exact multiples computed in floating point."""
    import math

    from .errors import InvalidMesh

    if dt <= 0:
        raise InvalidMesh("dt must be positive, got %r" % (dt,))
    if horizon < dt:
        raise InvalidMesh("horizon %g shorter than one step %g" % (horizon, dt))
    ratio = horizon / dt
    n = int(round(ratio))
    if abs(ratio - n) <= 1e-9 * max(1.0, ratio) and n >= 1:
        return n
    return int(math.ceil(ratio))


def refinement_factor(coarse: LossCurve, fine: LossCurve, tol: float = 1e-9) -> int:
    """Integer m with coarse.dt = m * fine.dt; the curves must share alpha
    and horizon for any comparison to make sense."""
    from .errors import MeshMismatch

    ratio = coarse.dt / fine.dt
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > tol * max(1.0, ratio):
        raise MeshMismatch("meshes are not integer-refined: dt ratio %.12g" % ratio)
    if abs(coarse.alpha - fine.alpha) > 1e-12 * max(1.0, coarse.alpha):
        raise MeshMismatch(
            "alpha differs: %g vs %g" % (coarse.alpha, fine.alpha)
        )
    if abs(coarse.horizon - fine.horizon) > tol * max(1.0, coarse.horizon):
        raise MeshMismatch(
            "horizons differ: %g vs %g" % (coarse.horizon, fine.horizon)
        )
    return m
