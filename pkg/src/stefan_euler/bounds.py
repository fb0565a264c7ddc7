"""Explicit local error bounds, continuity estimates, and the jump resolver.

Everything here is a pure function of its inputs.  The central objects are

* the margin integral (the antiderivative of a margin profile) and its
  inverse, which control how fast the loss curve can move;
* the regime-dependent comparison function whose inverse converts a
  mesh-size term into a loss-error bound, with explicit constants;
* the local rate bound itself, valid on a short initial time window whose
  admissible length is itself explicit;
* the physical jump-size resolver: the smallest x at which the mass of the
  pre-jump sub-density on (0, x] drops below x/alpha.

Bounds can be *vacuous* at a given step size: their inner inversions leave
their attainable range.  That is reported (BoundVacuous), never patched.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .errors import (
    BoundVacuous,
    DomainError,
    NonpositiveConstant,
    OutOfRange,
    ValidationError,
    WindowExceeded,
)
from .laws import MarginProfile

_PSI0_THRESHOLD = 1e-12
_CDF_CLAMP = 40.0
_MAX_BISECT = 200
_FINE_STEPS = 10_000  # trapezoid resolution for tabulated margin integrals

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


# ---------------------------------------------------------------------------
# Gaussian cdf / quantile


def std_normal_cdf(x):
    """Standard normal CDF, exactly 0 below -40 and exactly 1 above +40."""
    if np.ndim(x) == 0:
        xf = float(x)
        if xf <= -_CDF_CLAMP:
            return 0.0
        if xf >= _CDF_CLAMP:
            return 1.0
        return float(ndtr(xf))
    xa = np.asarray(x, dtype=float)
    out = ndtr(xa)
    out = np.where(xa <= -_CDF_CLAMP, 0.0, out)
    out = np.where(xa >= _CDF_CLAMP, 1.0, out)
    return out


def std_normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError("quantile argument must lie in (0,1), got %r" % (p,))
    return float(ndtri(p))


# ---------------------------------------------------------------------------
# margin integral and inverse


def margin_value(profile: MarginProfile, x: float) -> float:
    return float(profile.value(x))


def _fine_cumulative(profile: MarginProfile):
    cached = getattr(profile, "_fine_cum", None)
    if cached is None:
        xs = np.linspace(0.0, profile.delta, _FINE_STEPS + 1)
        ys = np.asarray(profile.value(xs), dtype=float)
        step = profile.delta / _FINE_STEPS
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (ys[1:] + ys[:-1]) * step)])
        cached = (xs, cum)
        try:
            profile._fine_cum = cached
        except AttributeError:
            pass
    return cached


def margin_integral(profile: MarginProfile, x: float) -> float:
    """Integral of the margin from 0 to x, for x in (0, delta].

    Closed form for constant and monomial margins; trapezoid quadrature at
    step delta/10^4 for tabulated ones.
    """
    if not 0.0 < x <= profile.delta * (1.0 + 1e-12):
        raise DomainError("margin integral needs 0 < x <= delta=%g, got %g" % (profile.delta, x))
    x = min(x, profile.delta)
    if profile.kind == "constant":
        return profile.psi0_value * x
    if profile.kind == "monomial":
        return profile.coeff * x ** (profile.exponent + 1.0) / (profile.exponent + 1.0)
    xs, cum = _fine_cumulative(profile)
    return float(np.interp(x, xs, cum))


def _bisect_increasing(fn, lo: float, hi: float, target: float) -> float:
    """Root of fn(x) = target for non-decreasing fn on [lo, hi]."""
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def margin_integral_inv(profile: MarginProfile, y: float) -> float:
    """Inverse of the margin integral by bisection on [0, delta]."""
    if y < 0:
        raise DomainError("margin integral inverse needs y >= 0")
    if y == 0.0:
        return 0.0
    top = margin_integral(profile, profile.delta)
    if y > top * (1.0 + 1e-12):
        raise OutOfRange(
            "target %g exceeds the margin integral's range (max %g)" % (y, top)
        )
    y = min(y, top)
    return _bisect_increasing(lambda x: margin_integral(profile, x), 0.0, profile.delta, y)


# ---------------------------------------------------------------------------
# admissible time window and bound constants


def _positive_part(x: float) -> float:
    return x if x > 0.0 else 0.0


def bound_window(alpha: float, density_sup: float, profile: MarginProfile) -> float:
    """Largest admissible window length eps for the local rate bound.

    Always bounded by pi/(8 f^2) * (margin integral at delta/6)^2; when the
    margin is bounded away from zero at 0 there is a second cap
    delta^2 / (3 log(ratio)), dropped when the log argument is <= 1.
    """
    if alpha <= 0 or density_sup <= 0:
        raise ValidationError("alpha and density_sup must be positive")
    profile.validate_for_alpha(alpha)
    first = math.pi / (8.0 * density_sup**2) * margin_integral(profile, profile.delta / 6.0) ** 2
    psi0 = profile.psi0()
    if psi0 > _PSI0_THRESHOLD:
        ratio = _positive_part(2.0 * density_sup + psi0 - 1.0 / alpha) / psi0
        if ratio > 1.0:
            second = profile.delta**2 / (3.0 * math.log(ratio))
            return min(first, second)
    return first


@dataclass
class RateBoundConstants:
    """Explicit constants of the local rate bound, with their input echo.

    c1 drives the linear comparison function in the positive-margin regime;
    c2, c3 drive its integral form in the vanishing-margin regime; q is the
    lower-quartile Gaussian quantile; c4-c6 are the constants of the
    simplified closed-form bound (positive-margin regime only, else None).
    """

    c1: float
    c2: float
    c3: float
    q: float
    c4: float | None
    c5: float | None
    c6: float | None
    eps_max: float
    regime: str
    alpha: float = math.nan
    density_sup: float = math.nan
    eps: float = math.nan
    delta: float = math.nan
    profile_config: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.q < 0.0:
            raise NonpositiveConstant("q must be negative")
        if self.regime == "psi0_positive":
            if not self.c1 > 0.0:
                raise NonpositiveConstant("c1 must be positive, got %g" % self.c1)
        elif self.regime == "psi0_zero":
            if not self.c2 > 0.0:
                raise NonpositiveConstant("c2 must be positive, got %g" % self.c2)
            if not self.c3 > 0.0:
                raise NonpositiveConstant("c3 must be positive, got %g" % self.c3)
        else:
            raise ValidationError("unknown regime %r" % self.regime)

    def to_json_dict(self) -> dict:
        return {
            "schema": "stefan-euler/1",
            "kind": "rate_bound_constants",
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "q": self.q,
            "c4": self.c4,
            "c5": self.c5,
            "c6": self.c6,
            "eps_max": self.eps_max,
            "regime": self.regime,
            "inputs": {
                "alpha": self.alpha,
                "density_sup": self.density_sup,
                "eps": self.eps,
                "delta": self.delta,
                "profile": self.profile_config,
            },
        }


def rate_bound_constants(
    alpha: float, density_sup: float, profile: MarginProfile, eps: float
) -> RateBoundConstants:
    """All explicit constants for window length eps; fails when eps is outside
    the admissible window or an asserted-positive constant is not positive."""
    eps_max = bound_window(alpha, density_sup, profile)
    if not 0.0 < eps < eps_max:
        raise WindowExceeded(
            "eps=%g outside the admissible window (0, %g)" % (eps, eps_max)
        )
    f = density_sup
    delta = profile.delta
    psi0 = profile.psi0()
    psi_half = margin_value(profile, delta / 2.0)
    psi_delta = margin_value(profile, delta)
    q = std_normal_quantile(0.25)
    c1 = 0.25 * (
        psi0 - _positive_part(2.0 * f + psi0 - 1.0 / alpha) * math.exp(-delta**2 / (3.0 * eps))
    )
    c2 = psi_half - _positive_part(2.0 * f + psi_half - 1.0 / alpha) * math.exp(
        -7.0 * delta**2 / (24.0 * eps)
    )
    c3 = (f * SQRT_2_OVER_PI - q * psi_delta) * delta / 2.0
    if psi0 > _PSI0_THRESHOLD:
        regime = "psi0_positive"
        c4 = 192.0 * math.sqrt(2.0) * (f / c1 + max(alpha * f, 1.0)) if c1 > 0 else math.inf
        c5 = f / (48.0 * math.sqrt(2.0 * math.pi) * psi0)
        c6_first = math.pi * psi0**2 / (288.0 * f**2)
        ratio = _positive_part(2.0 * f + psi0 - 1.0 / alpha) / psi0
        c6 = min(c6_first, 1.0 / (3.0 * math.log(ratio))) if ratio > 1.0 else c6_first
    else:
        regime = "psi0_zero"
        c4 = c5 = c6 = None
    return RateBoundConstants(
        c1=c1,
        c2=c2,
        c3=c3,
        q=q,
        c4=c4,
        c5=c5,
        c6=c6,
        eps_max=eps_max,
        regime=regime,
        alpha=alpha,
        density_sup=density_sup,
        eps=eps,
        delta=delta,
        profile_config=profile.to_config(),
    )


# ---------------------------------------------------------------------------
# comparison function and inverse


def comparison_integral(consts: RateBoundConstants, profile: MarginProfile, x: float) -> float:
    """Regime-dependent comparison function on (0, delta).

    Positive-margin regime: c1*x.  Vanishing-margin regime: c2 times the
    integral of Phi(q - c3 / margin_integral(y)); the region where the
    integrand argument sits below -40 contributes exactly 0 and is skipped.
    """
    delta = profile.delta
    if not 0.0 < x < delta:
        raise DomainError("comparison integral needs 0 < x < delta, got %g" % x)
    if consts.regime == "psi0_positive":
        return consts.c1 * x
    cut = consts.c3 / (_CDF_CLAMP + consts.q)  # margin-integral level where the integrand wakes up
    top = margin_integral(profile, delta)
    if cut >= top:
        return 0.0
    y0 = margin_integral_inv(profile, cut)
    if x <= y0:
        return 0.0

    def integrand(y):
        arg = consts.q - consts.c3 / margin_integral(profile, y)
        return std_normal_cdf(arg)

    val, _ = quad(integrand, y0, x, epsabs=1e-12 * delta, limit=200)
    return consts.c2 * max(val, 0.0)


def comparison_integral_inv(consts: RateBoundConstants, profile: MarginProfile, y: float) -> float:
    """Inverse of the comparison function by bisection on [0, delta*(1-1e-9)]."""
    if y < 0:
        raise DomainError("comparison integral inverse needs y >= 0")
    if y == 0.0:
        return 0.0
    hi = profile.delta * (1.0 - 1e-9)
    top = comparison_integral(consts, profile, hi)
    if y > top * (1.0 + 1e-12):
        raise OutOfRange(
            "target %g exceeds the comparison function's range (max %g): "
            "bound vacuous at this dt" % (y, top)
        )
    y = min(y, top)
    return _bisect_increasing(
        lambda x: comparison_integral(consts, profile, x), 0.0, hi, y
    )


# ---------------------------------------------------------------------------
# the local rate bound


@dataclass
class RateBoundTerms:
    """Breakdown of one bound evaluation at step size dt."""

    dt: float
    mesh_term: float  # 192*sqrt(2*dt*log(ceil(eps/dt)/2))
    increment_term: float  # 2 * inverse margin integral of (2/sqrt(pi)) f sqrt(dt)
    g_total: float
    comparison_term: float  # inverse comparison function at f * g_total
    linear_term: float  # max(alpha*f, 1) * g_total
    total: float

    def to_json_dict(self) -> dict:
        return {
            "dt": self.dt,
            "mesh_term": self.mesh_term,
            "increment_term": self.increment_term,
            "g_total": self.g_total,
            "comparison_term": self.comparison_term,
            "linear_term": self.linear_term,
            "total": self.total,
        }


def rate_bound_terms(
    alpha: float,
    density_sup: float,
    profile: MarginProfile,
    eps: float,
    dt: float,
    consts: RateBoundConstants | None = None,
) -> RateBoundTerms:
    """Full local bound at step size dt, split into its summands.

    Raises BoundVacuous when dt is not small enough for the formula: the log
    factor must be positive and both inner inversions must stay inside their
    attainable ranges.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    if consts is None:
        consts = rate_bound_constants(alpha, density_sup, profile, eps)
    f = density_sup
    m = math.ceil(eps / dt)
    if m / 2.0 <= 1.0:
        raise BoundVacuous(
            "dt=%g too coarse: ceil(eps/dt)/2 = %g is not > 1" % (dt, m / 2.0)
        )
    mesh_term = 192.0 * math.sqrt(2.0 * dt * math.log(m / 2.0))
    inner = 2.0 / math.sqrt(math.pi) * f * math.sqrt(dt)
    try:
        increment_term = 2.0 * margin_integral_inv(profile, inner)
    except OutOfRange as exc:
        raise BoundVacuous("bound vacuous at dt=%g: %s" % (dt, exc)) from exc
    g_total = mesh_term + increment_term
    try:
        comparison_term = comparison_integral_inv(consts, profile, f * g_total)
    except OutOfRange as exc:
        raise BoundVacuous("bound vacuous at dt=%g: %s" % (dt, exc)) from exc
    linear_term = max(alpha * f, 1.0) * g_total
    return RateBoundTerms(
        dt=dt,
        mesh_term=mesh_term,
        increment_term=increment_term,
        g_total=g_total,
        comparison_term=comparison_term,
        linear_term=linear_term,
        total=comparison_term + linear_term,
    )


def rate_bound(
    alpha: float, density_sup: float, profile: MarginProfile, eps: float, dt: float
) -> float:
    """Upper bound on the sup-distance between the discrete and the physical
    loss over the window [0, eps]."""
    return rate_bound_terms(alpha, density_sup, profile, eps, dt).total


def simplified_rate_bound(
    alpha: float, density_sup: float, psi0: float, delta: float, eps: float, dt: float
) -> float:
    """Closed-form bound for a constant margin psi0: c4*sqrt(dt)*(sqrt(log)+c5)."""
    if psi0 <= 0 or delta <= 0 or density_sup <= 0 or alpha <= 0:
        raise ValidationError("psi0, delta, density_sup, alpha must be positive")
    f = density_sup
    c6_first = math.pi * psi0**2 / (288.0 * f**2)
    ratio = _positive_part(2.0 * f + psi0 - 1.0 / alpha) / psi0
    c6 = min(c6_first, 1.0 / (3.0 * math.log(ratio))) if ratio > 1.0 else c6_first
    if not 0.0 < eps < c6 * delta**2:
        raise WindowExceeded(
            "eps=%g outside the admissible window (0, %g)" % (eps, c6 * delta**2)
        )
    m = math.ceil(eps / dt)
    if m / 2.0 <= 1.0:
        raise BoundVacuous(
            "dt=%g too coarse: ceil(eps/dt)/2 = %g is not > 1" % (dt, m / 2.0)
        )
    c1 = 0.25 * (psi0 - _positive_part(2.0 * f + psi0 - 1.0 / alpha) * math.exp(-delta**2 / (3.0 * eps)))
    if c1 <= 0:
        raise NonpositiveConstant("c1 must be positive, got %g" % c1)
    c4 = 192.0 * math.sqrt(2.0) * (f / c1 + max(alpha * f, 1.0))
    c5 = f / (48.0 * math.sqrt(2.0 * math.pi) * psi0)
    return c4 * math.sqrt(dt) * (math.sqrt(math.log(m / 2.0)) + c5)


def modulus_of_continuity(profile: MarginProfile, density_sup: float, gap: float) -> float:
    """A priori bound on any loss increase over a time gap inside the window."""
    if gap < 0:
        raise DomainError("gap must be nonnegative")
    if gap == 0.0:
        return 0.0
    window = math.pi / (8.0 * density_sup**2) * margin_integral(profile, profile.delta / 6.0) ** 2
    if gap > window * (1.0 + 1e-12):
        raise OutOfRange("gap %g outside the modulus window %g" % (gap, window))
    arg = density_sup * SQRT_2_OVER_PI * math.sqrt(gap)
    return 2.0 * margin_integral_inv(profile, arg)


# ---------------------------------------------------------------------------
# physical jump size


@dataclass
class TabulatedSubDensity:
    """Sub-probability density tabulated on a sorted nonnegative grid."""

    grid: np.ndarray
    values: np.ndarray
    total_mass: float = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape or self.grid.size < 2:
            raise ValidationError("sub-density needs matching 1-d grid and values")
        if np.any(np.diff(self.grid) <= 0) or self.grid[0] < 0:
            raise ValidationError("grid must be strictly increasing and nonnegative")
        if np.any(self.values < 0):
            raise ValidationError("density values must be nonnegative")
        computed = float(np.trapezoid(self.values, self.grid))
        if self.total_mass is None:
            self.total_mass = computed
        elif abs(self.total_mass - computed) > 1e-10 * max(1.0, computed):
            raise ValidationError("cached total_mass inconsistent with trapezoid integral")
        if self.total_mass > 1.0 + 1e-10:
            raise ValidationError("sub-density mass exceeds 1")

    def cumulative(self) -> np.ndarray:
        seg = np.diff(self.grid) * 0.5 * (self.values[:-1] + self.values[1:])
        return np.concatenate([[0.0], np.cumsum(seg)])


def physical_jump_size(density: TabulatedSubDensity, alpha: float) -> float:
    """Smallest x > 0 at which the mass of the density on (0, x] drops below
    x/alpha; 0 when that happens immediately, alpha*total_mass when it only
    happens past the grid.

    The cumulative mass is treated as piecewise linear through its exact node
    values, so the infimum is resolved exactly on each linear piece.
    """
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    grid = density.grid
    cum = density.cumulative()
    if grid[0] > 0.0:
        # no mass on (0, grid[0]): the deficit is immediate
        return 0.0
    margin = cum - grid / alpha  # M(x) - x/alpha at the nodes
    for k in range(len(grid) - 1):
        if margin[k + 1] < 0.0:
            length = grid[k + 1] - grid[k]
            # margin[k] >= 0 here: earlier segments would have returned
            return grid[k] + length * margin[k] / (margin[k] - margin[k + 1])
    # past the grid the density is 0: M stays at total_mass
    return alpha * density.total_mass


def jump_witness(density: TabulatedSubDensity, alpha: float) -> tuple[float, float]:
    """(jump, witness): the witness is the first tabulated or extrapolated
    point where the mass deficit is strictly negative (for reporting)."""
    jump = physical_jump_size(density, alpha)
    grid = density.grid
    cum = density.cumulative()
    margin = cum - grid / alpha
    for x, m in zip(grid, margin):
        if x > 0 and m < 0:
            return jump, float(x)
    return jump, float(alpha * density.total_mass)


def dump_constants_json(consts: RateBoundConstants, path) -> None:
    with open(path, "w") as fh:
        json.dump(consts.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
