"""Initial laws of the pre-freeze state and their margin profiles.

Three law families are supported: gamma, the monomial-deficit densities
f(x) = 1/alpha - c*x^a on [0, A], and tabulated densities loaded from CSV.
Every law carries a bounded density on [0, infinity), its sup norm, exact
cdf, and a deterministic sampler driven by the counter-based streams in
:mod:`stefan_euler.rng`.

A margin profile records by how much the density stays below the critical
level 1/alpha near zero; the monomial-deficit family provides one in closed
form, and the rate-bound machinery in :mod:`stefan_euler.bounds` consumes it.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammainc, gammaincinv, gammaln, ndtri

from .errors import DomainError, NoValidSupport, ValidationError
from .rng import BLOCK, RandomStream, keyed_uniforms

logger = logging.getLogger(__name__)

_NORMALIZATION_TOL = 1e-8
_SUPPORT_TAIL = 1e-12
_MAX_REJECTION_ROUNDS = 500


def _scalar_or_array(x, values):
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(values)
    return values


# ---------------------------------------------------------------------------
# margin profiles


class MarginProfile:
    """Non-decreasing margin psi on (0, delta]: density <= 1/alpha - psi.

    The constant form is the degenerate device used by the simplified bound
    (margin bounded away from zero); the monomial form vanishes at 0 as in
    the local rate bound's critical regime; tabulated covers everything else.
    """

    delta: float
    kind: str

    def value(self, x):
        raise NotImplementedError

    def psi0(self) -> float:
        """Limit of the margin at 0+ (first tabulated value for tables)."""
        raise NotImplementedError

    def validate_for_alpha(self, alpha: float) -> None:
        if self.value(self.delta) > 1.0 / alpha + 1e-12:
            raise ValidationError(
                "margin at delta exceeds 1/alpha: psi(delta)=%g > %g"
                % (self.value(self.delta), 1.0 / alpha)
            )

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass
class ConstantMargin(MarginProfile):
    psi0_value: float
    delta: float
    kind: str = "constant"

    def __post_init__(self):
        if self.psi0_value <= 0:
            raise ValidationError("constant margin must be positive")
        if self.delta <= 0:
            raise ValidationError("delta must be positive")

    def value(self, x):
        return self.psi0_value * np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else self.psi0_value

    def psi0(self) -> float:
        return self.psi0_value

    def to_config(self) -> dict:
        return {"kind": "constant", "psi0": self.psi0_value, "delta": self.delta}


@dataclass
class MonomialMargin(MarginProfile):
    coeff: float
    exponent: float
    delta: float
    kind: str = "monomial"

    def __post_init__(self):
        if self.coeff <= 0 or self.exponent <= 0:
            raise ValidationError("monomial margin needs coeff > 0 and exponent > 0")
        if self.delta <= 0:
            raise ValidationError("delta must be positive")

    def value(self, x):
        v = self.coeff * np.power(np.asarray(x, dtype=float), self.exponent)
        return _scalar_or_array(x, v)

    def psi0(self) -> float:
        return 0.0

    def to_config(self) -> dict:
        return {
            "kind": "monomial",
            "coeff": self.coeff,
            "exponent": self.exponent,
            "delta": self.delta,
        }


class TabulatedMargin(MarginProfile):
    def __init__(self, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValidationError("tabulated margin needs matching 1-d grid and values")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ValidationError("margin grid must be strictly increasing and nonnegative")
        if np.any(values < 0) or np.any(np.diff(values) < 0):
            raise ValidationError("margin values must be nonnegative and non-decreasing")
        if values[-1] <= 0:
            raise ValidationError("margin must not vanish identically")
        self.grid = grid
        self.values = values
        self.delta = float(grid[-1])
        self.kind = "tabulated"

    def value(self, x):
        v = np.interp(np.asarray(x, dtype=float), self.grid, self.values)
        return _scalar_or_array(x, v)

    def psi0(self) -> float:
        return float(self.values[0])

    def to_config(self) -> dict:
        return {
            "kind": "tabulated",
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "delta": self.delta,
        }


# ---------------------------------------------------------------------------
# laws


class InitialLaw:
    """Common interface: density, cdf, sup norm, sampling, margin profile."""

    kind: str
    sup_norm: float

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def support_upper(self) -> float:
        """Upper end of the (numerically relevant) support."""
        raise NotImplementedError

    def margin_profile(self) -> MarginProfile | None:
        """Closed-form margin profile, when the family provides one."""
        return None

    def sample_keyed(self, seed: int, stream_ids, block: int = 0) -> np.ndarray:
        """One draw per stream id, from the given draw block of each stream."""
        ids = np.asarray(stream_ids, dtype=np.uint64)
        blocks = np.full(ids.shape, block, dtype=np.uint64)
        return self._draw(seed, ids, blocks)

    def sample_n(self, stream: RandomStream, n: int) -> np.ndarray:
        """n draws from one stream, consuming n draw blocks."""
        first = stream.take_blocks(n)
        ids = np.full(n, stream.stream_id, dtype=np.uint64)
        blocks = (np.arange(n, dtype=np.uint64) + np.uint64(first))
        return self._draw(stream.seed, ids, blocks)

    def sample(self, stream: RandomStream) -> float:
        return float(self.sample_n(stream, 1)[0])

    def _draw(self, seed, ids, blocks) -> np.ndarray:
        raise NotImplementedError

    def _check_normalization(self, lower: float = 0.0, points=None):
        upper = self.support_upper()
        total = quad(self.pdf, lower, upper, points=points, limit=200)[0]
        if abs(total - 1.0) > _NORMALIZATION_TOL + _SUPPORT_TAIL * 10:
            raise ValidationError(
                "density does not integrate to 1: quadrature gives %.12g" % total
            )

    def to_config(self) -> dict:
        raise NotImplementedError


def _block_uniform(seed, ids, blocks, offset) -> np.ndarray:
    counters = blocks * np.uint64(BLOCK) + np.uint64(offset)
    return keyed_uniforms(seed, ids, counters)


class GammaLaw(InitialLaw):
    """Gamma(shape, rate) with shape >= 1 (bounded density)."""

    def __init__(self, shape: float, rate: float):
        if shape < 1.0:
            raise ValidationError("gamma shape < 1 has an unbounded density at 0")
        if rate <= 0:
            raise ValidationError("gamma rate must be positive")
        self.kind = "gamma"
        self.shape = float(shape)
        self.rate = float(rate)
        self._log_norm = self.shape * math.log(self.rate) - gammaln(self.shape)
        if self.shape > 1.0:
            mode = (self.shape - 1.0) / self.rate
            self.sup_norm = float(self.pdf(mode))
        else:
            self.sup_norm = self.rate  # exponential: density peaks at 0
        self._check_normalization()

    def pdf(self, x):
        scalar = np.ndim(x) == 0
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(xa)
        pos = xa > 0
        out[pos] = np.exp(
            self._log_norm + (self.shape - 1.0) * np.log(xa[pos]) - self.rate * xa[pos]
        )
        if self.shape == 1.0:
            out[xa == 0] = self.rate
        return float(out[0]) if scalar else out

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        v = gammainc(self.shape, self.rate * np.maximum(xa, 0.0))
        return _scalar_or_array(x, v)

    def quantile(self, p):
        return gammaincinv(self.shape, p) / self.rate

    def support_upper(self) -> float:
        return float(self.quantile(1.0 - _SUPPORT_TAIL))

    def _draw(self, seed, ids, blocks) -> np.ndarray:
        # Marsaglia-Tsang rejection, two uniforms per round; rejecting the
        # round when (1 + c*x)^3 <= 0 keeps the counter usage fixed.
        d = self.shape - 1.0 / 3.0
        cc = 1.0 / math.sqrt(9.0 * d)
        out = np.empty(ids.shape, dtype=float)
        pending = np.arange(ids.size)
        pids = ids.ravel()
        pblocks = blocks.ravel()
        for r in range(_MAX_REJECTION_ROUNDS):
            u1 = _block_uniform(seed, pids, pblocks, 2 * r)
            u2 = _block_uniform(seed, pids, pblocks, 2 * r + 1)
            x = ndtri(u1)
            t = 1.0 + cc * x
            v = t * t * t
            ok = v > 0.0
            squeeze = u2 < 1.0 - 0.0331 * x ** 4
            with np.errstate(divide="ignore", invalid="ignore"):
                slow = np.log(u2) < 0.5 * x * x + d * (1.0 - v + np.log(np.where(ok, v, 1.0)))
            accept = ok & (squeeze | slow)
            if accept.any():
                out[pending[accept]] = d * v[accept] / self.rate
                keep = ~accept
                pending = pending[keep]
                pids = pids[keep]
                pblocks = pblocks[keep]
            if pending.size == 0:
                return out
        raise ValidationError("gamma sampler failed to accept within the round cap")

    def to_config(self) -> dict:
        return {"kind": "gamma", "shape": self.shape, "rate": self.rate}


def solve_support_bound(alpha: float, a: float, c: float) -> float:
    """Smallest A > 0 with A/alpha - c*A^(a+1)/(a+1) = 1 and f >= 0 on [0, A].

    The mass function rises until A* = (1/(alpha*c))^(1/a) and falls after, so
    a valid root exists iff the peak reaches 1; the root is bracketed in
    (alpha, A*] and bisected to 1e-12.
    """
    if alpha <= 0 or a <= 0:
        raise DomainError("alpha and a must be positive")
    if c < 0:
        raise DomainError("c must be nonnegative")
    if c == 0.0:
        return alpha
    a_star = (1.0 / (alpha * c)) ** (1.0 / a)

    def mass(A):
        return A / alpha - c * A ** (a + 1.0) / (a + 1.0)

    peak = mass(a_star)
    if peak < 1.0 - 1e-14:
        raise NoValidSupport(
            "c=%g too large: density turns negative before mass reaches 1" % c
        )
    if peak <= 1.0 + 1e-12:
        # tangent root: bisection is ill conditioned, the peak is the root
        return a_star
    lo, hi = 0.0, a_star
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if mass(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return hi


def default_deficit_coefficient(alpha: float, a: float) -> float:
    """Critical coefficient: the largest c with a valid support bound.

    Gives A = alpha*(a+1)/a with the density hitting zero exactly at A; the
    only coefficient family that is well defined for every (alpha, a).
    """
    if alpha <= 0 or a <= 0:
        raise DomainError("alpha and a must be positive")
    return (1.0 / alpha) * (a / (alpha * (a + 1.0))) ** a


class MonomialDeficitLaw(InitialLaw):
    """Density f(x) = 1/alpha - c*x^a on [0, A], zero beyond.

    A is pinned by unit mass. c = 0 degenerates to the uniform law on
    [0, alpha] (used as the uniform initial condition in tests).
    """

    def __init__(self, alpha: float, a: float, c: float | None = None):
        if alpha <= 0 or a <= 0:
            raise ValidationError("alpha and a must be positive")
        if c is None:
            c = default_deficit_coefficient(alpha, a)
        if c < 0:
            raise ValidationError("c must be nonnegative")
        self.kind = "monomial_deficit"
        self.alpha = float(alpha)
        self.a = float(a)
        self.c = float(c)
        self.A = solve_support_bound(alpha, a, c) if c > 0 else alpha
        self.sup_norm = 1.0 / self.alpha
        self._check_normalization()

    def pdf(self, x):
        xa = np.asarray(x, dtype=float)
        inside = (xa >= 0) & (xa <= self.A)
        v = np.where(inside, 1.0 / self.alpha - self.c * np.power(np.abs(xa), self.a), 0.0)
        v = np.maximum(v, 0.0)  # guards the A-boundary round-off at critical c
        return _scalar_or_array(x, v)

    def cdf(self, x):
        xa = np.clip(np.asarray(x, dtype=float), 0.0, self.A)
        v = xa / self.alpha - self.c * np.power(xa, self.a + 1.0) / (self.a + 1.0)
        v = np.clip(v, 0.0, 1.0)
        return _scalar_or_array(x, v)

    def support_upper(self) -> float:
        return self.A

    def margin_profile(self) -> MarginProfile | None:
        if self.c == 0.0:
            return None
        delta = min(self.A, (1.0 / (self.alpha * self.c)) ** (1.0 / self.a))
        return MonomialMargin(coeff=self.c, exponent=self.a, delta=delta)

    def _draw(self, seed, ids, blocks) -> np.ndarray:
        u = _block_uniform(seed, ids.ravel(), blocks.ravel(), 0)
        # cdf is strictly increasing on [0, A]; bisect it (branch-free).
        lo = np.zeros_like(u)
        hi = np.full_like(u, self.A)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = mid / self.alpha - self.c * mid ** (self.a + 1.0) / (self.a + 1.0) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return (0.5 * (lo + hi)).reshape(ids.shape)

    def to_config(self) -> dict:
        return {
            "kind": "monomial_deficit",
            "alpha": self.alpha,
            "a": self.a,
            "c": self.c,
            "A": self.A,
        }


class TabulatedLaw(InitialLaw):
    """Piecewise-linear density through (grid, values), renormalized to mass 1."""

    def __init__(self, grid, values, renormalize: bool = True):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValidationError("tabulated law needs matching 1-d grid and values")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("tabulated grid must be strictly increasing")
        if grid[0] < 0:
            raise ValidationError("tabulated grid must be nonnegative")
        if np.any(values < 0):
            raise ValidationError("tabulated density values must be nonnegative")
        total = float(np.trapezoid(values, grid))
        if total <= 0:
            raise ValidationError("tabulated density has zero mass")
        if renormalize and abs(total - 1.0) > 1e-12:
            logger.info("renormalizing tabulated density by factor %.8g", 1.0 / total)
            values = values / total
        self.kind = "tabulated"
        self.grid = grid
        self.values = values
        self.sup_norm = float(values.max())
        # node cumulative of the piecewise-linear density (exact)
        seg = np.diff(grid) * 0.5 * (values[:-1] + values[1:])
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        # adaptive quadrature needs the kink locations for narrow tables
        stride = max(1, grid.size // 60)
        self._check_normalization(lower=float(grid[0]), points=grid[1:-1:stride].tolist())

    def pdf(self, x):
        v = np.interp(np.asarray(x, dtype=float), self.grid, self.values, left=0.0, right=0.0)
        return _scalar_or_array(x, v)

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        xc = np.clip(xa, self.grid[0], self.grid[-1])
        idx = np.clip(np.searchsorted(self.grid, xc, side="right") - 1, 0, self.grid.size - 2)
        x0 = self.grid[idx]
        t = xc - x0
        f0 = self.values[idx]
        slope = (self.values[idx + 1] - f0) / (self.grid[idx + 1] - x0)
        v = self._cum[idx] + f0 * t + 0.5 * slope * t * t
        v = np.where(xa < self.grid[0], 0.0, v)
        v = np.where(xa >= self.grid[-1], self._cum[-1], v)
        v = np.clip(v, 0.0, 1.0)
        return _scalar_or_array(x, v)

    def support_upper(self) -> float:
        return float(self.grid[-1])

    def _draw(self, seed, ids, blocks) -> np.ndarray:
        u = _block_uniform(seed, ids.ravel(), blocks.ravel(), 0) * self._cum[-1]
        idx = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self.grid.size - 2)
        x0 = self.grid[idx]
        f0 = self.values[idx]
        width = self.grid[idx + 1] - x0
        slope = (self.values[idx + 1] - f0) / width
        rem = u - self._cum[idx]
        # solve 0.5*slope*t^2 + f0*t = rem on the segment
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.sqrt(np.maximum(f0 * f0 + 2.0 * slope * rem, 0.0))
            t_lin = rem / np.where(f0 > 0, f0, 1.0)
            t_quad = np.where(slope != 0.0, (disc - f0) / np.where(slope != 0.0, slope, 1.0), t_lin)
        t = np.where(np.abs(slope) * width < 1e-14 * np.maximum(f0, 1e-300), t_lin, t_quad)
        t = np.clip(t, 0.0, width)
        return (x0 + t).reshape(ids.shape)

    def to_config(self) -> dict:
        return {"kind": "tabulated", "n_nodes": int(self.grid.size),
                "x_min": float(self.grid[0]), "x_max": float(self.grid[-1])}


def tabulated_from_csv(path) -> TabulatedLaw:
    """Load a two-column (x, f(x)) CSV; renormalizes with a logged factor."""
    xs, fs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, f = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if not xs:  # tolerate a single header line
                    continue
                raise ValidationError("malformed CSV row: %r" % (row,))
            xs.append(x)
            fs.append(f)
    if len(xs) < 2:
        raise ValidationError("tabulated CSV needs at least two rows")
    return TabulatedLaw(np.array(xs), np.array(fs))


def uniform_law(width: float = 1.0) -> MonomialDeficitLaw:
    """Uniform density on [0, width] (degenerate monomial deficit, c = 0)."""
    return MonomialDeficitLaw(alpha=width, a=1.0, c=0.0)
