"""Deterministic density-evolution engine: oracle values, mass bookkeeping,
refinement behavior, failure reporting."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr

from stefan_euler.errors import InvalidGrid
from stefan_euler.grid import (
    SurvivorDensity,
    convolve_step,
    initial_survivor_density,
    one_step_oracle,
    run_grid_scheme,
)
from stefan_euler.laws import GammaLaw, TabulatedLaw, uniform_law
from stefan_euler.particle import run_particle_scheme

# quadrature of Phi(-x/sqrt(0.01)) over [0,1], frozen before the engine build
UNIFORM_TWO_STEP = 0.03989422804014327


def test_one_step_oracle_frozen_value(unit_uniform_law):
    val = one_step_oracle(unit_uniform_law, 1.0, 0.01)
    assert abs(val - UNIFORM_TWO_STEP) < 1e-12


def test_one_step_oracle_vanishes_with_dt(unit_uniform_law):
    assert one_step_oracle(unit_uniform_law, 1.0, 1e-10) < 1e-5
    far = TabulatedLaw(np.array([5.0, 5.5, 6.0]), np.array([1.0, 2.0, 1.0]))
    assert one_step_oracle(far, 1.0, 0.01) < 1e-10


def test_two_step_loss_matches_oracle(unit_uniform_law):
    curve = run_grid_scheme(unit_uniform_law, 1.0, 0.01, 0.02)
    # cell averaging leaves summation dust; no real loss before any increment
    assert curve.values[1] < 1e-12
    assert abs(curve.values[2] - UNIFORM_TWO_STEP) < 1e-4


def test_convolve_preserves_far_mass():
    # narrow bump at 10: nothing can reach the absorbing boundary
    h = 0.01
    density = SurvivorDensity(
        h=h, origin=10.0, values=np.full(10, 10.0)  # mass 1 on [10, 10.1]
    )
    out = convolve_step(density, 0.01, 0.0)
    assert abs(out.mass - density.mass) < 1e-10


def test_convolve_uniform_absorption(unit_uniform_law):
    h = 0.001
    density, _ = initial_survivor_density(unit_uniform_law, h, x_max=1.0)
    out = convolve_step(density, 0.01, 0.0)
    lost = density.mass - out.mass
    expect = quad(lambda x: ndtr(-x / 0.1), 0, 1, limit=200)[0]
    assert abs(lost - expect) < 1e-6


def test_convolve_shift_kills_everything():
    h = 0.01
    density = SurvivorDensity(h=h, origin=5.0, values=np.full(10, 10.0))
    out = convolve_step(density, 1e-8, 6.0)
    assert out.mass < 1e-12


def test_mass_bookkeeping_matches_engine(unit_uniform_law):
    # replay the engine recursion by hand; the curve must agree exactly
    from stefan_euler.grid import _convolve_shift, gaussian_kernel

    alpha, dt, horizon = 1.0, 0.01, 0.05
    h = math.sqrt(dt) / 20.0
    curve = run_grid_scheme(unit_uniform_law, alpha, dt, horizon, h=h)
    x_max = unit_uniform_law.support_upper() + 6.0 * math.sqrt(horizon)
    density, far = initial_survivor_density(unit_uniform_law, h, x_max)
    kernel = gaussian_kernel(dt, h)
    p = density.values
    mass = min(density.mass + far, 1.0)
    values = [alpha * float(unit_uniform_law.cdf(0.0))]
    values.append(max(alpha * (1.0 - mass), values[0]))
    for n in range(1, 5):
        shift_cells = (values[n] - values[n - 1]) / h
        p, _, spilled = _convolve_shift(p, kernel, shift_cells)
        p = np.maximum(p, 0.0)
        far += spilled
        new_mass = min(float(h * p.sum()) + far, mass)
        values.append(values[n] + alpha * (mass - new_mass))
        mass = new_mass
    assert np.array_equal(curve.values, np.array(values))


def test_loss_increments_equal_alpha_mass_drops(tmp_path, unit_uniform_law):
    # with per-step snapshots, alpha * (mass drop) must equal each increment
    snap = tmp_path / "p.csv"
    curve = run_grid_scheme(
        unit_uniform_law, 1.0, 0.01, 0.05, snapshot_every=1, snapshot_path=snap
    )
    rows = np.loadtxt(snap, delimiter=",", skiprows=1)
    times = np.unique(rows[:, 0])
    masses = []
    for t in times:
        block = rows[rows[:, 0] == t]
        masses.append(np.sum(block[:, 2]) * (block[1, 1] - block[0, 1]))
    assert all(b <= a + 1e-12 for a, b in zip(masses, masses[1:]))


def test_far_support_stays_zero():
    law = TabulatedLaw(np.array([5.0, 5.5, 6.0]), np.array([1.0, 2.0, 1.0]))
    curve = run_grid_scheme(law, 1.0, 0.001, 0.01)
    assert np.all(curve.values <= 1e-10)


def test_agreement_with_particle_engine(gamma_law):
    alpha, n = 1.3, 100
    dt = 0.8 / n
    grid = run_grid_scheme(gamma_law, alpha, dt, 0.8)
    particle = run_particle_scheme(gamma_law, alpha, dt, 0.8, 10**6, seed=20240817)
    gap = np.max(np.abs(grid.values - particle.values))
    p = grid.values[-1] / alpha
    se = alpha * math.sqrt(p * (1 - p) / 10**6)
    assert gap <= 5 * se


def test_mesh_refinement_monotone(gamma_law):
    alpha, dt = 1.3, 0.8 / 25
    h = math.sqrt(dt / 2) / 20
    coarse = run_grid_scheme(gamma_law, alpha, dt, 0.8, h=h)
    fine = run_grid_scheme(gamma_law, alpha, dt / 2, 0.8, h=h)
    tol = 10 * (h + 1e-12)
    assert np.all(coarse.values <= fine.values[::2] + tol)


def test_h_refinement_self_consistent(gamma_law):
    dt = 0.8 / 50
    h0 = math.sqrt(dt) / 10
    finals = [
        run_grid_scheme(gamma_law, 1.3, dt, 0.8, h=h).values[-1]
        for h in (h0, h0 / 2, h0 / 4)
    ]
    d1 = abs(finals[0] - finals[1])
    d2 = abs(finals[1] - finals[2])
    assert d2 <= 0.5 * d1


def test_small_domain_reports_invalid_grid(unit_uniform_law):
    with pytest.raises(InvalidGrid):
        run_grid_scheme(unit_uniform_law, 1.0, 0.01, 0.1, x_max=1.05)


def test_snapshot_format(tmp_path, unit_uniform_law):
    snap = tmp_path / "snap.csv"
    run_grid_scheme(
        unit_uniform_law, 1.0, 0.01, 0.03, snapshot_every=1, snapshot_path=snap
    )
    header = snap.read_text().splitlines()[0]
    assert header == "t,x,p"


def test_initial_density_cell_averages(unit_uniform_law):
    h = 0.1
    density, far = initial_survivor_density(unit_uniform_law, h, x_max=1.0)
    assert density.origin == h / 2
    assert np.allclose(density.values, 1.0)
    assert abs(density.mass - 1.0) < 1e-12
    assert far == 0.0


def test_gamma_initial_density_far_tail(gamma_law):
    h = 0.05
    x_max = gamma_law.support_upper()
    density, far = initial_survivor_density(gamma_law, h, x_max)
    assert abs(density.mass - gamma_law.cdf(x_max)) < 1e-9
    assert abs(density.mass + far - 1.0) < 1e-12
