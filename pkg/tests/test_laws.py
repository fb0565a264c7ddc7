"""Initial laws: densities, cdfs, sampling, margin profiles, support bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from stefan_euler.errors import NoValidSupport, ValidationError
from stefan_euler.laws import (
    ConstantMargin,
    GammaLaw,
    MonomialDeficitLaw,
    MonomialMargin,
    TabulatedLaw,
    TabulatedMargin,
    default_deficit_coefficient,
    solve_support_bound,
    tabulated_from_csv,
    uniform_law,
)
from stefan_euler.rng import RandomStream


# ---------------------------------------------------------------------------
# gamma


def test_gamma_pdf_known_value(gamma_law):
    # shape 3/2, rate 1/2: f(x) = sqrt(x/2) e^{-x/2} / sqrt(2 pi) ... evaluated at 1
    expect = math.sqrt(0.5) * math.exp(-0.5) / math.gamma(1.5) * 0.5
    assert abs(gamma_law.pdf(1.0) - expect) < 1e-14
    assert gamma_law.pdf(-1.0) == 0.0
    assert gamma_law.pdf(0.0) == 0.0


def test_gamma_mean_and_mass(gamma_law):
    total = quad(gamma_law.pdf, 0, gamma_law.support_upper(), limit=200)[0]
    assert abs(total - 1.0) < 1e-8
    mean = quad(lambda x: x * gamma_law.pdf(x), 0, gamma_law.support_upper(), limit=200)[0]
    assert abs(mean - 3.0) < 1e-6


def test_gamma_cdf_quantile_roundtrip(gamma_law):
    for p in [0.01, 0.25, 0.5, 0.9, 0.999]:
        x = gamma_law.quantile(p)
        assert abs(gamma_law.cdf(x) - p) < 1e-10


def test_gamma_sup_norm_at_mode(gamma_law):
    # mode of gamma(3/2, 1/2) at (shape-1)/rate = 1
    xs = np.linspace(1e-6, 20, 20001)
    assert abs(gamma_law.sup_norm - gamma_law.pdf(xs).max()) < 1e-6
    assert abs(gamma_law.sup_norm - gamma_law.pdf(1.0)) < 1e-14


def test_gamma_shape_below_one_rejected():
    with pytest.raises(ValidationError):
        GammaLaw(shape=0.5, rate=1.0)
    with pytest.raises(ValidationError):
        GammaLaw(shape=1.5, rate=0.0)


def test_gamma_sampling_mean():
    law = GammaLaw(shape=1.5, rate=0.5)
    draws = law.sample_keyed(2024, np.arange(10**6))
    assert abs(draws.mean() - 3.0) < 0.01
    assert draws.min() >= 0.0


def test_gamma_sampling_kolmogorov(gamma_law):
    draws = np.sort(gamma_law.sample_keyed(7, np.arange(10**5)))
    emp = (np.arange(draws.size) + 1) / draws.size
    ks = np.max(np.abs(gamma_law.cdf(draws) - emp))
    assert ks < 0.01


def test_sampling_deterministic(gamma_law):
    s = RandomStream(seed=5, stream_id=2)
    a = gamma_law.sample(s), gamma_law.sample(s)
    s2 = RandomStream(seed=5, stream_id=2)
    b = gamma_law.sample(s2), gamma_law.sample(s2)
    assert a == b
    assert a[0] != a[1]


# ---------------------------------------------------------------------------
# support bound and monomial deficit laws


def test_support_bound_examples():
    assert abs(solve_support_bound(1.0, 1.0, 0.1) - 1.0557280900008412) < 1e-10
    assert solve_support_bound(1.0, 1.0, 0.0) == 1.0
    with pytest.raises(NoValidSupport):
        solve_support_bound(1.0, 1.0, 10.0)


def test_support_bound_mass_identity():
    for alpha, a, c in [(1.0, 1.0, 0.1), (0.5, 2.0, 0.3), (1.3, 1.0, 0.2)]:
        A = solve_support_bound(alpha, a, c)
        assert abs(A / alpha - c * A ** (a + 1) / (a + 1) - 1.0) < 1e-12


def test_critical_coefficient_closed_support():
    # at the critical c the support bound is exactly alpha*(a+1)/a
    for alpha, a in [(1.0, 1.0), (1.0, 2.0), (0.5, 1.0), (1.0, 4.0)]:
        c = default_deficit_coefficient(alpha, a)
        law = MonomialDeficitLaw(alpha=alpha, a=a)
        assert law.c == c
        assert abs(law.A - alpha * (a + 1) / a) < 1e-12
    assert MonomialDeficitLaw(alpha=1.0, a=1.0).A == 2.0


def test_monomial_pdf_exact_form():
    law = MonomialDeficitLaw(alpha=1.0, a=2.0, c=0.05)
    xs = np.linspace(0, law.A, 100)
    assert np.allclose(law.pdf(xs), 1.0 - 0.05 * xs**2, atol=1e-15)
    assert law.pdf(law.A + 0.1) == 0.0


def test_monomial_margin_profile():
    law = MonomialDeficitLaw(alpha=1.0, a=2.0, c=0.05)
    prof = law.margin_profile()
    assert prof.coeff == 0.05 and prof.exponent == 2.0
    # delta = min(A, (1/(alpha c))^{1/a}); here the deficit zero sits beyond A
    assert abs(prof.delta - min(law.A, (1 / 0.05) ** 0.5)) < 1e-12
    assert uniform_law(1.0).margin_profile() is None


def test_monomial_quantile_sampling():
    law = MonomialDeficitLaw(alpha=1.0, a=1.0, c=0.3)
    draws = np.sort(law.sample_keyed(11, np.arange(10**5)))
    emp = (np.arange(draws.size) + 1) / draws.size
    ks = np.max(np.abs(law.cdf(draws) - emp))
    assert ks < 0.01


def test_uniform_law_degenerate():
    law = uniform_law(2.0)
    assert law.A == 2.0
    assert law.c == 0.0
    assert abs(law.pdf(1.0) - 0.5) < 1e-15
    assert abs(law.cdf(2.0) - 1.0) < 1e-15


def test_gamma_margin_profile_none(gamma_law):
    assert gamma_law.margin_profile() is None


# ---------------------------------------------------------------------------
# tabulated laws


def test_tabulated_law_renormalizes(caplog):
    import logging

    grid = np.array([0.0, 1.0, 2.0])
    values = np.array([2.0, 4.0, 2.0])  # trapezoid mass 6, gets scaled to 1
    with caplog.at_level(logging.INFO):
        law = TabulatedLaw(grid, values)
    total = quad(law.pdf, 0, 2, limit=100)[0]
    assert abs(total - 1.0) < 1e-10
    assert any("renormaliz" in rec.message for rec in caplog.records)


def test_tabulated_law_cdf_and_sampling():
    grid = np.array([0.0, 0.5, 1.0, 2.0])
    values = np.array([1.0, 2.0, 0.5, 0.5])
    law = TabulatedLaw(grid, values)
    assert abs(law.cdf(2.0) - 1.0) < 1e-12
    assert law.cdf(0.0) == 0.0
    # cdf is the antiderivative of pdf on random intervals
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = np.sort(rng.uniform(0, 2, 2))
        piece = quad(law.pdf, a, b, limit=100)[0]
        assert abs(law.cdf(b) - law.cdf(a) - piece) < 1e-8
    draws = np.sort(law.sample_keyed(3, np.arange(10**5)))
    emp = (np.arange(draws.size) + 1) / draws.size
    assert np.max(np.abs(law.cdf(draws) - emp)) < 0.01


def test_tabulated_from_csv(tmp_path):
    path = tmp_path / "law.csv"
    path.write_text("x,f\n0.0,1.0\n1.0,1.0\n")
    law = tabulated_from_csv(path)
    assert abs(law.pdf(0.5) - 1.0) < 1e-12
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n0.0\n")
    with pytest.raises(ValidationError):
        tabulated_from_csv(bad)


def test_tabulated_rejects_negative_density():
    with pytest.raises(ValidationError):
        TabulatedLaw(np.array([0.0, 1.0]), np.array([1.0, -0.5]))


# ---------------------------------------------------------------------------
# margin profiles


def test_margin_validation_against_alpha():
    prof = ConstantMargin(psi0_value=0.4, delta=1.0)
    prof.validate_for_alpha(2.0)  # 0.4 <= 1/2 is fine
    with pytest.raises(ValidationError):
        prof.validate_for_alpha(3.0)  # 0.4 > 1/3 leaves no room for a density
    with pytest.raises(ValidationError):
        ConstantMargin(psi0_value=1.5, delta=1.0).validate_for_alpha(1.0)


def test_tabulated_margin_requires_increasing_values():
    with pytest.raises(ValidationError):
        TabulatedMargin(np.array([0.5, 1.0]), np.array([0.2, 0.1]))
    prof = TabulatedMargin(np.array([0.5, 1.0]), np.array([0.1, 0.2]))
    assert prof.delta == 1.0
    assert prof.psi0() == 0.1


@given(
    alpha=st.floats(min_value=0.2, max_value=3.0),
    a=st.floats(min_value=0.5, max_value=4.0),
)
@settings(max_examples=50, deadline=None)
def test_critical_c_is_boundary_of_validity(alpha, a):
    c = default_deficit_coefficient(alpha, a)
    MonomialDeficitLaw(alpha=alpha, a=a, c=c)  # must construct
    with pytest.raises(NoValidSupport):
        solve_support_bound(alpha, a, c * 1.05)
