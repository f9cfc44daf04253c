"""Grids, stencils, units and polar decomposition."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmreduce.errors import GridError, PhaseUndefinedError
from bohmreduce.fields import (
    ENERGY, LENGTH, LINE1D, RADIAL3D, TIME, ComplexField, RealField, UnitSystem,
    gradient, laplacian, make_grid, polar_decompose,
)


def test_make_grid_spacing():
    assert make_grid(LINE1D, -10, 10, 201).h == pytest.approx(0.1, abs=1e-15)
    assert make_grid(RADIAL3D, 0, 20, 401).h == pytest.approx(0.05, abs=1e-15)


@pytest.mark.parametrize("args", [
    (LINE1D, 0, 1, 8),
    (RADIAL3D, -1, 1, 101),
    (LINE1D, 1, 0, 101),
    ("cartesian3d", 0, 1, 101),
])
def test_make_grid_rejects(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_symmetric_line_grid_is_antisymmetric():
    x = make_grid(LINE1D, -7, 7, 1001).x
    assert np.array_equal(x, -x[::-1])


def test_gradient_of_linear_and_quadratic():
    g = make_grid(LINE1D, -2, 3, 101)
    np.testing.assert_allclose(gradient(RealField(g, 3 * g.x)).values, 3.0, atol=1e-12)
    # second-order stencils are exact on quadratics, ends included
    np.testing.assert_allclose(gradient(RealField(g, g.x**2)).values, 2 * g.x, atol=1e-11)


def _gaussian_errors(n):
    g = make_grid(LINE1D, -8, 8, n)
    f = RealField(g, np.exp(-g.x**2 / 2))
    d1 = np.max(np.abs(gradient(f).values + g.x * f.values))
    d2 = np.max(np.abs(laplacian(f).values - (g.x**2 - 1) * f.values))
    return d1, d2


def _radial_error(n):
    g = make_grid(RADIAL3D, 0, 8, n)
    f = np.exp(-g.x**2 / 2)
    exact = (g.x**2 - 3) * f
    return np.max(np.abs(laplacian(RealField(g, f)).values - exact))


def test_gradient_and_laplacian_second_order():
    (a1, a2), (b1, b2) = _gaussian_errors(201), _gaussian_errors(401)
    assert a1 / b1 == pytest.approx(4.0, abs=0.5)
    assert a2 / b2 == pytest.approx(4.0, abs=0.5)
    assert _radial_error(201) / _radial_error(401) == pytest.approx(4.0, abs=0.5)


def test_laplacian_exact_cases():
    g = make_grid(LINE1D, -1, 1, 51)
    np.testing.assert_allclose(laplacian(RealField(g, g.x**2)).values, 2.0, atol=1e-9)
    r = make_grid(RADIAL3D, 0, 2, 51)
    np.testing.assert_allclose(laplacian(RealField(r, r.x**2)).values, 6.0, atol=1e-9)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_stencils_are_linear(a, b, seed):
    g = make_grid(LINE1D, 0, 1, 64)
    rng = np.random.default_rng(seed)
    f, h = rng.standard_normal(g.n), rng.standard_normal(g.n)
    lhs = gradient(RealField(g, a * f + b * h)).values
    rhs = a * gradient(RealField(g, f)).values + b * gradient(RealField(g, h)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-13 * (1 + np.abs(rhs).max()) * g.n)


def test_laplacian_symmetric_by_parts():
    errs = []
    for n in (201, 401):
        g = make_grid(LINE1D, -10, 10, n)
        f = np.exp(-g.x**2 / 2)
        h = g.x * np.exp(-(g.x - 1) ** 2)
        lf, lh = laplacian(RealField(g, f)).values, laplacian(RealField(g, h)).values
        errs.append(abs(g.integrate(f * lh) - g.integrate(lf * h)))
    assert errs[1] <= errs[0] / 3 or errs[1] < 1e-12


def test_fields_are_immutable_and_finite():
    g = make_grid(LINE1D, 0, 1, 32)
    f = RealField(g, np.zeros(g.n))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        RealField(g, np.full(g.n, np.nan))
    with pytest.raises(ValueError):
        RealField(g, np.zeros(g.n + 1))


def test_complex_normalization():
    for geom, lo in ((LINE1D, -10), (RADIAL3D, 0)):
        g = make_grid(geom, lo, 10, 401)
        psi = ComplexField.normalized_from(g, np.exp(-g.x**2) * (1 + 0.5j))
        assert psi.norm() == pytest.approx(1.0, abs=1e-10)


def test_polar_plane_wave():
    g = make_grid(LINE1D, -5, 5, 501)
    k, hbar = 2.3, 1.7
    pf = polar_decompose(ComplexField(g, np.exp(1j * k * g.x)), hbar=hbar)
    np.testing.assert_allclose(pf.R.values, 1.0, atol=1e-14)
    S = pf.S.values - pf.S.values[0]
    np.testing.assert_allclose(S, hbar * k * (g.x - g.x[0]), atol=1e-9)


def test_polar_real_gaussian_has_zero_phase():
    g = make_grid(LINE1D, -10, 10, 401)
    pf = polar_decompose(ComplexField.normalized_from(g, np.exp(-g.x**2 / 4)))
    np.testing.assert_array_equal(pf.S.values, 0.0)
    assert pf.rho.integral() == pytest.approx(1.0, abs=1e-10)


@given(st.floats(-4, 4), st.floats(0.5, 2.0))
@settings(max_examples=25, deadline=None)
def test_polar_round_trip(k, sigma):
    g = make_grid(LINE1D, -6, 6, 601)
    psi = ComplexField.normalized_from(g, np.exp(-g.x**2 / (4 * sigma**2) + 1j * k * g.x))
    pf = polar_decompose(psi)
    back = pf.recompose().values
    v = pf.valid
    np.testing.assert_allclose(back[v], psi.values[v], rtol=1e-10, atol=1e-14)


def test_polar_rejects_mostly_empty_wavefunction():
    g = make_grid(LINE1D, -100, 100, 2001)
    psi = ComplexField.normalized_from(g, np.exp(-g.x**2 / 2))
    with pytest.raises(PhaseUndefinedError):
        polar_decompose(psi)


def test_polar_extrapolated_points_flagged():
    g = make_grid(LINE1D, -12, 12, 1201)
    psi = ComplexField.normalized_from(g, np.exp(-g.x**2 / 4 + 0.5j * g.x))
    pf = polar_decompose(psi)
    flagged = pf.S.meta["extrapolated"]
    assert flagged.any() and not flagged[g.n // 2]
    np.testing.assert_array_equal(flagged, ~pf.valid)


@given(st.floats(1e-40, 1e40), st.sampled_from([LENGTH, TIME, ENERGY]),
       st.floats(1e-30, 1e10))
@settings(max_examples=50, deadline=None)
def test_unit_conversion_is_an_involution(value, dims, mass_unit):
    u = UnitSystem.natural(mass_unit)
    assert u.to_si(u.from_si(value, dims), dims) == pytest.approx(value, rel=1e-14)


def test_natural_length_unit_is_diosi_width():
    si = UnitSystem.si()
    m = 1e-15
    u = UnitSystem.natural(m)
    assert u.length_unit == pytest.approx(si.hbar**2 / (si.G * m**3), rel=1e-14)
    assert u.hbar == 1.0 and u.G == 1.0
