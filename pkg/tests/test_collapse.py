"""Poisson-like equation for Q and the self-bound profile solver."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmreduce.collapse import (
    MASS_CONSISTENT, PAPER_LITERAL, RESIDUAL_RTOL, coupling, laplacian_q_direct, length_scale,
    poisson_q_residual, profile_grid, radial_force_balance, rescale_profile, residual_norm,
    solve_collapse_profile,
)
from bohmreduce.criticality import diosi_width
from bohmreduce.errors import CollapseDivergenceError, GridError, NoLocalizedSolutionError
from bohmreduce.fields import LINE1D, RADIAL3D, PolarFields, RealField, laplacian_values, make_grid
from bohmreduce.gravity import GravityParams
from bohmreduce.quantum import GaussianPacketSpec, gaussian_amplitude, quantum_potential


def _lumpy(n, half=12.0):
    g = make_grid(RADIAL3D, 0, half, n)
    return RealField(g, np.exp(-g.x**2 / 2) * (1 + 0.2 * np.exp(-(g.x - 1) ** 2)))


def _gaussian_rho(sigma, n=1201):
    g = make_grid(RADIAL3D, 0, 12 * sigma, n)
    return gaussian_amplitude(GaussianPacketSpec(sigma, 1.0), g).rho


@pytest.fixture(scope="module")
def unit_profile():
    return solve_collapse_profile(1.0)


def test_coupling_and_length_scale():
    assert coupling(2.0, MASS_CONSISTENT, 3.0) == 12.0
    assert coupling(2.0, PAPER_LITERAL, 3.0) == 6.0
    assert length_scale(2.0, MASS_CONSISTENT) == pytest.approx(1 / 8)
    assert length_scale(1.0, MASS_CONSISTENT) == diosi_width(1.0)
    with pytest.raises(ValueError):
        coupling(1.0, "other")


def test_direct_laplacian_of_q_agrees_at_second_order():
    errs = []
    for n in (1201, 2401):
        rho = _lumpy(n)
        g = rho.grid
        pf = gaussian_amplitude(GaussianPacketSpec(1.0, 1.0), g)
        pf = PolarFields(RealField(g, np.sqrt(rho.values)), pf.S, pf.valid, pf.hbar)
        composed = laplacian_values(quantum_potential(pf, 1.0).values, g)
        # the log form uses a one-sided gradient at the origin
        sel = (g.x > 0.5) & (g.x < 5)
        errs.append(np.max(np.abs(laplacian_q_direct(rho, 1.0) - composed)[sel]))
    assert errs[0] < 2e-4
    assert errs[0] / errs[1] > 3.0


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0))
@settings(max_examples=20, deadline=None)
def test_residual_is_affine_in_g(G1, G2):
    rho = _gaussian_rho(1.0, 601)
    r1 = poisson_q_residual(rho, 1.3, params=GravityParams(G1)).values
    r2 = poisson_q_residual(rho, 1.3, params=GravityParams(G2)).values
    np.testing.assert_allclose(r2 - r1, -4 * np.pi * (G2 - G1) * 1.3**2 * rho.values, atol=1e-10)


def test_gaussian_is_not_a_solution():
    for sigma in (0.5, 1.329, 2.66):
        rho = _gaussian_rho(sigma)
        res = poisson_q_residual(rho, 1.0)
        scale = 4 * np.pi * rho.values.max()
        assert residual_norm(res, rho) > 100 * RESIDUAL_RTOL * scale


def test_profile_converges_and_is_compact(unit_profile):
    p = unit_profile
    assert p.relative_residual < RESIDUAL_RTOL
    assert p.trace[-1] == p.residual_norm
    assert p.width < 3 * diosi_width(1.0)
    assert np.all(np.diff(p.rho.values) <= 1e-14)
    assert p.energy < 0


def test_radial_force_balance(unit_profile):
    fb = radial_force_balance(unit_profile, 1.0)
    r = unit_profile.grid.x
    sel = (r > 0.2) & (r < 10)
    assert np.max(np.abs(fb[sel])) < 1e-6


def test_mass_rescaling(unit_profile):
    heavy = solve_collapse_profile(2.0)
    mapped = rescale_profile(unit_profile, 8.0, heavy.grid)
    err = np.max(np.abs(mapped.values - heavy.rho.values)) / heavy.rho.values.max()
    assert err < 1e-6
    assert heavy.width / unit_profile.width == pytest.approx(1 / 8, rel=1e-6)


def test_conventions_scale_differently():
    slopes = {}
    for conv in (MASS_CONSISTENT, PAPER_LITERAL):
        w = [solve_collapse_profile(m, conv).width for m in (1.0, 2.0)]
        slopes[conv] = np.log2(w[1] / w[0])
    assert slopes[MASS_CONSISTENT] == pytest.approx(-3.0, abs=0.05)
    assert slopes[PAPER_LITERAL] == pytest.approx(-2.0, abs=0.05)


def test_refinement_is_second_order():
    widths = [solve_collapse_profile(1.0, grid=profile_grid(1.0, n=n)).width
              for n in (1001, 2001, 4001)]
    ratio = (widths[0] - widths[1]) / (widths[1] - widths[2])
    assert 3.0 < ratio < 5.0


def test_no_gravity_has_no_localized_solution():
    with pytest.raises(NoLocalizedSolutionError) as info:
        solve_collapse_profile(1.0, params=GravityParams(G=0.0))
    assert info.value.diagnostics["outer_half_mass"] > 0.1


def test_sweep_budget_exhaustion_reports_trace():
    with pytest.raises(CollapseDivergenceError) as info:
        solve_collapse_profile(1.0, max_sweeps=5)
    assert len(info.value.diagnostics["trace"]) == 5


def test_input_contract():
    g = make_grid(RADIAL3D, 0, 10, 201)
    vals = np.exp(-g.x**2)
    vals[50] = 0.0
    rho = RealField(g, vals)
    with pytest.raises(ValueError):
        poisson_q_residual(rho, 1.0)
    with pytest.raises(ValueError):
        laplacian_q_direct(rho, 1.0)
    with pytest.raises(GridError):
        solve_collapse_profile(1.0, grid=make_grid(LINE1D, -10, 10, 201))
    with pytest.raises(ValueError):
        solve_collapse_profile(1.0, mixing=0.0)
