"""Poisson-like equation for the quantum potential of a self-bound profile.

Taking the divergence of grad Q = m grad phi with phi = +G m V and
lap V = -4 pi rho gives

    lap Q = -4 pi G m^k rho,       Q = -(hbar^2 / 2m) lap(sqrt rho) / sqrt rho,

with k = 2 (``mass_consistent``) or k = 1 (``paper_literal``, the coupling
G m). Every bounded solution has Q = g V + E with g = G m^k, so the
profile is the ground state of -(hbar^2 / 2m) lap R - g V[R^2] R = E R.
The solver relaxes that fixed point on a radial grid: a tridiagonal
Poisson solve for V, the lowest tridiagonal eigenvector for R, damped
mixing of rho. All stencils coincide with those of ``fields.laplacian``,
so the discrete residual vanishes at the fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import CollapseDivergenceError, GridError, NoLocalizedSolutionError
from .fields import RADIAL3D, Grid, PolarFields, RealField, gradient, laplacian_values, make_grid
from .gravity import GravityParams
from .quantum import quantum_potential

MASS_CONSISTENT = "mass_consistent"
PAPER_LITERAL = "paper_literal"
CONVENTION_POWER = {MASS_CONSISTENT: 2, PAPER_LITERAL: 1}

RESIDUAL_RTOL = 1e-6
MAX_SWEEPS = 10_000
DIVERGENCE_PATIENCE = 50
# a localized profile leaves less than this mass in the outer half of the grid
LOCALIZATION_THRESHOLD = 1e-6


def coupling(m: float, convention: str, G: float = 1.0) -> float:
    if convention not in CONVENTION_POWER:
        raise ValueError(f"convention must be one of {tuple(CONVENTION_POWER)}, got {convention!r}")
    return G * m ** CONVENTION_POWER[convention]


def length_scale(m: float, convention: str, G: float = 1.0, hbar: float = 1.0) -> float:
    """hbar^2 / (m g), the natural width of solutions."""
    return hbar**2 / (m * coupling(m, convention, G))


def _q_of_rho(rho: RealField, m: float, hbar: float) -> RealField:
    R = np.sqrt(np.clip(rho.values, 0.0, None))
    pf = PolarFields(RealField(rho.grid, R), RealField(rho.grid, np.zeros(rho.grid.n)),
                     np.ones(rho.grid.n, dtype=bool), hbar)
    return quantum_potential(pf, m, min_valid_fraction=0.0)


def _check_positive(rho: RealField) -> None:
    if np.any(rho.values[1:-1] <= 0):
        raise ValueError("rho must be strictly positive on the grid interior")


def poisson_q_residual(rho: RealField, m: float, convention: str = MASS_CONSISTENT,
                       params: GravityParams = GravityParams(), hbar: float = 1.0) -> RealField:
    """-lap Q[rho] - 4 pi G m^k rho; zero for a self-bound profile."""
    _check_positive(rho)
    Q = _q_of_rho(rho, m, hbar)
    lapQ = laplacian_values(Q.values, rho.grid)
    res = -lapQ - 4.0 * np.pi * coupling(m, convention, params.G) * rho.values
    return RealField(rho.grid, res, {"convention": convention, "extrapolated": Q.meta["extrapolated"]})


def laplacian_q_direct(rho: RealField, m: float, hbar: float = 1.0) -> np.ndarray:
    """lap Q through the log-amplitude form, an independent route to lap Q.

    With L = ln sqrt(rho), lap R / R = lap L + |grad L|^2, hence
    lap Q = -(hbar^2 / 2m) [lap lap L + lap |grad L|^2].
    """
    _check_positive(rho)
    grid = rho.grid
    vals = np.clip(rho.values, np.finfo(float).tiny, None)
    L = 0.5 * np.log(vals)
    dL = np.gradient(L, grid.h, edge_order=2)
    inner = laplacian_values(L, grid) + dL**2
    return -(hbar**2) / (2.0 * m) * laplacian_values(inner, grid)


def residual_norm(res: RealField, rho: RealField) -> float:
    """(int rho res^2 dmu)^(1/2)."""
    return math.sqrt(max(rho.grid.integrate(rho.values * res.values**2), 0.0))


@dataclass
class CollapseProfile:
    grid: Grid
    rho: RealField
    Q: RealField
    residual: RealField
    residual_norm: float
    source_scale: float
    convention: str
    energy: float
    sweeps: int
    trace: list = field(default_factory=list)

    @property
    def relative_residual(self) -> float:
        return self.residual_norm / self.source_scale

    @property
    def width(self) -> float:
        """Per-axis rms width sqrt(<r^2> / 3)."""
        r = self.grid.x
        return math.sqrt(self.grid.integrate(r**2 * self.rho.values) / 3.0)


def profile_grid(m: float, convention: str = MASS_CONSISTENT, params: GravityParams = GravityParams(),
                 hbar: float = 1.0, extent: float = 40.0, n: int = 2001) -> Grid:
    return make_grid(RADIAL3D, 0.0, extent * length_scale(m, convention, params.G, hbar), n)


class _Relaxation:
    def __init__(self, grid: Grid, m: float, g: float, hbar: float):
        self.grid, self.m, self.g = grid, m, g
        self.r = grid.x
        self.h = grid.h
        self.c = hbar**2 / (2.0 * m)
        N = grid.n - 2
        self.poisson_ab = np.zeros((3, N))
        self.poisson_ab[0, 1:] = 1.0
        self.poisson_ab[1, :] = -2.0
        self.poisson_ab[2, :-1] = 1.0

    def potential(self, rho: np.ndarray) -> np.ndarray:
        """V with lap V = -4 pi rho in the grid's own stencils, V = M/r at the edge."""
        r, h = self.r, self.h
        mass = self.grid.integrate(rho)
        b = -4.0 * np.pi * h**2 * r[1:-1] * rho[1:-1]
        b[-1] -= mass
        w = solve_banded((1, 1), self.poisson_ab, b)
        V = np.empty_like(r)
        V[1:-1] = w / r[1:-1]
        V[-1] = mass / r[-1]
        V[0] = V[1] + 4.0 * np.pi * rho[0] * h**2 / 6.0
        return V

    def ground_state(self, V: np.ndarray):
        c, h, g = self.c, self.h, self.g
        d = 2.0 * c / h**2 - g * V[1:-1]
        e = np.full(d.size - 1, -c / h**2)
        E, vec = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
        E = float(E[0])
        u = np.abs(vec[:, 0])
        R = np.zeros_like(self.r)
        R[1:-1] = u / self.r[1:-1]
        # origin value consistent with the regular-origin Laplacian stencil
        k = 6.0 * c / h**2
        R[0] = k * R[1] / (k - E - g * V[0])
        rho = R**2
        return E, rho / self.grid.integrate(rho)


def solve_collapse_profile(m: float = 1.0, convention: str = MASS_CONSISTENT,
                           initial_sigma_guess: float | None = None,
                           params: GravityParams = GravityParams(), hbar: float = 1.0,
                           grid: Grid | None = None, mixing: float = 0.5,
                           rtol: float = RESIDUAL_RTOL, max_sweeps: int = MAX_SWEEPS,
                           patience: int = DIVERGENCE_PATIENCE) -> CollapseProfile:
    """Relax a Gaussian guess to a self-bound radial profile.

    Converged when the rho-weighted residual norm drops below
    rtol * 4 pi G m^k max(rho). Raises CollapseDivergenceError after
    ``patience`` consecutive increases of the residual norm and
    NoLocalizedSolutionError when the result is not localized (G = 0).
    """
    g = coupling(m, convention, params.G)
    if grid is None:
        if g > 0:
            grid = profile_grid(m, convention, params, hbar)
        else:
            sigma = initial_sigma_guess or 1.0
            grid = make_grid(RADIAL3D, 0.0, 40.0 * sigma, 2001)
    if grid.geometry != RADIAL3D:
        raise GridError("collapse profiles are solved on radial3d grids")
    if not 0 < mixing <= 1:
        raise ValueError("mixing must lie in (0, 1]")
    sigma0 = initial_sigma_guess or (length_scale(m, convention, params.G, hbar) if g > 0 else 1.0)
    r = grid.x
    rho = np.exp(-(r**2) / (2.0 * sigma0**2))
    rho /= grid.integrate(rho)

    relax = _Relaxation(grid, m, g, hbar)
    trace = []
    increases = 0
    for sweep in range(1, max_sweeps + 1):
        E, rho_out = relax.ground_state(relax.potential(rho))
        rho_field = RealField(grid, rho_out)
        scale = 4.0 * np.pi * g * float(rho_out.max())
        res = poisson_q_residual(rho_field, m, convention, params, hbar)
        norm = residual_norm(res, rho_field)
        trace.append(norm)
        if g > 0 and norm < rtol * scale:
            return CollapseProfile(grid, rho_field, _q_of_rho(rho_field, m, hbar), res, norm, scale,
                                   convention, E, sweep, trace)
        if g == 0:
            outer = grid.integrate(np.where(r > 0.5 * r[-1], rho_out, 0.0))
            raise NoLocalizedSolutionError(
                "without gravity the lowest mode fills the box; no localized profile exists",
                {"outer_half_mass": outer, "energy": E, "sweeps": sweep},
            )
        increases = increases + 1 if len(trace) > 1 and norm > trace[-2] else 0
        if increases >= patience:
            raise CollapseDivergenceError(
                f"residual norm grew for {patience} consecutive sweeps",
                {"trace": trace[-patience - 1:], "sweeps": sweep},
            )
        rho = (1.0 - mixing) * rho + mixing * rho_out
    outer = grid.integrate(np.where(r > 0.5 * r[-1], rho, 0.0))
    if outer > LOCALIZATION_THRESHOLD:
        raise NoLocalizedSolutionError("profile did not localize on the grid",
                                       {"outer_half_mass": outer, "trace": trace[-10:]})
    raise CollapseDivergenceError(f"no convergence in {max_sweeps} sweeps",
                                  {"trace": trace[-10:], "sweeps": max_sweeps})


def rescale_profile(profile: CollapseProfile, lam: float, grid: Grid | None = None) -> RealField:
    """lam^3 rho(lam r) sampled on ``grid`` (default: the profile grid scaled by 1/lam)."""
    grid = grid or make_grid(RADIAL3D, 0.0, profile.grid.x_max / lam, profile.grid.n)
    vals = lam**3 * np.interp(lam * grid.x, profile.grid.x, profile.rho.values, right=0.0)
    return RealField(grid, vals)


def radial_force_balance(profile: CollapseProfile, m: float, params: GravityParams = GravityParams(),
                         hbar: float = 1.0) -> np.ndarray:
    """dQ/dr - g dV/dr, which vanishes for a converged profile."""
    relax = _Relaxation(profile.grid, m, coupling(m, profile.convention, params.G), hbar)
    V = relax.potential(profile.rho.values)
    return gradient(profile.Q).values - relax.g * gradient(RealField(profile.grid, V)).values
