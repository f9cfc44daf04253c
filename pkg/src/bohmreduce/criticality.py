"""Energy of a Gaussian packet versus width, the critical width and body-size scaling.

E(sigma) = <Q> + <U_g> for the stationary Gaussian. On radial grids whose
extent and spacing scale with sigma the discrete energies are exactly
A_h hbar^2/(m sigma^2) - B_h G m^2/sigma, so the stationary point of E is
sigma* = 2 A_h hbar^2 / (B_h G m^3) up to quadrature error in A_h, B_h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import GridError, MonotoneRegimeError
from .fields import LINE1D, NATURAL, RADIAL3D, Grid, UnitSystem, make_grid
from .gravity import GravityParams, mean_self_energy
from .quantum import GaussianPacketSpec, gaussian_amplitude, mean_quantum_potential

GRID_EXTENT = 12.0  # grid half-extent in packet widths
GRID_POINTS = 1201
MIN_SAMPLES = 20
SIGMA_RTOL = 1e-6


def diosi_width(m, units: UnitSystem = NATURAL):
    """hbar^2 / (G m^3) in the active unit system."""
    return units.hbar**2 / (units.G * np.asarray(m, dtype=float) ** 3)


def body_packet_width(sigma_min, R):
    """sigma_min^(1/4) R^(3/4)."""
    return np.asarray(sigma_min, dtype=float) ** 0.25 * np.asarray(R, dtype=float) ** 0.75


def critical_size(mass_density, units: UnitSystem = UnitSystem.si()):
    """Radius at which a uniform body's packet width equals its radius.

    Solving hbar^2 / (G m^3) = R with m = (4 pi / 3) density R^3 gives
    R = [hbar^2 / (G ((4 pi / 3) density)^3)]^(1/10).
    """
    rho = np.asarray(mass_density, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("mass density must be positive")
    return (units.hbar**2 / (units.G * (4.0 * np.pi / 3.0 * rho) ** 3)) ** 0.1


def _packet_grid(sigma, geometry, extent, n, grid):
    if grid is not None:
        half = grid.x_max if grid.geometry == RADIAL3D else min(grid.x_max, -grid.x_min)
        if half < 10.0 * sigma:
            raise GridError(f"grid extends only {half / sigma:.2f} sigma; at least 10 needed")
        return grid
    if extent < 10.0:
        raise GridError("grid extent must be at least 10 packet widths")
    if geometry == RADIAL3D:
        return make_grid(RADIAL3D, 0.0, extent * sigma, n)
    return make_grid(LINE1D, -extent * sigma, extent * sigma, n)


def gaussian_energies(sigma: float, m: float, params: GravityParams = GravityParams(),
                      hbar: float = 1.0, geometry: str = RADIAL3D, extent: float = GRID_EXTENT,
                      n: int = GRID_POINTS, grid: Grid | None = None) -> tuple[float, float]:
    """(<Q>, <U_g>) for a stationary Gaussian of width sigma."""
    g = _packet_grid(sigma, geometry, extent, n, grid)
    pf = gaussian_amplitude(GaussianPacketSpec(sigma, m), g, hbar)
    q = mean_quantum_potential(pf, m)
    ug = mean_self_energy(pf.rho, m, params) if params.G != 0 else 0.0
    return q, ug


def loglog_slope(x, y) -> float:
    """Least-squares slope of log|y| against log x."""
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.abs(np.asarray(y))), 1)[0])


@dataclass
class CriticalityReport:
    sigmas: np.ndarray
    mean_q: np.ndarray
    mean_ug: np.ndarray
    geometry: str = RADIAL3D
    sigma_star: float | None = None
    coefficient: float | None = None
    A: float | None = None
    B: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def energy(self) -> np.ndarray:
        return self.mean_q + self.mean_ug

    @property
    def slope_q(self) -> float:
        return loglog_slope(self.sigmas, self.mean_q)

    @property
    def slope_ug(self) -> float:
        if not np.any(self.mean_ug):
            return math.nan
        return loglog_slope(self.sigmas, self.mean_ug)

    @property
    def brackets_minimum(self) -> bool:
        E = self.energy
        i = int(np.argmin(E))
        return 0 < i < E.size - 1


def energy_profile(m: float, sigmas, geometry: str = RADIAL3D,
                   params: GravityParams = GravityParams(), hbar: float = 1.0,
                   extent: float = GRID_EXTENT, n: int = GRID_POINTS,
                   grid: Grid | None = None) -> CriticalityReport:
    """E(sigma) over at least 20 widths spanning at least a decade.

    Each width gets its own grid scaled to it unless a fixed ``grid`` is
    given. Line profiles use the softened kernel and are qualitative only.
    """
    sigmas = np.sort(np.asarray(sigmas, dtype=float))
    if sigmas.size < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} widths, got {sigmas.size}")
    if not sigmas[0] > 0:
        raise ValueError("widths must be positive")
    if sigmas[-1] / sigmas[0] < 10.0 * (1.0 - 1e-12):
        raise ValueError("widths must span at least one decade")
    pairs = [gaussian_energies(s, m, params, hbar, geometry, extent, n, grid) for s in sigmas]
    q, ug = (np.array(v) for v in zip(*pairs))
    meta = {"quantitative": geometry == RADIAL3D, "grid": "fixed" if grid else "scaled"}
    return CriticalityReport(sigmas, q, ug, geometry, meta=meta)


def measured_coefficients(m: float = 1.0, params: GravityParams = GravityParams(), hbar: float = 1.0,
                          extent: float = GRID_EXTENT, n: int = GRID_POINTS) -> tuple[float, float]:
    """A and B of <Q> = A hbar^2 / (m sigma^2), <U_g> = -B G m^2 / sigma (radial3d)."""
    q, ug = gaussian_energies(1.0, m, params, hbar, RADIAL3D, extent, n)
    return q * m / hbar**2, -ug / (params.G * m**2)


def _natural_width(m, params, hbar, extent, n, span, n_scan):
    if params.G == 0:
        raise MonotoneRegimeError("G = 0: E(sigma) is monotone decreasing, no critical width",
                                  {"G": 0.0})
    guess = hbar**2 / (params.G * m**3)
    scan = guess * np.logspace(-math.log10(span), math.log10(span), n_scan)

    def energy(s):
        q, ug = gaussian_energies(s, m, params, hbar, RADIAL3D, extent, n)
        return q + ug

    E = np.array([energy(s) for s in scan])
    i = int(np.argmin(E))
    if i == 0 or i == scan.size - 1:
        raise MonotoneRegimeError("no interior minimum of E(sigma) on the scanned range",
                                  {"sigma_range": [float(scan[0]), float(scan[-1])], "argmin": i})
    res = minimize_scalar(energy, bracket=(scan[i - 1], scan[i], scan[i + 1]), method="golden",
                          options={"xtol": SIGMA_RTOL * 1e-2})
    return float(res.x), scan, E


def critical_width(m: float, params: GravityParams = GravityParams(), hbar: float = 1.0,
                   units: UnitSystem | None = None, extent: float = GRID_EXTENT,
                   n: int = GRID_POINTS, span: float = 30.0, n_scan: int = 25) -> float:
    """Width at which E(sigma) is stationary, by golden-section search.

    With an SI ``units`` argument, ``m`` is in kg and the result in metres;
    the search itself runs in natural units with the mass as mass unit.
    """
    if units is not None and units.mode == "SI":
        nat = UnitSystem.natural(mass_unit=m)
        s, _, _ = _natural_width(1.0, GravityParams(1.0), 1.0, extent, n, span, n_scan)
        return s * nat.length_unit
    s, _, _ = _natural_width(m, params, hbar, extent, n, span, n_scan)
    return s


def criticality_report(m: float, params: GravityParams = GravityParams(), hbar: float = 1.0,
                       decades: float = 1.0, n_sigma: int = 31, **grid_kw) -> CriticalityReport:
    """Profile over a window of ``decades`` centred on sigma*, with sigma* and A, B filled in."""
    s_star = critical_width(m, params, hbar, **grid_kw)
    half = 0.5 * decades
    sigmas = s_star * np.logspace(-half, half, n_sigma)
    rep = energy_profile(m, sigmas, RADIAL3D, params, hbar, **grid_kw)
    A, B = measured_coefficients(m, params, hbar, **grid_kw)
    rep.sigma_star = s_star
    rep.coefficient = s_star * params.G * m**3 / hbar**2
    rep.A, rep.B = A, B
    return rep


@dataclass
class MassSweep:
    masses: np.ndarray
    sigma_star: np.ndarray
    G: float = 1.0
    hbar: float = 1.0

    @property
    def slope(self) -> float:
        return loglog_slope(self.masses, self.sigma_star)

    @property
    def coefficients(self) -> np.ndarray:
        return self.sigma_star * self.G * self.masses**3 / self.hbar**2


def mass_sweep(masses, params: GravityParams = GravityParams(), hbar: float = 1.0, **kw) -> MassSweep:
    """sigma*(m) over a set of masses; coefficients are sigma* G m^3 / hbar^2."""
    masses = np.asarray(masses, dtype=float)
    s = np.array([critical_width(mi, params, hbar, **kw) for mi in masses])
    return MassSweep(masses, s, params.G, hbar)
