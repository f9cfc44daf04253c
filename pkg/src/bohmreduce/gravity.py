"""Self-gravity of the probability distribution.

The Newtonian kernel integral V[rho](x) = integral rho(x') / |x - x'| dmu'
is computed by the shell theorem on radial grids (interior enclosed mass
plus exterior shells, fourth-order cumulative quadrature) and by a softened
direct convolution on the line, where the bare kernel is not integrable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConventionError
from .fields import LINE1D, RADIAL3D, RealField

PAPER_POSITIVE = "paper_positive"
NEWTONIAN = "newtonian"
SIGN_CONVENTIONS = (PAPER_POSITIVE, NEWTONIAN)


@dataclass(frozen=True)
class GravityParams:
    """G, line softening and the sign convention for phi.

    ``softening=None`` means one grid spacing on line grids. Under
    ``paper_positive`` phi = +G m V >= 0, so the balance grad Q = m grad phi
    holds as written; ``newtonian`` is its negative.
    """

    G: float = 1.0
    softening: float | None = None
    sign_convention: str = PAPER_POSITIVE

    def __post_init__(self):
        if self.G < 0:
            raise ValueError("G must be non-negative")
        if self.softening is not None and self.softening < 0:
            raise ValueError("softening must be non-negative")
        if self.sign_convention not in SIGN_CONVENTIONS:
            raise ConventionError(f"unknown sign convention {self.sign_convention!r}")


def cumulative_integral(f: np.ndarray, h: float) -> np.ndarray:
    """Running integral from the first node, fourth order for smooth f.

    Interior intervals use the cubic-exact four-point rule; the two end
    intervals fall back to the three-point one-sided rule.
    """
    n = f.size
    seg = np.empty(n - 1)
    seg[1:-1] = h / 24.0 * (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:])
    seg[0] = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
    seg[-1] = h / 12.0 * (-f[-3] + 8.0 * f[-2] + 5.0 * f[-1])
    out = np.zeros(n)
    np.cumsum(seg, out=out[1:])
    return out


def _shell_potential(rho: RealField) -> np.ndarray:
    grid = rho.grid
    r, h = grid.x, grid.h
    enclosed = cumulative_integral(4.0 * np.pi * r**2 * rho.values, h)
    outer = cumulative_integral(4.0 * np.pi * r * rho.values, h)
    exterior = outer[-1] - outer
    V = np.empty(grid.n)
    V[1:] = enclosed[1:] / r[1:] + exterior[1:]
    V[0] = exterior[0]
    return V


def _softened_potential(rho: RealField, eps: float) -> np.ndarray:
    grid = rho.grid
    n, h = grid.n, grid.h
    offsets = np.abs(np.arange(-(n - 1), n)) * h
    kernel = 1.0 / (offsets + eps)
    full = fftconvolve(grid.weights * rho.values, kernel)
    return full[n - 1 : 2 * n - 1]


def kernel_potential(rho: RealField, params: GravityParams) -> np.ndarray:
    """V[rho] = integral rho' / |x - x'| (softened on the line)."""
    geom = rho.grid.geometry
    if geom == RADIAL3D:
        if params.softening:
            raise ValueError("radial3d self-gravity is exact; softening must be unset or 0")
        return _shell_potential(rho)
    eps = rho.grid.h if params.softening is None else params.softening
    if eps == 0:
        raise ValueError("line1d kernel 1/|x - x'| is not integrable; softening must be > 0")
    return _softened_potential(rho, eps)


def self_energy_field(rho: RealField, m: float, params: GravityParams = GravityParams()) -> RealField:
    """U_g(x) = -G m^2 V[rho](x)."""
    V = kernel_potential(rho, params)
    return RealField(rho.grid, -params.G * m**2 * V, {"softening": _softening_used(rho, params)})


def potential_field(rho: RealField, m: float, params: GravityParams = GravityParams()) -> RealField:
    """phi in the configured sign convention; U_g = -m * phi_paper_positive."""
    phi = params.G * m * kernel_potential(rho, params)
    if params.sign_convention == NEWTONIAN:
        phi = -phi
    return RealField(
        rho.grid,
        phi,
        {"sign_convention": params.sign_convention, "softening": _softening_used(rho, params)},
    )


def mean_self_energy(rho: RealField, m: float, params: GravityParams = GravityParams()) -> float:
    """<U_g> = integral rho(x) U_g(x) dmu, the full double integral."""
    U = self_energy_field(rho, m, params)
    return rho.grid.integrate(rho.values * U.values)


def to_paper_positive(phi: RealField, convention: str | None = None) -> np.ndarray:
    """Return phi in the paper_positive convention, checking any recorded tag."""
    tagged = phi.meta.get("sign_convention")
    if convention is None:
        convention = tagged or PAPER_POSITIVE
    if convention not in SIGN_CONVENTIONS:
        raise ConventionError(f"unknown sign convention {convention!r}")
    if tagged is not None and tagged != convention:
        raise ConventionError(f"phi is tagged {tagged!r} but {convention!r} was requested")
    return phi.values if convention == PAPER_POSITIVE else -phi.values


def _softening_used(rho: RealField, params: GravityParams) -> float:
    if rho.grid.geometry == LINE1D:
        return rho.grid.h if params.softening is None else params.softening
    return 0.0


# isotropic 3D Gaussian with per-axis width sigma

def gaussian_self_energy_at_origin(sigma, m, G=1.0):
    return -G * m**2 * np.sqrt(2.0 / np.pi) / sigma


def gaussian_mean_self_energy(sigma, m, G=1.0):
    """Exact <U_g> = -G m^2 / (sqrt(pi) sigma)."""
    return -G * m**2 / (np.sqrt(np.pi) * sigma)
