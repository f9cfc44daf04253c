"""Bohmian quantum potential, quantum force and Gaussian closed forms."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainWarning
from .fields import (
    RADIAL3D,
    Grid,
    PolarFields,
    RealField,
    amplitude_floor_for,
    check_coverage,
    gradient,
    laplacian_values,
    nearest_valid_fill,
)

# half-extent, in packet widths, below which a grid is flagged as too narrow
MIN_EXTENT_SIGMAS = 10.0


@dataclass(frozen=True)
class GaussianPacketSpec:
    """Stationary Gaussian packet at rest at the origin."""

    sigma0: float
    m: float
    center: float = 0.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if self.center != 0.0:
            raise ValueError("only packets centred on the origin are supported")


def check_extent(grid: Grid, sigma: float, center: float = 0.0) -> bool:
    """Warn (DomainWarning) and return False if the grid is too narrow for sigma."""
    if grid.geometry == RADIAL3D:
        extent = grid.x_max
    else:
        extent = min(grid.x_max - center, center - grid.x_min)
    if extent < MIN_EXTENT_SIGMAS * sigma:
        warnings.warn(
            f"grid extends {extent / sigma:.1f} sigma from the packet centre; "
            f"{MIN_EXTENT_SIGMAS:g} sigma recommended",
            DomainWarning,
            stacklevel=3,
        )
        return False
    return True


def gaussian_amplitude(spec: GaussianPacketSpec, grid: Grid, hbar: float = 1.0) -> PolarFields:
    """R = N exp(-x^2 / 4 sigma0^2), normalized with the geometry's measure; S = 0."""
    check_extent(grid, spec.sigma0, spec.center)
    x = grid.x - spec.center
    R = np.exp(-(x**2) / (4.0 * spec.sigma0**2))
    R = R / np.sqrt(grid.integrate(R**2))
    return PolarFields(
        RealField(grid, R),
        RealField(grid, np.zeros(grid.n)),
        np.ones(grid.n, dtype=bool),
        hbar,
    )


def quantum_potential(
    pf: PolarFields,
    m: float,
    amplitude_floor: float | None = None,
    min_valid_fraction: float = 0.5,
) -> RealField:
    """Q = -(hbar^2 / 2m) lap(R) / R.

    Points where R is at or below the floor take Q from the nearest valid
    point; they are listed in ``meta["extrapolated"]``.
    """
    R = pf.R.values
    floor = amplitude_floor_for(R, amplitude_floor)
    valid = R > floor
    check_coverage(valid, min_valid_fraction)
    lap = laplacian_values(R, pf.grid)
    q = np.zeros_like(R)
    q[valid] = -(pf.hbar**2) / (2.0 * m) * lap[valid] / R[valid]
    q = nearest_valid_fill(q, valid)
    return RealField(pf.grid, q, {"extrapolated": ~valid})


def quantum_force(Q: RealField) -> RealField:
    return RealField(Q.grid, -gradient(Q).values, dict(Q.meta))


def mean_quantum_potential(pf: PolarFields, m: float, **kwargs) -> float:
    """<Q> = integral of R^2 Q with the grid's trapezoid rule."""
    Q = quantum_potential(pf, m, **kwargs)
    return pf.grid.integrate(pf.R.values**2 * Q.values)


def quantum_kinetic_energy(pf: PolarFields, m: float) -> float:
    """(hbar^2 / 2m) * integral |grad R|^2; equals <Q> by parts for decaying R."""
    dR = gradient(pf.R).values
    return pf.hbar**2 / (2.0 * m) * pf.grid.integrate(dR**2)


# Gaussian closed forms. ``dim`` is 1 for the line, 3 for the isotropic packet.

def gaussian_q(x, sigma, m, hbar=1.0, dim=1):
    return hbar**2 / (4.0 * m * sigma**2) * (dim - np.asarray(x) ** 2 / (2.0 * sigma**2))


def gaussian_force(x, sigma, m, hbar=1.0):
    """-dQ/dx = hbar^2 x / (4 m sigma^4), the same along any axis for dim 1 or 3."""
    return hbar**2 * np.asarray(x) / (4.0 * m * sigma**4)


def gaussian_mean_q(sigma, m, hbar=1.0, dim=1):
    """Exact <Q> = dim * hbar^2 / (8 m sigma^2)."""
    return dim * hbar**2 / (8.0 * m * sigma**2)


def gaussian_mean_q_estimate(sigma, m, hbar=1.0):
    """Order-of-magnitude form hbar^2 / (2 m sigma^2), kept for reporting."""
    return hbar**2 / (2.0 * m * sigma**2)
