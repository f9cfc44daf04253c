"""Grids, fields, finite-difference calculus and the unit system.

All stencils are second order. Two geometries are supported: a uniform line
(``line1d``) and the radial coordinate of a spherically symmetric 3D field
(``radial3d``, grid starting at r = 0). Fields are immutable: their value
arrays are flagged read-only on construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy import constants

from .errors import GridError, PhaseUndefinedError

LINE1D = "line1d"
RADIAL3D = "radial3d"
GEOMETRIES = (LINE1D, RADIAL3D)

MIN_POINTS = 16
DEFAULT_FLOOR_FRACTION = 1e-8

# (mass, length, time) exponents
MASS = (1, 0, 0)
LENGTH = (0, 1, 0)
TIME = (0, 0, 1)
ENERGY = (1, 2, -2)
ACTION = (1, 2, -1)
DENSITY = (1, -3, 0)


@dataclass(frozen=True)
class UnitSystem:
    """Values of hbar and G and the map between natural and SI numbers.

    In natural mode hbar = G = 1 and the remaining freedom is fixed by
    ``mass_unit`` (kg). The induced units are the length hbar^2/(G M^3) and
    the time M L^2/hbar, so a particle of mass ``mass_unit`` has unit
    critical width. In SI mode numbers are already SI and conversion is the
    identity.
    """

    mode: str = "natural"
    mass_unit: float = 1.0

    def __post_init__(self):
        if self.mode not in ("natural", "SI"):
            raise ValueError(f"unknown unit mode {self.mode!r}")
        if not self.mass_unit > 0:
            raise ValueError("mass_unit must be positive")

    @classmethod
    def natural(cls, mass_unit: float = 1.0) -> "UnitSystem":
        return cls("natural", mass_unit)

    @classmethod
    def si(cls) -> "UnitSystem":
        return cls("SI")

    @property
    def hbar(self) -> float:
        return 1.0 if self.mode == "natural" else constants.hbar

    @property
    def G(self) -> float:
        return 1.0 if self.mode == "natural" else constants.G

    @property
    def length_unit(self) -> float:
        """SI metres per natural length unit."""
        return constants.hbar**2 / (constants.G * self.mass_unit**3)

    @property
    def time_unit(self) -> float:
        return self.mass_unit * self.length_unit**2 / constants.hbar

    def _factor(self, dims) -> float:
        if self.mode == "SI":
            return 1.0
        a, b, c = dims
        return self.mass_unit**a * self.length_unit**b * self.time_unit**c

    def to_si(self, value, dims):
        return value * self._factor(dims)

    def from_si(self, value, dims):
        return value / self._factor(dims)


NATURAL = UnitSystem.natural()


@dataclass(frozen=True)
class Particle:
    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("particle mass must be positive")


@dataclass(frozen=True)
class Grid:
    geometry: str
    n: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise GridError(f"unknown geometry {self.geometry!r}")
        if self.n < MIN_POINTS:
            raise GridError(f"n too small: need at least {MIN_POINTS} points, got {self.n}")
        if not self.x_max > self.x_min:
            raise GridError("x_max must exceed x_min")
        if self.geometry == RADIAL3D and self.x_min != 0:
            raise GridError("radial3d grids must start at r = 0")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        # Built about the midpoint so that symmetric grids are exactly
        # antisymmetric in floating point.
        if self.geometry == RADIAL3D:
            x = self.h * np.arange(self.n)
        else:
            mid = 0.5 * (self.x_min + self.x_max)
            x = mid + self.h * (np.arange(self.n) - 0.5 * (self.n - 1))
        x.setflags(write=False)
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights including the geometric measure."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        if self.geometry == RADIAL3D:
            w = w * 4.0 * np.pi * self.x**2
        w.setflags(write=False)
        return w

    @property
    def dim(self) -> int:
        return 3 if self.geometry == RADIAL3D else 1

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.geometry, (self.n - 1) * factor + 1, self.x_min, self.x_max)


def make_grid(geometry: str, x_min: float, x_max: float, n: int) -> Grid:
    return Grid(geometry, int(n), float(x_min), float(x_max))


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RealField:
    grid: Grid
    values: np.ndarray
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = _frozen(self.values, float)
        if arr.shape != (self.grid.n,):
            raise ValueError(f"field has shape {arr.shape}, grid has {self.grid.n} points")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", arr)

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def with_values(self, values, **meta) -> "RealField":
        return RealField(self.grid, values, {**self.meta, **meta})


@dataclass(frozen=True)
class ComplexField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values, complex)
        if arr.shape != (self.grid.n,):
            raise ValueError(f"field has shape {arr.shape}, grid has {self.grid.n} points")
        if not np.all(np.isfinite(arr)):
            raise ValueError("wavefunction values must be finite")
        object.__setattr__(self, "values", arr)

    @classmethod
    def normalized_from(cls, grid: Grid, values) -> "ComplexField":
        return cls(grid, values).normalized()

    def norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))

    def normalized(self) -> "ComplexField":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize a vanishing wavefunction")
        return ComplexField(self.grid, self.values / nrm)

    def density(self) -> RealField:
        return RealField(self.grid, np.abs(self.values) ** 2)


@dataclass(frozen=True)
class PolarFields:
    """psi = R exp(iS/hbar), with rho = R^2 and the mask where S is meaningful."""

    R: RealField
    S: RealField
    valid: np.ndarray
    hbar: float = 1.0

    @property
    def rho(self) -> RealField:
        return RealField(self.R.grid, self.R.values**2)

    @property
    def grid(self) -> Grid:
        return self.R.grid

    def recompose(self) -> ComplexField:
        return ComplexField(self.grid, self.R.values * np.exp(1j * self.S.values / self.hbar))


def gradient(f: RealField) -> RealField:
    """Central differences inside, one-sided second order at both ends."""
    return RealField(f.grid, np.gradient(f.values, f.grid.h, edge_order=2))


def _second_derivative(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return out


def laplacian_values(v: np.ndarray, grid: Grid) -> np.ndarray:
    h = grid.h
    d2 = _second_derivative(v, h)
    if grid.geometry == LINE1D:
        return d2
    r = grid.x
    d1 = np.gradient(v, h, edge_order=2)
    out = np.empty_like(v)
    out[1:] = d2[1:] + 2.0 * d1[1:] / r[1:]
    # regular origin, f'(0) = 0: lap f(0) = 3 f''(0) with a mirrored ghost point
    out[0] = 6.0 * (v[1] - v[0]) / h**2
    return out


def laplacian(f: RealField) -> RealField:
    """d2f/dx2 on a line; (1/r^2) d/dr (r^2 df/dr) on a radial grid."""
    return RealField(f.grid, laplacian_values(f.values, f.grid))


def amplitude_floor_for(R: np.ndarray, amplitude_floor: float | None) -> float:
    if amplitude_floor is None:
        return DEFAULT_FLOOR_FRACTION * float(np.max(R))
    return float(amplitude_floor)


def nearest_valid_fill(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace entries outside ``valid`` by the value at the nearest valid index."""
    if valid.all():
        return values.copy()
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        raise PhaseUndefinedError("no valid points to extrapolate from")
    pos = np.arange(values.size)
    right = np.searchsorted(idx, pos).clip(0, idx.size - 1)
    left = (right - 1).clip(0, idx.size - 1)
    pick = np.where(np.abs(idx[left] - pos) <= np.abs(idx[right] - pos), idx[left], idx[right])
    out = values.copy()
    out[~valid] = values[pick[~valid]]
    return out


def check_coverage(valid: np.ndarray, min_valid_fraction: float) -> None:
    frac = valid.mean()
    if frac < min_valid_fraction:
        raise PhaseUndefinedError(
            f"amplitude above floor on only {frac:.1%} of the grid "
            f"(need {min_valid_fraction:.0%})"
        )


def polar_decompose(
    psi: ComplexField,
    amplitude_floor: float | None = None,
    hbar: float = 1.0,
    min_valid_fraction: float = 0.5,
) -> PolarFields:
    """Split psi into amplitude and a continuous (unwrapped) action phase.

    ``amplitude_floor`` defaults to 1e-8 of the peak amplitude. Where R is at
    or below it the phase is copied from the nearest valid point.
    """
    R = np.abs(psi.values)
    floor = amplitude_floor_for(R, amplitude_floor)
    valid = R > floor
    check_coverage(valid, min_valid_fraction)
    phase = np.zeros_like(R)
    phase[valid] = np.unwrap(np.angle(psi.values[valid]))
    phase = nearest_valid_fill(phase, valid)
    valid = _frozen(valid, bool)
    return PolarFields(
        RealField(psi.grid, R),
        RealField(psi.grid, hbar * phase, {"extrapolated": ~valid}),
        valid,
        hbar,
    )
