"""Bohmian trajectories: guidance velocity, ensembles and their diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GridError, PhaseUndefinedError
from .evolve import EvolutionRecord, velocity_values
from .fields import LINE1D, Grid, PolarFields, RealField, gradient


def velocity_field(pf: PolarFields, m: float) -> RealField:
    """v = grad S / m. Points whose phase was extrapolated are flagged."""
    v = gradient(pf.S).values / m
    return RealField(pf.grid, v, {"extrapolated": ~np.asarray(pf.valid)})


def analytic_gaussian_trajectory(x0, t, m, sigma0, hbar=1.0):
    """x0 * sqrt(1 + (hbar t / 2 m sigma0^2)^2) for the free packet at rest."""
    return np.asarray(x0) * np.sqrt(1.0 + (hbar * np.asarray(t) / (2.0 * m * sigma0**2)) ** 2)


def gaussian_packet_velocity(x, t, m, sigma0, hbar=1.0):
    b = hbar / (2.0 * m * sigma0**2)
    return np.asarray(x) * b**2 * t / (1.0 + (b * t) ** 2)


def sample_initial(rho0: RealField, K: int) -> np.ndarray:
    """Stratified quantiles x_k = CDF^-1((k - 1/2) / K) of a line density."""
    if K < 2:
        raise ValueError("need at least two trajectories")
    grid = rho0.grid
    if grid.geometry != LINE1D:
        raise GridError("trajectory ensembles live on line1d grids")
    cdf = cumulative_trapezoid(rho0.values, grid.x, initial=0.0)
    cdf /= cdf[-1]
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    q = (np.arange(1, K + 1) - 0.5) / K
    return np.interp(q, cdf[keep], grid.x[keep])


class FreeGaussianProvider:
    """Closed-form free Gaussian packet (zero group velocity) on a line grid."""

    def __init__(self, grid: Grid, sigma0: float, m: float, hbar: float = 1.0):
        self.grid, self.sigma0, self.m, self.hbar = grid, sigma0, m, hbar

    def polar(self, t: float) -> PolarFields:
        x, s0, hbar = self.grid.x, self.sigma0, self.hbar
        tau = hbar * t / (2.0 * self.m * s0**2)
        width = s0 * math.sqrt(1.0 + tau**2)
        R = (2.0 * np.pi * width**2) ** -0.25 * np.exp(-(x**2) / (4.0 * width**2))
        S = hbar * (x**2 * tau / (4.0 * s0**2 * (1.0 + tau**2)) - 0.5 * math.atan(tau))
        return PolarFields(RealField(self.grid, R), RealField(self.grid, S),
                           np.ones(self.grid.n, dtype=bool), hbar)

    def velocity(self, t: float) -> RealField:
        return velocity_field(self.polar(t), self.m)


class SnapshotProvider:
    """Guidance velocity from recorded wavefunction snapshots, linear in time."""

    def __init__(self, record: EvolutionRecord, m: float, hbar: float = 1.0):
        if len(record.snapshots) < 2:
            raise ValueError("need at least two snapshots")
        self.grid = record.psi_final.grid
        self.times = np.asarray(record.snapshot_times)
        self.m = m
        self._v = [velocity_values(p, self.grid, m, hbar) for p in record.snapshots]
        floor = [np.abs(p) <= 1e-8 * np.abs(p).max() for p in record.snapshots]
        self._invalid = floor

    def velocity(self, t: float) -> RealField:
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        v = (1.0 - w) * self._v[i] + w * self._v[i + 1]
        return RealField(self.grid, v, {"extrapolated": self._invalid[i] | self._invalid[i + 1]})


@dataclass
class TrajectoryEnsemble:
    x0: np.ndarray
    times: np.ndarray
    positions: np.ndarray  # (len(times), K); NaN after a trajectory leaves the grid
    exited: np.ndarray
    invalid_phase: np.ndarray

    @property
    def K(self) -> int:
        return self.x0.size


def integrate_ensemble(x0s, field_provider, dt: float, t_end: float) -> TrajectoryEnsemble:
    """RK4 on dx/dt = v(x, t) with v linearly interpolated in space.

    Trajectories that leave the grid are frozen as NaN and flagged; entering
    a region of extrapolated phase only raises the ``invalid_phase`` flag.
    """
    x = np.array(x0s, dtype=float)
    grid = field_provider.grid
    nsteps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    if nsteps:
        dt = t_end / nsteps
    exited = np.zeros(x.size, dtype=bool)
    invalid = np.zeros(x.size, dtype=bool)

    def vel(t, pos):
        field = field_provider.velocity(t)
        out = np.interp(pos, grid.x, field.values)
        bad = field.meta.get("extrapolated")
        if bad is not None and np.any(bad):
            idx = np.clip(np.rint((pos - grid.x_min) / grid.h).astype(int), 0, grid.n - 1)
            invalid[:] |= np.asarray(bad)[idx] & ~np.isnan(pos)
        return out

    positions = np.empty((nsteps + 1, x.size))
    positions[0] = x
    for k in range(nsteps):
        t = k * dt
        k1 = vel(t, x)
        k2 = vel(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = vel(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = vel(t + dt, x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out = (x < grid.x_min) | (x > grid.x_max)
        exited |= out
        x[exited] = np.nan
        positions[k + 1] = x
    times = dt * np.arange(nsteps + 1)
    return TrajectoryEnsemble(np.array(x0s, dtype=float), times, positions, exited, invalid)


@dataclass(frozen=True)
class NonCrossingReport:
    ok: bool
    pair: tuple | None = None
    time: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_non_crossing(ens: TrajectoryEnsemble) -> NonCrossingReport:
    """True iff every recorded time preserves the initial strict ordering."""
    if ens.K < 2:
        return NonCrossingReport(True)
    order = np.argsort(ens.x0, kind="stable")
    pos = ens.positions[:, order]
    gaps = np.diff(pos, axis=1)
    bad = gaps <= 0  # NaN gaps (exited trajectories) compare False
    if not bad.any():
        return NonCrossingReport(True)
    ti, j = np.argwhere(bad)[0]
    return NonCrossingReport(False, (int(order[j]), int(order[j + 1])), float(ens.times[ti]))


@dataclass(frozen=True)
class LoopIntegral:
    value: float
    winding: int
    planck: float

    @property
    def nearest_multiple(self) -> float:
        return self.winding * self.planck


def phase_loop_integral(S, loop=None, hbar: float = 1.0, valid=None) -> LoopIntegral:
    """Line integral of grad S around a closed loop of grid samples.

    ``S`` holds action values (possibly wrapped modulo 2 pi hbar) and ``loop``
    the sample indices in order; the loop closes from the last back to the
    first. Each increment is the principal-value phase difference, which is
    the exact integral of the interpolated gradient when neighbouring
    samples differ by less than pi hbar.
    """
    vals = np.asarray(getattr(S, "values", S), dtype=float)
    idx = np.arange(vals.size) if loop is None else np.asarray(loop, dtype=int)
    if valid is not None and not np.all(np.asarray(valid)[idx]):
        raise PhaseUndefinedError("phase is undefined on part of the loop")
    planck = 2.0 * np.pi * hbar
    if idx.size < 2:
        return LoopIntegral(0.0, 0, planck)
    ring = vals[np.append(idx, idx[0])]
    dS = np.diff(ring)
    dS = (dS + np.pi * hbar) % planck - np.pi * hbar
    total = float(np.sum(dS))
    return LoopIntegral(total, int(round(total / planck)), planck)
