"""Crank-Nicolson integration of the Schrodinger-Newton equation.

    i hbar dpsi/dt = [-(hbar^2 / 2m) lap + U_g[|psi|^2]] psi

The unknowns are the interior values (line) or u = r psi (radial; u(0) = 0
encodes regularity at the origin). Both give a symmetric tridiagonal
Hamiltonian, so each step is unitary in the grid's trapezoid norm. The
self-energy is evaluated at the step midpoint and relaxed by Picard sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import NormDriftError, PicardConvergenceError
from .fields import LINE1D, RADIAL3D, ComplexField, Grid, PolarFields, RealField
from .gravity import GravityParams, self_energy_field
from .quantum import GaussianPacketSpec, gaussian_amplitude, quantum_potential

NORM_TOLERANCE = 1e-6


def default_dt(grid: Grid, m: float, hbar: float = 1.0) -> float:
    return 0.1 * m * grid.h**2 / hbar


@dataclass(frozen=True)
class EvolveConfig:
    t_end: float
    dt: float | None = None
    gravity_on: bool = False
    picard_tol: float = 1e-10
    picard_max_iters: int = 25
    record_every: int = 1
    snapshot_every: int | None = None

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if not 0 < self.picard_tol <= 1e-4:
            raise ValueError("picard_tol must lie in (0, 1e-4]")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be at least 1")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")


@dataclass
class EvolutionRecord:
    times: np.ndarray
    width: np.ndarray
    norm: np.ndarray
    mean_q: np.ndarray
    mean_ug: np.ndarray
    flow_kinetic: np.ndarray
    psi_final: ComplexField
    snapshot_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    snapshots: list = field(default_factory=list)
    picard_iterations: int = 0

    @property
    def total_energy(self) -> np.ndarray:
        return self.mean_q + self.mean_ug


def packet_width(rho: RealField) -> float:
    """rms width of rho; the per-axis value sqrt(<r^2>/3) on radial grids."""
    grid = rho.grid
    x = grid.x
    if grid.geometry == RADIAL3D:
        return math.sqrt(grid.integrate(x**2 * rho.values) / 3.0)
    mean = grid.integrate(x * rho.values)
    return math.sqrt(max(grid.integrate(x**2 * rho.values) - mean**2, 0.0))


class CrankNicolson:
    """Reusable stepper for a fixed grid, mass and time step."""

    def __init__(self, grid: Grid, m: float, dt: float, gravity_on: bool = False,
                 params: GravityParams = GravityParams(), hbar: float = 1.0,
                 picard_tol: float = 1e-10, picard_max_iters: int = 25):
        self.grid, self.m, self.dt, self.hbar = grid, m, dt, hbar
        self.gravity_on = gravity_on and params.G != 0
        self.params = params
        self.picard_tol = picard_tol
        self.picard_max_iters = picard_max_iters
        self.kin = hbar**2 / (2.0 * m * grid.h**2)
        self.alpha = 0.5j * dt / hbar
        self.r = grid.x[1:-1] if grid.geometry == RADIAL3D else None
        self.last_iterations = 0

    def to_interior(self, psi: np.ndarray) -> np.ndarray:
        y = psi[1:-1]
        return y * self.r if self.r is not None else y.copy()

    def from_interior(self, y: np.ndarray) -> np.ndarray:
        psi = np.zeros(self.grid.n, dtype=complex)
        if self.r is None:
            psi[1:-1] = y
        else:
            psi[1:-1] = y / self.r
            psi[0] = (4.0 * psi[1] - psi[2]) / 3.0
        return psi

    def potential(self, psi: np.ndarray) -> np.ndarray:
        rho = RealField(self.grid, np.abs(psi) ** 2)
        return self_energy_field(rho, self.m, self.params).values[1:-1]

    def _solve(self, y: np.ndarray, U: np.ndarray | float) -> np.ndarray:
        N = y.size
        diag = 2.0 * self.kin + U
        a = self.alpha
        rhs = (1.0 - a * diag) * y
        rhs[1:] += a * self.kin * y[:-1]
        rhs[:-1] += a * self.kin * y[1:]
        ab = np.empty((3, N), dtype=complex)
        ab[0, :] = -a * self.kin
        ab[1, :] = 1.0 + a * diag
        ab[2, :] = -a * self.kin
        return solve_banded((1, 1), ab, rhs, check_finite=False)

    def step(self, psi: np.ndarray) -> np.ndarray:
        y = self.to_interior(psi)
        if not self.gravity_on:
            self.last_iterations = 1
            return self.from_interior(self._solve(y, 0.0))
        U0 = self.potential(psi)
        y_new = self._solve(y, U0)
        change = np.inf
        for it in range(1, self.picard_max_iters + 1):
            U_mid = 0.5 * (U0 + self.potential(self.from_interior(y_new)))
            y_next = self._solve(y, U_mid)
            change = np.linalg.norm(y_next - y_new) / np.linalg.norm(y_next)
            y_new = y_next
            if change < self.picard_tol:
                self.last_iterations = it
                return self.from_interior(y_new)
        raise PicardConvergenceError(
            f"Picard iteration did not converge in {self.picard_max_iters} sweeps",
            {"last_relative_change": float(change), "picard_tol": self.picard_tol},
        )


def _check_norm(before: float, after: float, t: float) -> None:
    if abs(after - before) > NORM_TOLERANCE:
        raise NormDriftError(
            f"norm drifted from {before:.12f} to {after:.12f} at t = {t:g}",
            {"t": t, "norm_before": before, "norm_after": after},
        )


def step(psi: ComplexField, m: float, dt: float, gravity_on: bool = False,
         params: GravityParams = GravityParams(), hbar: float = 1.0, **picard) -> ComplexField:
    """Advance psi by one Crank-Nicolson step."""
    cn = CrankNicolson(psi.grid, m, dt, gravity_on, params, hbar, **picard)
    out = ComplexField(psi.grid, cn.step(psi.values))
    _check_norm(psi.norm(), out.norm(), dt)
    return out


def velocity_values(psi: np.ndarray, grid: Grid, m: float, hbar: float = 1.0) -> np.ndarray:
    """Guidance velocity (hbar/m) dS/dx from phase differences of neighbours.

    Equivalent to differentiating the unwrapped phase, without unwrapping.
    """
    h = grid.h
    v = np.empty(grid.n)
    v[1:-1] = np.angle(psi[2:] * np.conj(psi[:-2])) / (2.0 * h)
    d1 = np.angle(psi[1] * np.conj(psi[0]))
    d2 = np.angle(psi[2] * np.conj(psi[1]))
    v[0] = (3.0 * d1 - d2) / (2.0 * h)
    d1 = np.angle(psi[-1] * np.conj(psi[-2]))
    d2 = np.angle(psi[-2] * np.conj(psi[-3]))
    v[-1] = (3.0 * d1 - d2) / (2.0 * h)
    return hbar / m * v


def energy_components(psi: ComplexField, m: float, params: GravityParams, hbar: float = 1.0,
                      gravity_on: bool = True):
    """(<Q>, <U_g>, flow kinetic energy) of a wavefunction."""
    grid = psi.grid
    R = np.abs(psi.values)
    rho = RealField(grid, R**2)
    pf = PolarFields(RealField(grid, R), RealField(grid, np.zeros(grid.n)),
                     np.ones(grid.n, dtype=bool), hbar)
    Q = quantum_potential(pf, m, min_valid_fraction=0.0)
    mean_q = grid.integrate(rho.values * Q.values)
    if gravity_on and params.G != 0:
        mean_ug = grid.integrate(rho.values * self_energy_field(rho, m, params).values)
    else:
        mean_ug = 0.0
    v = velocity_values(psi.values, grid, m, hbar)
    v[Q.meta["extrapolated"]] = 0.0
    flow = 0.5 * m * grid.integrate(rho.values * v**2)
    return mean_q, mean_ug, flow


def evolve(psi0: ComplexField, m: float, config: EvolveConfig,
           params: GravityParams = GravityParams(), hbar: float = 1.0) -> EvolutionRecord:
    """Integrate to ``config.t_end``, sampling diagnostics every ``record_every`` steps.

    The step count is ceil(t_end / dt); dt is shrunk slightly so the run
    lands on t_end exactly. Snapshots of psi are kept every
    ``snapshot_every`` steps when set.
    """
    grid = psi0.grid
    dt = config.dt if config.dt is not None else default_dt(grid, m, hbar)
    nsteps = int(math.ceil(config.t_end / dt - 1e-9)) if config.t_end > 0 else 0
    if nsteps:
        dt = config.t_end / nsteps
    cn = CrankNicolson(grid, m, dt, config.gravity_on, params, hbar,
                       config.picard_tol, config.picard_max_iters)
    gravity = config.gravity_on and params.G != 0

    rows = []
    snap_t, snaps = [], []

    def record(t, psi):
        f = ComplexField(grid, psi)
        q, ug, flow = energy_components(f, m, params, hbar, gravity)
        rows.append((t, packet_width(f.density()), f.norm(), q, ug, flow))

    def snapshot(t, psi):
        snap_t.append(t)
        snaps.append(psi.copy())

    psi = np.array(psi0.values)
    norm0 = psi0.norm()
    record(0.0, psi)
    if config.snapshot_every:
        snapshot(0.0, psi)
    iterations = 0
    for k in range(1, nsteps + 1):
        psi = cn.step(psi)
        iterations += cn.last_iterations
        t = k * dt
        last = k == nsteps
        if k % config.record_every == 0 or last:
            record(t, psi)
            _check_norm(norm0, rows[-1][2], t)
        if config.snapshot_every and (k % config.snapshot_every == 0 or last):
            snapshot(t, psi)
    data = np.array(rows, dtype=float).reshape(-1, 6)
    return EvolutionRecord(
        times=data[:, 0], width=data[:, 1], norm=data[:, 2],
        mean_q=data[:, 3], mean_ug=data[:, 4], flow_kinetic=data[:, 5],
        psi_final=ComplexField(grid, psi) if nsteps else psi0,
        snapshot_times=np.array(snap_t), snapshots=snaps,
        picard_iterations=iterations,
    )


def free_gaussian_width(t, sigma0, m, hbar=1.0):
    """sigma0 * sqrt(1 + (hbar t / 2 m sigma0^2)^2)."""
    return sigma0 * np.sqrt(1.0 + (hbar * np.asarray(t) / (2.0 * m * sigma0**2)) ** 2)


def gaussian_psi(grid: Grid, sigma0: float, hbar: float = 1.0) -> ComplexField:
    """Normalized real Gaussian initial state of rms width sigma0."""
    pf = gaussian_amplitude(GaussianPacketSpec(sigma0, 1.0), grid, hbar)
    return ComplexField(grid, pf.R.values.astype(complex))
