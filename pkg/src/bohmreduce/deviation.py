"""Nonrelativistic deviation of neighbouring trajectories and the balance residual.

Signs: with phi in the paper_positive convention (phi = +G m V >= 0) the
net specific force on a trajectory is -(1/m) dQ/dx + dphi/dx, so

    D = -d/dx [ (1/m) dQ/dx - dphi/dx ],     eta'' = D eta.

This makes the free Gaussian deviation grow like the packet width
(D = hbar^2 / 4 m^2 sigma^4 > 0), a point mass stretch radially
(D = +2 G M / r^3) and the balanced input phi = Q/m give D = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import RADIAL3D, Grid, RealField, gradient, make_grid
from .gravity import PAPER_POSITIVE, GravityParams, potential_field, to_paper_positive
from .quantum import GaussianPacketSpec, gaussian_amplitude, quantum_potential


@dataclass(frozen=True)
class TidalField:
    grid: Grid
    D: np.ndarray
    convention: dict = field(default_factory=dict)

    def at(self, x) -> np.ndarray:
        return np.interp(x, self.grid.x, self.D)


def _check_same_grid(a: RealField, b: RealField) -> None:
    if a.grid != b.grid:
        raise ValueError("Q and phi must live on the same grid")


def tidal_field(Q: RealField, phi: RealField, m: float, convention: str | None = None) -> TidalField:
    """D = -d/dx[(1/m) Q' - phi_pos'] (radial3d: d/dr of the radial force)."""
    _check_same_grid(Q, phi)
    phi_pos = to_paper_positive(phi, convention)
    net = gradient(Q).values / m - np.gradient(phi_pos, Q.grid.h, edge_order=2)
    D = -np.gradient(net, Q.grid.h, edge_order=2)
    tag = {
        "phi_convention": convention or phi.meta.get("sign_convention", PAPER_POSITIVE),
        "eta_equation": "eta'' = D eta, D = -d/dx[(1/m) dQ/dx - dphi_pos/dx]",
    }
    return TidalField(Q.grid, D, tag)


@dataclass
class DeviationSeries:
    times: np.ndarray
    eta: np.ndarray
    eta_dot: np.ndarray


def integrate_deviation(eta0: float, eta_dot0: float, tidal_along_path, dt: float,
                        t_end: float) -> DeviationSeries:
    """RK4 integration of eta'' = D(t) eta.

    ``tidal_along_path`` is a constant or a callable D(t) already evaluated
    along the fiducial trajectory.
    """
    D = tidal_along_path if callable(tidal_along_path) else (lambda t, c=float(tidal_along_path): c)
    nsteps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    if nsteps:
        dt = t_end / nsteps
    y = np.array([eta0, eta_dot0], dtype=float)
    out = np.empty((nsteps + 1, 2))
    out[0] = y

    def f(t, y):
        return np.array([y[1], D(t) * y[0]])

    for k in range(nsteps):
        t = k * dt
        k1 = f(t, y)
        k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return DeviationSeries(dt * np.arange(nsteps + 1), out[:, 0], out[:, 1])


def tidal_along_free_gaussian(provider, m: float, x_path=None):
    """D(t) for a packet supplied by a provider with ``polar(t)``, sampled at x_path(t).

    Without gravity the quantum tidal field alone drives the deviation.
    """
    grid = provider.grid
    zero = RealField(grid, np.zeros(grid.n), {"sign_convention": PAPER_POSITIVE})

    def D(t):
        pf = provider.polar(t)
        Q = quantum_potential(pf, m, min_valid_fraction=0.0)
        x = 0.0 if x_path is None else x_path(t)
        return float(tidal_field(Q, zero, m).at(x))

    return D


@dataclass(frozen=True)
class BalanceResidual:
    field: RealField
    weighted_norm: float
    relative_norm: float


def balance_residual(Q: RealField, phi: RealField, m: float, rho: RealField | None = None,
                     convention: str | None = None) -> BalanceResidual:
    """r = dQ/dx - m dphi_pos/dx with its rho-weighted norm (int rho r^2)^1/2.

    ``relative_norm`` divides by the same norm of dQ/dx alone, so 1 means no
    cancellation and 0 exact balance.
    """
    _check_same_grid(Q, phi)
    grid = Q.grid
    dQ = gradient(Q).values
    dphi = np.gradient(to_paper_positive(phi, convention), grid.h, edge_order=2)
    r = dQ - m * dphi
    weight = np.ones(grid.n) if rho is None else rho.values
    norm = math.sqrt(max(grid.integrate(weight * r**2), 0.0))
    scale = math.sqrt(max(grid.integrate(weight * dQ**2), 0.0))
    rel = norm / scale if scale > 0 else math.inf
    return BalanceResidual(RealField(grid, r), norm, rel)


def gaussian_balance(sigma: float, m: float, params: GravityParams = GravityParams(),
                     hbar: float = 1.0, extent: float = 12.0, n: int = 1201) -> BalanceResidual:
    """Balance residual of a radial Gaussian on a grid scaled to sigma."""
    grid = make_grid(RADIAL3D, 0.0, extent * sigma, n)
    pf = gaussian_amplitude(GaussianPacketSpec(sigma, m), grid, hbar)
    Q = quantum_potential(pf, m)
    phi = potential_field(pf.rho, m, params)
    return balance_residual(Q, phi, m, pf.rho)


def gaussian_balance_scan(sigmas, m: float, params: GravityParams = GravityParams(),
                          hbar: float = 1.0, **grid_kw):
    """Arrays (weighted_norm, relative_norm) over a set of Gaussian widths."""
    res = [gaussian_balance(s, m, params, hbar, **grid_kw) for s in np.asarray(sigmas, dtype=float)]
    return (np.array([r.weighted_norm for r in res]), np.array([r.relative_norm for r in res]))
