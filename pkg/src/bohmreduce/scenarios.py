"""Scenario runners behind the CLI.

Each runner takes a validated RunConfig and returns tables of plain
numbers plus a summary; persistence lives in ``cli``. Inputs and outputs
are in the config's units. SI runs are computed in natural units whose
mass unit is the particle mass, so the particle has m = 1 internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import collapse, criticality, deviation, relativistic, trajectories
from .config import AUTO, RunConfig
from .evolve import EvolveConfig, evolve, free_gaussian_width, gaussian_psi
from .fields import ENERGY, LENGTH, LINE1D, RADIAL3D, TIME, UnitSystem, make_grid
from .gravity import PAPER_POSITIVE, GravityParams
from .quantum import GaussianPacketSpec, gaussian_amplitude, quantum_potential

INV_VOLUME = (0, -3, 0)
ENERGY_PER_AREA = (1, 0, -2)


@dataclass
class Table:
    name: str
    columns: list
    rows: list

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


@dataclass
class ScenarioResult:
    tables: list
    summary: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)


class _Units:
    """Natural-unit view of a config; SI values are rescaled by the particle mass."""

    def __init__(self, cfg: RunConfig):
        self.si = cfg["units"] == "SI"
        self.system = UnitSystem.natural(mass_unit=cfg["mass"]) if self.si else UnitSystem.natural()
        self.m = 1.0 if self.si else cfg["mass"]
        self.label = "SI (kg, m, s)" if self.si else "natural (hbar = G = 1)"

    def inward(self, value, dims):
        return self.system.from_si(value, dims) if self.si else value

    def outward(self, value, dims):
        return self.system.to_si(value, dims) if self.si else value


def _line_grid(cfg, u):
    return make_grid(LINE1D, u.inward(cfg["x_min"], LENGTH), u.inward(cfg["x_max"], LENGTH), cfg["n"])


def _spread_time(cfg, u, sigma0, factor):
    if cfg["t_end"] == AUTO:
        return factor * u.m * sigma0**2
    return u.inward(cfg["t_end"], TIME)


def run_free_spread(cfg: RunConfig) -> ScenarioResult:
    u = _Units(cfg)
    grid = _line_grid(cfg, u)
    s0 = u.inward(cfg["sigma0"], LENGTH)
    t_end = _spread_time(cfg, u, s0, 4.0)
    dt = None if cfg["dt"] == AUTO else u.inward(cfg["dt"], TIME)
    rec = evolve(gaussian_psi(grid, s0), u.m, EvolveConfig(t_end, dt, record_every=cfg["record_every"]))
    exact = free_gaussian_width(rec.times, s0, u.m)
    rel = np.abs(rec.width - exact) / exact
    rows = [
        (u.outward(t, TIME), u.outward(w, LENGTH), u.outward(e, LENGTH), r, nrm,
         u.outward(q, ENERGY), u.outward(f, ENERGY))
        for t, w, e, r, nrm, q, f in zip(rec.times, rec.width, exact, rel, rec.norm, rec.mean_q,
                                         rec.flow_kinetic)
    ]
    table = Table("width.csv", ["t", "width", "width_exact", "rel_error", "norm", "mean_q", "flow_kinetic"], rows)
    summary = {
        "max_rel_error": float(rel.max()),
        "final_width": rows[-1][1],
        "final_width_exact": rows[-1][2],
        "max_norm_drift": float(np.max(np.abs(rec.norm - rec.norm[0]))),
    }
    return ScenarioResult([table], summary, {"gravity": "off"})


def run_sn_collapse(cfg: RunConfig) -> ScenarioResult:
    u = _Units(cfg)
    params = GravityParams(G=cfg["G_scale"])
    s0 = (criticality.critical_width(u.m, params) if cfg["sigma0"] == AUTO
          else u.inward(cfg["sigma0"], LENGTH))
    x_max = 20.0 * s0 if cfg["x_max"] == AUTO else u.inward(cfg["x_max"], LENGTH)
    grid = make_grid(RADIAL3D, 0.0, x_max, cfg["n"])
    t_end = _spread_time(cfg, u, s0, 2.0)
    dt = t_end / 400.0 if cfg["dt"] == AUTO else u.inward(cfg["dt"], TIME)
    psi0 = gaussian_psi(grid, s0)
    on = evolve(psi0, u.m, EvolveConfig(t_end, dt, True, record_every=cfg["record_every"]), params)
    off = evolve(psi0, u.m, EvolveConfig(t_end, dt, False, record_every=cfg["record_every"]), params)
    rows = [
        (u.outward(t, TIME), u.outward(a, LENGTH), u.outward(b, LENGTH), nrm,
         u.outward(q, ENERGY), u.outward(g, ENERGY), u.outward(q + g, ENERGY))
        for t, a, b, nrm, q, g in zip(on.times, on.width, off.width, on.norm, on.mean_q, on.mean_ug)
    ]
    table = Table("width.csv", ["t", "width_sn", "width_free", "norm_sn", "mean_q", "mean_ug", "energy"], rows)
    growth_on = on.width[-1] - on.width[0]
    growth_off = off.width[-1] - off.width[0]
    summary = {
        "sigma0": u.outward(s0, LENGTH),
        "growth_sn": u.outward(growth_on, LENGTH),
        "growth_free": u.outward(growth_off, LENGTH),
        "growth_ratio": float(growth_on / growth_off),
        "variance_growth_ratio": float((on.width[-1] ** 2 - on.width[0] ** 2)
                                       / (off.width[-1] ** 2 - off.width[0] ** 2)),
        "picard_iterations": int(on.picard_iterations),
    }
    return ScenarioResult([table], summary, {"gravity": "on", "sign_convention": params.sign_convention})


def _provider(cfg, u, grid, s0, t_end):
    if cfg["field"] == "analytic":
        return trajectories.FreeGaussianProvider(grid, s0, u.m)
    dt = u.inward(cfg["dt"], TIME)
    rec = evolve(gaussian_psi(grid, s0), u.m,
                 EvolveConfig(t_end, dt, record_every=10**9, snapshot_every=cfg["snapshot_every"]))
    return trajectories.SnapshotProvider(rec, u.m)


def run_trajectories(cfg: RunConfig) -> ScenarioResult:
    u = _Units(cfg)
    grid = _line_grid(cfg, u)
    s0 = u.inward(cfg["sigma0"], LENGTH)
    t_end = _spread_time(cfg, u, s0, 4.0)
    provider = _provider(cfg, u, grid, s0, t_end)
    pf = gaussian_amplitude(GaussianPacketSpec(s0, u.m), grid)
    x0 = trajectories.sample_initial(pf.rho, cfg["K"])
    ens = trajectories.integrate_ensemble(x0, provider, u.inward(cfg["dt"], TIME) * cfg["snapshot_every"], t_end)
    exact = trajectories.analytic_gaussian_trajectory(x0[None, :], ens.times[:, None], u.m, s0)
    moving = np.abs(x0) > 1e-9 * s0
    rel = np.abs(ens.positions[:, moving] - exact[:, moving]) / np.abs(exact[:, moving])
    rows = []
    for i, t in enumerate(ens.times):
        for k in range(ens.K):
            rows.append((u.outward(t, TIME), k, u.outward(x0[k], LENGTH),
                         u.outward(ens.positions[i, k], LENGTH), u.outward(exact[i, k], LENGTH)))
    report = trajectories.check_non_crossing(ens)
    summary = {
        "max_rel_error": float(np.nanmax(rel)) if rel.size else 0.0,
        "max_abs_center": u.outward(float(np.nanmax(np.abs(ens.positions[:, ~moving]))), LENGTH)
        if (~moving).any() else None,
        "non_crossing": bool(report.ok),
        "first_crossing": None if report.ok else {"pair": list(report.pair), "t": report.time},
        "exited": int(ens.exited.sum()),
        "invalid_phase": int(ens.invalid_phase.sum()),
    }
    table = Table("trajectories.csv", ["t", "k", "x0", "x", "x_exact"], rows)
    return ScenarioResult([table], summary, {"field": cfg["field"], "sampling": "stratified quantiles"})


def run_deviation(cfg: RunConfig) -> ScenarioResult:
    u = _Units(cfg)
    grid = _line_grid(cfg, u)
    s0 = u.inward(cfg["sigma0"], LENGTH)
    t_end = _spread_time(cfg, u, s0, 4.0)
    provider = trajectories.FreeGaussianProvider(grid, s0, u.m)
    if cfg["balance"] == "free":
        D = deviation.tidal_along_free_gaussian(provider, u.m)
    else:
        def D(t):
            Q = quantum_potential(provider.polar(t), u.m, min_valid_fraction=0.0)
            phi = Q.with_values(Q.values / u.m, sign_convention=PAPER_POSITIVE)
            return float(deviation.tidal_field(Q, phi, u.m).at(0.0))
    eta0 = u.inward(cfg["eta0"], LENGTH)
    eta_dot0 = u.inward(cfg["eta_dot0"], (0, 1, -1))
    series = deviation.integrate_deviation(eta0, eta_dot0, D, u.inward(cfg["dt"], TIME), t_end)
    t = series.times
    if cfg["balance"] == "free":
        beta = 1.0 / (2.0 * u.m * s0**2)
        exact = np.sqrt(1.0 + (beta * t) ** 2) * (eta0 + eta_dot0 * np.arctan(beta * t) / beta)
    else:
        exact = eta0 + eta_dot0 * t
    tidal = np.array([D(ti) for ti in t])
    rows = [
        (u.outward(a, TIME), u.outward(b, LENGTH), u.outward(c, (0, 1, -1)), u.outward(d, LENGTH),
         u.outward(e, (0, 0, -2)))
        for a, b, c, d, e in zip(t, series.eta, series.eta_dot, exact, tidal)
    ]
    rel = np.abs(series.eta - exact) / np.maximum(np.abs(exact), 1e-300)
    table = Table("deviation.csv", ["t", "eta", "eta_dot", "eta_exact", "tidal"], rows)
    summary = {"max_rel_error": float(rel.max())}
    tag = {"phi_convention": PAPER_POSITIVE, "eta_equation": "eta'' = D eta, D = -d/dx[(1/m) Q' - phi_pos']"}
    return ScenarioResult([table], summary, tag)


def plummer_metric(depth: float, core: float) -> relativistic.MetricModel:
    """Weak-field metric of phi = -depth / sqrt(r^2 + core^2)."""

    def phi(p):
        return -depth / math.sqrt(float(p @ p) + core**2)

    def grad(p):
        return depth * np.asarray(p, dtype=float) / (float(p @ p) + core**2) ** 1.5

    return relativistic.weak_field(phi, grad, length_scale=core)


def parabolic_q(amplitude: float, length: float) -> relativistic.QFieldModel:
    """Q = amplitude (1 - x^2 / 2 L^2)."""

    def value(x):
        return amplitude * (1.0 - x[1] ** 2 / (2.0 * length**2))

    def grad(x):
        return np.array([0.0, -amplitude * x[1] / length**2, 0.0, 0.0])

    return relativistic.QFieldModel(value, grad, name="parabolic")


def run_relativistic_demo(cfg: RunConfig) -> ScenarioResult:
    A, L = cfg["q_amplitude"], cfg["q_length"]
    if cfg["metric"] == "weak_field":
        depth, core = cfg["potential_depth"], cfg["potential_core"]
        metric = plummer_metric(depth, core)
        u0 = 1.0 / math.sqrt(1.0 - 2.0 * depth / core)
        D_grav = -depth / core**3
    else:
        metric = relativistic.minkowski()
        u0, D_grav = 1.0, 0.0
    qfield = parabolic_q(A, L)
    state = relativistic.RelCongruenceState([0, 0, 0, 0], [u0, 0, 0, 0], [0, cfg["eta0"], 0, 0],
                                            [0, cfg["v0"], 0, 0])
    series = relativistic.integrate_congruence(state, metric, qfield, cfg["dtau"], cfg["tau_end"],
                                               cfg["form"], curvature_ordering=cfg["curvature_ordering"])
    D_q = A / (2.0 * L**2) / ((1.0 + A) if cfg["form"] == relativistic.EXACT_LOG else 1.0)
    nr = deviation.integrate_deviation(cfg["eta0"], cfg["v0"], D_q + D_grav, cfg["dtau"], cfg["tau_end"])
    rows = [
        (float(tau), float(x[0]), float(eta[1]), float(v[1]), float(e_nr), float(d1), float(d2))
        for tau, x, eta, v, e_nr, d1, d2 in zip(series.tau, series.x, series.eta, series.v, nr.eta,
                                               series.uu_drift, series.ueta_drift)
    ]
    table = Table("congruence.csv", ["tau", "t", "eta_x", "v_x", "eta_newtonian", "uu_drift", "ueta_drift"], rows)
    scale = np.maximum(np.abs(nr.eta), 1e-300)
    summary = {
        "max_rel_diff_newtonian": float(np.max(np.abs(series.eta[:, 1] - nr.eta) / scale)),
        "max_uu_drift": float(np.max(np.abs(series.uu_drift))),
        "max_ueta_drift": float(np.max(np.abs(series.ueta_drift))),
    }
    tag = {"metric": cfg["metric"], "form": cfg["form"], "curvature_ordering": cfg["curvature_ordering"],
           "signature": "+---"}
    return ScenarioResult([table], summary, tag)


def run_critical_sweep(cfg: RunConfig) -> ScenarioResult:
    masses = np.logspace(math.log10(cfg["m_min"]), math.log10(cfg["m_max"]), cfg["n_masses"])
    si = cfg["units"] == "SI"
    system = UnitSystem.si() if si else UnitSystem.natural()
    kw = {"n": cfg["n"]}
    s_star = np.array([criticality.critical_width(m, units=system if si else None, **kw) for m in masses])
    diosi = criticality.diosi_width(masses, system)
    sweep = [(float(m), float(s), float(d), float(s / d)) for m, s, d in zip(masses, s_star, diosi)]
    t_sweep = Table("sigma_star.csv", ["m", "sigma_star", "diosi_width", "coefficient"], sweep)

    u = _Units(cfg)
    centre = criticality.critical_width(u.m, **kw)
    half = 0.5 * cfg["sigma_decades"]
    sigmas = centre * np.logspace(-half, half, cfg["n_sigma"])
    rep = criticality.energy_profile(u.m, sigmas, RADIAL3D, n=cfg["n"])
    prof = [(u.outward(s, LENGTH), u.outward(q, ENERGY), u.outward(g, ENERGY), u.outward(q + g, ENERGY))
            for s, q, g in zip(rep.sigmas, rep.mean_q, rep.mean_ug)]
    t_prof = Table("energy_profile.csv", ["sigma", "mean_q", "mean_ug", "energy"], prof)
    coeff = s_star / diosi
    summary = {
        "slope_sigma_star": criticality.loglog_slope(masses, s_star),
        "coefficient_mean": float(coeff.mean()),
        "coefficient_spread": float(np.ptp(coeff) / coeff.mean()),
        "slope_mean_q": rep.slope_q,
        "slope_mean_ug": rep.slope_ug,
        "sigma_star_at_mass": u.outward(centre, LENGTH),
    }
    return ScenarioResult([t_sweep, t_prof], summary,
                          {"criterion": "stationary total energy", "geometry": RADIAL3D})


def run_collapse_profile(cfg: RunConfig) -> ScenarioResult:
    u = _Units(cfg)
    conv = cfg["convention"]
    grid = collapse.profile_grid(u.m, conv, extent=cfg["extent"], n=cfg["n"])
    guess = None if cfg["sigma_guess"] == AUTO else u.inward(cfg["sigma_guess"], LENGTH)
    prof = collapse.solve_collapse_profile(u.m, conv, guess, grid=grid, mixing=cfg["mixing"],
                                          max_sweeps=cfg["max_sweeps"])
    rows = [
        (u.outward(r, LENGTH), u.outward(rho, INV_VOLUME), u.outward(q, ENERGY), u.outward(res, ENERGY_PER_AREA))
        for r, rho, q, res in zip(grid.x, prof.rho.values, prof.Q.values, prof.residual.values)
    ]
    scale = prof.source_scale
    trace = [(i + 1, float(v), float(v / scale)) for i, v in enumerate(prof.trace)]
    summary = {
        "width": u.outward(prof.width, LENGTH),
        "diosi_width": u.outward(float(criticality.diosi_width(u.m)), LENGTH),
        "energy": u.outward(prof.energy, ENERGY),
        "sweeps": prof.sweeps,
        "relative_residual": prof.relative_residual,
    }
    return ScenarioResult([Table("profile.csv", ["r", "rho", "Q", "residual"], rows),
                           Table("trace.csv", ["sweep", "residual_norm", "relative_residual"], trace)],
                          summary, {"convention": conv, "sign": "lap Q = -4 pi G m^k rho"})


RUNNERS = {
    "free-spread": run_free_spread,
    "sn-collapse": run_sn_collapse,
    "trajectories": run_trajectories,
    "deviation": run_deviation,
    "relativistic-demo": run_relativistic_demo,
    "critical-sweep": run_critical_sweep,
    "collapse-profile": run_collapse_profile,
}

def run_scenario(cfg: RunConfig) -> ScenarioResult:
    return RUNNERS[cfg.scenario](cfg)

