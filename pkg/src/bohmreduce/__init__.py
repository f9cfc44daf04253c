"""Bohmian trajectories, Schrodinger-Newton evolution and gravitational reduction.

Submodules:
    fields        grids, fields, stencils, units, polar decomposition
    quantum       quantum potential, quantum force, Gaussian closed forms
    gravity       self-gravity potential and self-energy
    evolve        Crank-Nicolson Schrodinger-Newton integration
    trajectories  guidance-equation ensembles and diagnostics
    deviation     tidal field, deviation dynamics, balance residual
    relativistic  congruences with Bohmian acceleration on fixed metrics
    criticality   energy profiles, critical width, body-size scaling
    collapse      Poisson-like equation for Q and its radial solver
    cli           batch scenario runner
"""

__version__ = "0.1.0"
