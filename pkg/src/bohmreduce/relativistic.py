"""Relativistic Bohmian congruences on a fixed background metric.

Conventions: signature (+,-,-,-), c = 1, coordinates x^mu = (t, x, y, z).
Christoffel arrays are indexed ``G[mu, nu, rho] = Gamma^mu_{nu rho}`` and
Riemann arrays ``R[mu, rho, lam, nu] = R^mu_{rho lam nu}`` with

    [nabla_lam, nabla_nu] A^mu = R^mu_{rho lam nu} A^rho.

The Bohmian acceleration is a^mu = 1/2 (g^{mu nu} - u^mu u^nu) d_nu L with
L = ln(1 + Q) (``exact_log``) or L = Q (``linearized``); Q here is the
dimensionless relativistic quantum potential. In the nonrelativistic limit
Q ~ 2 Q_nr / m, so the spatial acceleration is -(1/m) grad Q_nr.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .errors import ConstraintDriftError, TachyonicError

EXACT_LOG = "exact_log"
LINEARIZED = "linearized"
FORMS = (EXACT_LOG, LINEARIZED)

# R^mu_{rho lam nu} u^rho u^lam eta^nu reproduces Newtonian tides;
# "printed" contracts R^mu_{rho lam nu} u^rho eta^lam u^nu, its negative.
JACOBI = "jacobi"
PRINTED = "printed"
CURVATURE_ORDERINGS = (JACOBI, PRINTED)

CONSTRAINT_TOLERANCE = 1e-6
MINKOWSKI = np.diag([1.0, -1.0, -1.0, -1.0])


def quantum_mass(Q_val, m: float):
    """M = m sqrt(1 + Q); raises TachyonicError when 1 + Q <= 0."""
    q = np.asarray(Q_val, dtype=float)
    if np.any(1.0 + q <= 0):
        raise TachyonicError("1 + Q <= 0: quantum mass is imaginary", {"Q": q.tolist()})
    return m * np.sqrt(1.0 + q)


def four_momentum(u, Q_val, m: float) -> np.ndarray:
    """p^mu = M u^mu."""
    return quantum_mass(Q_val, m) * np.asarray(u, dtype=float)


def _fd_jacobian(fn, x, h):
    """d fn / dx^lam stacked on a new last axis, central differences."""
    x = np.asarray(x, dtype=float)
    cols = []
    for lam in range(4):
        e = np.zeros(4)
        e[lam] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def christoffel_from_metric(g_fn, x, h=1e-4) -> np.ndarray:
    g_inv = np.linalg.inv(g_fn(x))
    dg = _fd_jacobian(g_fn, x, h)  # dg[s, r, n] = d_n g_{s r}
    # Gamma^mu_{nu rho} = 1/2 g^{mu s} (d_nu g_{s rho} + d_rho g_{s nu} - d_s g_{nu rho})
    lower = dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)
    return 0.5 * np.einsum("ms,snr->mnr", g_inv, lower)


def riemann_from_christoffel(gamma_fn, x, h=1e-4) -> np.ndarray:
    G = gamma_fn(x)
    dG = _fd_jacobian(gamma_fn, x, h)  # dG[m, n, r, l] = d_l Gamma^m_{n r}
    # R^m_{r l n} = d_l G^m_{n r} - d_n G^m_{l r} + G^m_{l s} G^s_{n r} - G^m_{n s} G^s_{l r}
    term1 = np.einsum("mnrl->mrln", dG)
    term2 = np.einsum("mlrn->mrln", dG)
    quad = np.einsum("mls,snr->mrln", G, G)
    return term1 - term2 + quad - quad.transpose(0, 1, 3, 2)


@dataclass
class MetricModel:
    """Metric evaluator with optional analytic Christoffel and Riemann evaluators.

    Missing evaluators fall back to central differences with step ``fd_step``.
    ``length_scale`` sets the default displacement for directional derivatives.
    """

    g: Callable
    christoffel_fn: Callable | None = None
    riemann_fn: Callable | None = None
    fd_step: float = 1e-4
    length_scale: float = 1.0
    name: str = "custom"

    def metric(self, x) -> np.ndarray:
        g = np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)
        if g.shape != (4, 4) or not np.allclose(g, g.T, rtol=0, atol=1e-14):
            raise ValueError("metric must be a symmetric 4x4 array")
        if abs(np.linalg.det(g)) < 1e-300:
            raise ValueError("metric is degenerate at the probed point")
        return g

    def inverse(self, x) -> np.ndarray:
        return np.linalg.inv(self.metric(x))

    def christoffel(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.christoffel_fn is not None:
            return np.asarray(self.christoffel_fn(x), dtype=float)
        return christoffel_from_metric(self.metric, x, self.fd_step)

    def riemann(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.riemann_fn is not None:
            return np.asarray(self.riemann_fn(x), dtype=float)
        return riemann_from_christoffel(self.christoffel, x, self.fd_step)

    def riemann_numeric(self, x) -> np.ndarray:
        """Finite-difference Riemann irrespective of any analytic evaluator."""
        return riemann_from_christoffel(self.christoffel, np.asarray(x, dtype=float), self.fd_step)

    def dot(self, x, a, b) -> float:
        return float(np.asarray(a) @ self.metric(x) @ np.asarray(b))


def minkowski() -> MetricModel:
    return MetricModel(
        g=lambda x: MINKOWSKI.copy(),
        christoffel_fn=lambda x: np.zeros((4, 4, 4)),
        riemann_fn=lambda x: np.zeros((4, 4, 4, 4)),
        name="minkowski",
    )


def weak_field(phi: Callable, grad_phi: Callable, fd_step: float = 1e-4,
               length_scale: float = 1.0) -> MetricModel:
    """ds^2 = (1 + 2 phi) dt^2 - (1 - 2 phi) dx^2 for a static phi(x, y, z).

    ``phi`` and ``grad_phi`` take the spatial point (3,). Christoffels are
    exact for this metric; Riemann is differenced from them.
    """

    def g(x):
        p = phi(x[1:])
        return np.diag([1.0 + 2.0 * p, -(1.0 - 2.0 * p), -(1.0 - 2.0 * p), -(1.0 - 2.0 * p)])

    def gamma(x):
        p = phi(x[1:])
        d = np.asarray(grad_phi(x[1:]), dtype=float)
        A, B = 1.0 + 2.0 * p, 1.0 - 2.0 * p
        G = np.zeros((4, 4, 4))
        G[0, 0, 1:] = G[0, 1:, 0] = d / A
        G[1:, 0, 0] = d / B
        eye = np.eye(3)
        # Gamma^i_{jk} = -(1/B)(d_j phi delta_ik + d_k phi delta_ij - d_i phi delta_jk)
        G[1:, 1:, 1:] = -(np.einsum("j,ik->ijk", d, eye) + np.einsum("k,ij->ijk", d, eye)
                          - np.einsum("i,jk->ijk", d, eye)) / B
        return G

    return MetricModel(g, gamma, None, fd_step, length_scale, "weak_field")


def symbolic_metric(g_matrix, coords, name: str = "symbolic", length_scale: float = 1.0,
                    fd_step: float = 1e-4) -> MetricModel:
    """MetricModel whose Christoffel and Riemann evaluators are exact (sympy)."""
    g_matrix = sp.Matrix(g_matrix)
    g_inv = g_matrix.inv()
    n = 4
    Gam = [[[sp.simplify(sum(g_inv[m, s] * (sp.diff(g_matrix[s, r], coords[nu])
                                            + sp.diff(g_matrix[s, nu], coords[r])
                                            - sp.diff(g_matrix[nu, r], coords[s])) for s in range(n)) / 2)
             for r in range(n)] for nu in range(n)] for m in range(n)]
    Riem = [[[[sp.diff(Gam[m][nu][r], coords[l]) - sp.diff(Gam[m][l][r], coords[nu])
               + sum(Gam[m][l][s] * Gam[s][nu][r] - Gam[m][nu][s] * Gam[s][l][r] for s in range(n))
               for nu in range(n)] for l in range(n)] for r in range(n)] for m in range(n)]
    g_f = sp.lambdify([coords], g_matrix, "numpy")
    G_f = sp.lambdify([coords], Gam, "numpy")
    R_f = sp.lambdify([coords], Riem, "numpy")

    def as_array(f, shape):
        return lambda x: np.array(f(np.asarray(x, dtype=float)), dtype=float).reshape(shape)

    return MetricModel(as_array(g_f, (4, 4)), as_array(G_f, (4, 4, 4)), as_array(R_f, (4, 4, 4, 4)),
                       fd_step, length_scale, name)


def weak_field_symbolic(phi_expr, coords, **kw) -> MetricModel:
    """Exact weak-field metric for a sympy potential phi(x, y, z)."""
    g = sp.diag(1 + 2 * phi_expr, -(1 - 2 * phi_expr), -(1 - 2 * phi_expr), -(1 - 2 * phi_expr))
    return symbolic_metric(g, coords, name="weak_field", **kw)


@dataclass
class QFieldModel:
    """Dimensionless quantum potential Q(x) and its covariant gradient d_mu Q."""

    value: Callable
    gradient: Callable | None = None
    fd_step: float = 1e-5
    name: str = "custom"

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return _fd_jacobian(lambda y: np.atleast_1d(self.value(y)), x, self.fd_step)[0]

    @classmethod
    def constant(cls, q: float = 0.0) -> "QFieldModel":
        return cls(lambda x: q, lambda x: np.zeros(4), name=f"constant({q:g})")

    @classmethod
    def from_sympy(cls, expr, coords, name: str = "symbolic") -> "QFieldModel":
        f = sp.lambdify([coords], expr, "numpy")
        df = sp.lambdify([coords], [sp.diff(expr, c) for c in coords], "numpy")
        return cls(lambda x: float(f(x)), lambda x: np.array(df(x), dtype=float), name=name)


@dataclass
class RelCongruenceState:
    x: np.ndarray
    u: np.ndarray
    eta: np.ndarray
    v: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        for name in ("x", "u", "eta", "v"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (4,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 4-vector")
            setattr(self, name, arr)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.x, self.u, self.eta, self.v])

    @classmethod
    def unpack(cls, y, tau: float) -> "RelCongruenceState":
        return cls(y[0:4], y[4:8], y[8:12], y[12:16], tau)

    def constraints(self, metric: MetricModel) -> tuple[float, float]:
        """(u.u, u.eta) at the current event."""
        g = metric.metric(self.x)
        return float(self.u @ g @ self.u), float(self.u @ g @ self.eta)


def _log_gradient(qfield: QFieldModel, x, form: str) -> np.ndarray:
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    q = qfield(x)
    if 1.0 + q <= 0:
        raise TachyonicError("1 + Q <= 0 on the worldline", {"x": list(map(float, x)), "Q": q})
    dq = qfield.grad(x)
    return dq / (1.0 + q) if form == EXACT_LOG else dq


def acceleration_at(x, u, metric: MetricModel, qfield: QFieldModel, form: str = EXACT_LOG) -> np.ndarray:
    dL = _log_gradient(qfield, x, form)
    g_inv = metric.inverse(x)
    return 0.5 * (g_inv @ dL - u * (u @ dL))


def bohmian_acceleration(state: RelCongruenceState, qfield: QFieldModel, form: str = EXACT_LOG,
                         metric: MetricModel | None = None) -> np.ndarray:
    """a^mu = 1/2 (g^{mu nu} - u^mu u^nu) d_nu L; flat metric unless one is given."""
    metric = metric or minkowski()
    return acceleration_at(state.x, state.u, metric, qfield, form)


def deviation_rhs(state: RelCongruenceState, metric: MetricModel, qfield: QFieldModel,
                  form: str = EXACT_LOG, eps: float | None = None,
                  curvature_ordering: str = JACOBI) -> np.ndarray:
    """D^2 eta / dtau^2 = eta^lam nabla_lam a^mu + curvature term.

    The derivative of a along eta is a symmetric difference at x +- eps eta,
    with the neighbouring four-velocity u +- eps (v - Gamma(eta, u)) taken
    from the congruence, then completed to a covariant derivative.
    """
    if curvature_ordering not in CURVATURE_ORDERINGS:
        raise ValueError(f"curvature_ordering must be one of {CURVATURE_ORDERINGS}")
    x, u, eta, v = state.x, state.u, state.eta, state.v
    eps = 1e-4 * metric.length_scale if eps is None else eps
    G = metric.christoffel(x)
    du = v - np.einsum("mlr,l,r->m", G, eta, u)
    a_plus = acceleration_at(x + eps * eta, u + eps * du, metric, qfield, form)
    a_minus = acceleration_at(x - eps * eta, u - eps * du, metric, qfield, form)
    a0 = acceleration_at(x, u, metric, qfield, form)
    grad_a = (a_plus - a_minus) / (2.0 * eps) + np.einsum("mls,l,s->m", G, eta, a0)
    R = metric.riemann(x)
    if curvature_ordering == JACOBI:
        curv = np.einsum("mrln,r,l,n->m", R, u, u, eta)
    else:
        curv = np.einsum("mrln,r,l,n->m", R, u, eta, u)
    return grad_a + curv


@dataclass
class CongruenceSeries:
    tau: np.ndarray
    x: np.ndarray
    u: np.ndarray
    eta: np.ndarray
    v: np.ndarray
    uu_drift: np.ndarray
    ueta_drift: np.ndarray

    def state(self, i: int) -> RelCongruenceState:
        return RelCongruenceState(self.x[i], self.u[i], self.eta[i], self.v[i], float(self.tau[i]))


def integrate_congruence(state0: RelCongruenceState, metric: MetricModel, qfield: QFieldModel,
                         dtau: float, tau_end: float, form: str = EXACT_LOG, eps: float | None = None,
                         curvature_ordering: str = JACOBI,
                         constraint_tol: float = CONSTRAINT_TOLERANCE) -> CongruenceSeries:
    """RK4 for (x, u, eta, v) in coordinate components:

        x' = u,  u' = -Gamma(u, u) + a,  eta' = v - Gamma(u, eta),  v' = rhs - Gamma(u, v).

    u.u is monitored, never projected; the run aborts once it drifts by more
    than ``constraint_tol``. u.eta drift is recorded.
    """
    uu0, ue0 = state0.constraints(metric)
    if abs(uu0 - 1.0) > 1e-8:
        raise ValueError(f"initial four-velocity is not unit: u.u = {uu0}")
    if abs(ue0) > 1e-8:
        raise ValueError(f"initial deviation is not orthogonal to u: u.eta = {ue0}")
    nsteps = int(math.ceil(tau_end / dtau - 1e-9)) if tau_end > 0 else 0
    if nsteps:
        dtau = tau_end / nsteps

    def f(tau, y):
        s = RelCongruenceState.unpack(y, tau)
        G = metric.christoffel(s.x)
        a = acceleration_at(s.x, s.u, metric, qfield, form)
        rhs = deviation_rhs(s, metric, qfield, form, eps, curvature_ordering)
        return np.concatenate([
            s.u,
            -np.einsum("mnr,n,r->m", G, s.u, s.u) + a,
            s.v - np.einsum("mnr,n,r->m", G, s.u, s.eta),
            rhs - np.einsum("mnr,n,r->m", G, s.u, s.v),
        ])

    y = state0.pack()
    ys = np.empty((nsteps + 1, 16))
    ys[0] = y
    uu = np.zeros(nsteps + 1)
    ue = np.zeros(nsteps + 1)
    for k in range(nsteps):
        tau = k * dtau
        k1 = f(tau, y)
        k2 = f(tau + 0.5 * dtau, y + 0.5 * dtau * k1)
        k3 = f(tau + 0.5 * dtau, y + 0.5 * dtau * k2)
        k4 = f(tau + dtau, y + dtau * k3)
        y = y + dtau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys[k + 1] = y
        c_uu, c_ue = RelCongruenceState.unpack(y, tau + dtau).constraints(metric)
        uu[k + 1], ue[k + 1] = c_uu - uu0, c_ue - ue0
        if abs(uu[k + 1]) > constraint_tol:
            raise ConstraintDriftError(
                f"u.u drifted by {uu[k + 1]:.3e} at tau = {tau + dtau:g}",
                {"tau": tau + dtau, "uu_drift": float(uu[k + 1]), "ueta_drift": float(ue[k + 1])},
            )
    taus = dtau * np.arange(nsteps + 1)
    return CongruenceSeries(taus, ys[:, 0:4], ys[:, 4:8], ys[:, 8:12], ys[:, 12:16], uu, ue)


def covariant_jacobian(A: Callable, metric: MetricModel, x, h: float = 1e-4) -> np.ndarray:
    """nabla_nu A^mu of a vector field, indexed [mu, nu]."""
    x = np.asarray(x, dtype=float)
    dA = _fd_jacobian(A, x, h)
    return dA + np.einsum("mnr,r->mn", metric.christoffel(x), A(x))
