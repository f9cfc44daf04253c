"""Relativistic Bohmian congruences on fixed metrics."""
import numpy as np
import pytest
import sympy as sp
from scipy.integrate import cumulative_trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmreduce.errors import ConstraintDriftError, TachyonicError
from bohmreduce.relativistic import (
    EXACT_LOG, JACOBI, LINEARIZED, PRINTED, QFieldModel, RelCongruenceState, acceleration_at,
    bohmian_acceleration, christoffel_from_metric, covariant_jacobian, deviation_rhs,
    four_momentum, integrate_congruence, minkowski, quantum_mass, weak_field,
    weak_field_symbolic,
)

T, X, Y, Z = sp.symbols("t x y z")
COORDS = (T, X, Y, Z)
DEPTH, CORE = 0.05, 1.0
PHI = -DEPTH / sp.sqrt(X**2 + Y**2 + Z**2 + CORE**2)


@pytest.fixture(scope="module")
def plummer_exact():
    return weak_field_symbolic(PHI, COORDS)


@pytest.fixture(scope="module")
def plummer_fast():
    phi = sp.lambdify([(X, Y, Z)], PHI)
    grad = sp.lambdify([(X, Y, Z)], [sp.diff(PHI, c) for c in (X, Y, Z)])
    return weak_field(lambda p: float(phi(p)), lambda p: np.array(grad(p), dtype=float))


def _unit_timelike(g, spatial):
    """Future unit vector with the given spatial components."""
    s = np.asarray(spatial, dtype=float)
    u = np.concatenate([[0.0], s])
    # g00 u0^2 + 2 g0i u0 s_i + g_ij s_i s_j = 1
    a, b, c = g[0, 0], 2 * g[0, 1:] @ s, s @ g[1:, 1:] @ s - 1.0
    u[0] = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return u


def _orthogonal(g, u, spatial):
    e = np.concatenate([[0.0], np.asarray(spatial, dtype=float)])
    return e - (u @ g @ e) * u


def test_quantum_mass_examples():
    assert quantum_mass(0.0, 2.5) == 2.5
    assert quantum_mass(3.0, 1.5) == pytest.approx(3.0, rel=1e-15)
    for bad in (-1.0, -2.0):
        with pytest.raises(TachyonicError):
            quantum_mass(bad, 1.0)


@given(st.lists(st.floats(-0.9, 0.9), min_size=3, max_size=3), st.floats(-0.5, 2.0))
@settings(max_examples=40, deadline=None)
def test_four_momentum_norm(vel, q):
    v = np.array(vel)
    if v @ v >= 0.99:
        v = v * 0.9 / np.sqrt(v @ v)
    gamma = 1 / np.sqrt(1 - v @ v)
    u = gamma * np.concatenate([[1.0], v])
    p = four_momentum(u, q, 1.3)
    eta = np.diag([1.0, -1, -1, -1])
    assert p @ eta @ p == pytest.approx(quantum_mass(q, 1.3) ** 2, rel=1e-12)


def _random_q(rng):
    c = rng.uniform(-0.05, 0.05, 5)
    return QFieldModel(lambda x: c[0] + c[1:] @ np.sin(x),
                       lambda x: c[1:] * np.cos(x))


def test_constant_q_gives_no_acceleration():
    s = RelCongruenceState([0, 0.2, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0])
    for form in (EXACT_LOG, LINEARIZED):
        np.testing.assert_array_equal(bohmian_acceleration(s, QFieldModel.constant(0.05), form), 0.0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_acceleration_orthogonal_to_velocity(seed):
    rng = np.random.default_rng(seed)
    metric = minkowski() if seed % 2 else weak_field(lambda p: -0.01 / np.sqrt(1 + p @ p),
                                                     lambda p: 0.01 * p / (1 + p @ p) ** 1.5)
    x = rng.uniform(-2, 2, 4)
    u = _unit_timelike(metric.metric(x), rng.uniform(-0.5, 0.5, 3))
    q = _random_q(rng)
    for form in (EXACT_LOG, LINEARIZED):
        a = acceleration_at(x, u, metric, q, form)
        assert abs(metric.dot(x, u, a)) <= 1e-10 * max(1.0, np.abs(a).max())


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_linearization_error_is_first_order_in_q(seed):
    rng = np.random.default_rng(seed)
    metric = minkowski()
    x = rng.uniform(-2, 2, 4)
    u = _unit_timelike(metric.metric(x), rng.uniform(-0.6, 0.6, 3))
    q0 = rng.uniform(-0.1, 0.1)
    grad = rng.uniform(-1, 1, 4)
    qf = QFieldModel(lambda y: q0, lambda y: grad)
    diff = acceleration_at(x, u, metric, qf, EXACT_LOG) - acceleration_at(x, u, metric, qf, LINEARIZED)
    projected = 0.5 * (metric.inverse(x) @ grad - u * (u @ grad))
    # exact - linearized = -Q / (1 + Q) * (projected gradient term), elementwise
    np.testing.assert_allclose(diff, -q0 / (1 + q0) * projected, rtol=1e-9, atol=1e-15)
    bound = abs(q0) / (1 - abs(q0)) * np.abs(projected)
    assert np.all(np.abs(diff) <= bound * (1 + 1e-12) + 1e-15)


def test_quadratic_remainder_does_not_bound_the_difference():
    metric = minkowski()
    x, u = np.zeros(4), np.array([1.0, 0, 0, 0])
    q0, grad = 0.05, np.array([0.0, 1.0, 0, 0])
    qf = QFieldModel(lambda y: q0, lambda y: grad)
    diff = acceleration_at(x, u, metric, qf, EXACT_LOG) - acceleration_at(x, u, metric, qf, LINEARIZED)
    quadratic = 0.5 * q0**2 * np.abs(grad) / (1 - q0)
    assert np.abs(diff[1]) > quadratic[1]


def test_flat_zero_q_rhs_vanishes():
    s = RelCongruenceState([0, 0.1, 0.2, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0.3, 0, 0])
    np.testing.assert_allclose(deviation_rhs(s, minkowski(), QFieldModel.constant(0.0)), 0.0, atol=1e-15)


def test_flat_weak_q_reduces_to_nonrelativistic_tide():
    q0, L = 1e-4, 1.3
    qf = QFieldModel.from_sympy(q0 * (1 - X**2 / (2 * L**2)) + 0.3 * q0 * sp.sin(Y), COORDS)
    x = np.array([0.0, 0.4, 0.2, 0.0])
    s = RelCongruenceState(x, [1, 0, 0, 0], [0, 1e-2, 0, 0], [0, 0, 0, 0])
    rhs = deviation_rhs(s, minkowski(), qf, eps=1e-4)
    # Q_rel ~ 2 Q_nr / m, so D = -(1/m) Q_nr'' = -Q_rel'' / 2
    D = q0 / (2 * L**2)
    assert rhs[1] == pytest.approx(D * 1e-2, rel=1e-4)
    # the log form couples x and y only at second order in Q
    assert abs(rhs[2]) < 1e-4 * abs(rhs[1]) and abs(rhs[3]) < 1e-4 * abs(rhs[1])


def test_pure_curvature_term_from_analytic_riemann(plummer_exact):
    m = plummer_exact
    x = np.array([0.0, 0.7, -0.3, 0.2])
    u = _unit_timelike(m.metric(x), [0.05, 0.0, 0.02])
    eta = _orthogonal(m.metric(x), u, [0.01, 0.02, 0.0])
    s = RelCongruenceState(x, u, eta, [0, 0, 0, 0])
    rhs = deviation_rhs(s, m, QFieldModel.constant(0.0))
    jacobi = np.einsum("mrln,r,l,n->m", m.riemann(x), u, u, eta)
    np.testing.assert_allclose(rhs, jacobi, atol=1e-6 * np.abs(jacobi).max())
    printed = deviation_rhs(s, m, QFieldModel.constant(0.0), curvature_ordering=PRINTED)
    np.testing.assert_allclose(printed, -rhs, atol=1e-15)


def test_static_tide_matches_newtonian_sign(plummer_exact):
    m = plummer_exact
    x = np.zeros(4)
    u = _unit_timelike(m.metric(x), [0, 0, 0])
    s = RelCongruenceState(x, u, [0, 1e-3, 0, 0], [0, 0, 0, 0])
    rhs = deviation_rhs(s, m, QFieldModel.constant(0.0), curvature_ordering=JACOBI)
    # Newtonian tide at the centre of a Plummer well: -depth / core^3
    assert rhs[1] == pytest.approx(-DEPTH / CORE**3 * 1e-3, rel=0.1)


def test_christoffels_and_riemann(plummer_exact, plummer_fast):
    x = np.array([0.3, 0.2, -0.1, 0.4])
    np.testing.assert_allclose(plummer_fast.christoffel(x), plummer_exact.christoffel(x), atol=1e-15)
    fd = christoffel_from_metric(plummer_exact.metric, x, 1e-4)
    np.testing.assert_allclose(fd, plummer_exact.christoffel(x), atol=1e-9)
    R = plummer_exact.riemann(x)
    errs = [np.abs(plummer_exact.__class__(plummer_exact.g, plummer_exact.christoffel_fn, None, h)
                   .riemann_numeric(x) - R).max() for h in (4e-3, 2e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.6)
    np.testing.assert_allclose(plummer_fast.riemann(x), R, atol=1e-8 * np.abs(R).max())


def test_curvature_commutator(plummer_exact):
    m = plummer_exact
    A = lambda y: np.array([1.0 + 0.1 * y[1], 0.2 * y[2], np.sin(y[1]) * 0.3, 0.1 * y[3] ** 2])
    x = np.array([0.0, 0.5, -0.4, 0.3])
    h = 1e-3

    def second(x):
        J = covariant_jacobian(A, m, x, h=1e-5)  # J[mu, nu] = nabla_nu A^mu
        return J

    dJ = np.stack([(second(x + h * e) - second(x - h * e)) / (2 * h) for e in np.eye(4)], axis=-1)
    G = m.christoffel(x)
    J = second(x)
    # C[mu, nu, lam] = nabla_lam nabla_nu A^mu
    C = dJ + np.einsum("mls,sn->mnl", G, J) - np.einsum("sln,ms->mnl", G, J)
    commutator = C - C.transpose(0, 2, 1)  # [mu, nu, lam] -> [nabla_lam, nabla_nu]
    expected = np.einsum("mrln,r->mnl", m.riemann(x), A(x))
    np.testing.assert_allclose(commutator, expected, atol=1e-6 * max(1e-3, np.abs(expected).max()))
    assert np.abs(expected).max() > 1e-3


def test_flat_free_congruence_is_affine():
    flat, q = minkowski(), QFieldModel.constant(0.0)
    s0 = RelCongruenceState([0, 0, 0, 0], [1, 0, 0, 0], [0, 0.3, 0.1, 0], [0, 0, 0, 0])
    ser = integrate_congruence(s0, flat, q, 0.5, 50.0)
    np.testing.assert_allclose(ser.eta, np.broadcast_to(s0.eta, ser.eta.shape), atol=1e-10)
    s1 = RelCongruenceState([0, 0, 0, 0], [1, 0, 0, 0], [0, 0.3, 0.1, 0], [0, 0.01, -0.02, 0.005])
    ser = integrate_congruence(s1, flat, q, 0.5, 50.0)
    np.testing.assert_allclose(ser.eta, s1.eta + ser.tau[:, None] * s1.v, atol=1e-10)


def _curved_run(m, spatial_eta):
    x = np.array([0.0, 0.5, 0.0, 0.0])
    u = _unit_timelike(m.metric(x), [0.0, 0.05, 0.0])
    eta = _orthogonal(m.metric(x), u, spatial_eta)
    q = QFieldModel.from_sympy(1e-3 * sp.exp(-(X**2 + Y**2)), COORDS)
    return q, integrate_congruence(RelCongruenceState(x, u, eta, [0, 0, 0, 0]), m, q, 0.25, 20.0)


def test_constraints_hold_on_curved_run(plummer_fast):
    # eta along z stays normal to the acceleration, which lies in the x-y plane
    _, ser = _curved_run(plummer_fast, [0, 0, 1e-3])
    assert np.max(np.abs(ser.uu_drift)) < 1e-6
    assert np.max(np.abs(ser.ueta_drift)) < 1e-6


def test_orthogonality_drifts_at_rate_a_dot_eta(plummer_fast):
    m = plummer_fast
    q, ser = _curved_run(m, [1e-3, 0, 0])
    rate = []
    for i in range(ser.tau.size):
        st_ = ser.state(i)
        a = acceleration_at(st_.x, st_.u, m, q)
        rate.append(m.dot(st_.x, a, st_.eta) + m.dot(st_.x, st_.u, st_.v))
    expected = cumulative_trapezoid(rate, ser.tau, initial=0.0)
    assert np.max(np.abs(ser.ueta_drift)) > 1e-6
    np.testing.assert_allclose(ser.ueta_drift, expected, atol=1e-3 * np.max(np.abs(expected)))


def test_lie_bracket_against_family_of_worldlines(plummer_fast):
    m = plummer_fast
    q = QFieldModel.from_sympy(2e-3 * sp.exp(-(X**2 + Y**2) / 2), COORDS)
    delta = 1e-4

    def initial(s):
        x = np.array([0.0, 0.6 + s, 0.1, 0.0])
        return x, _unit_timelike(m.metric(x), [0.0, 0.03, 0.0])

    x0, u0 = initial(0.0)
    (xp, up), (xm, um) = initial(delta), initial(-delta)
    eta0 = (xp - xm) / (2 * delta)
    du = (up - um) / (2 * delta)
    # D eta / dtau = nabla_eta u when the bracket [u, eta] vanishes
    v0 = du + np.einsum("mlr,l,r->m", m.christoffel(x0), eta0, u0)
    ser = integrate_congruence(RelCongruenceState(x0, u0, eta0, v0), m, q, 0.1, 10.0,
                               constraint_tol=1e-5)
    plus = integrate_congruence(RelCongruenceState(xp, up, np.zeros(4), np.zeros(4)), m, q, 0.1, 10.0,
                                constraint_tol=1e-5)
    minus = integrate_congruence(RelCongruenceState(xm, um, np.zeros(4), np.zeros(4)), m, q, 0.1, 10.0,
                                 constraint_tol=1e-5)
    fd = (plus.x - minus.x) / (2 * delta)
    np.testing.assert_allclose(ser.eta, fd, atol=1e-5)


def test_initial_constraints_and_drift_abort():
    flat, q = minkowski(), QFieldModel.constant(0.0)
    with pytest.raises(ValueError):
        integrate_congruence(RelCongruenceState([0] * 4, [1.1, 0, 0, 0], [0] * 4, [0] * 4), flat, q, 0.1, 1.0)
    with pytest.raises(ValueError):
        integrate_congruence(RelCongruenceState([0] * 4, [1, 0, 0, 0], [0.1, 0, 0, 0], [0] * 4), flat, q, 0.1, 1.0)
    strong = QFieldModel.from_sympy(0.3 * sp.sin(3 * X), COORDS)
    u = np.array([np.cosh(0.5), np.sinh(0.5), 0, 0])
    with pytest.raises(ConstraintDriftError):
        integrate_congruence(RelCongruenceState([0] * 4, u, [0] * 4, [0] * 4), flat, strong, 1.0, 20.0,
                             constraint_tol=1e-12)


def test_tachyonic_worldline_aborts():
    q = QFieldModel(lambda x: -1.5, lambda x: np.zeros(4))
    s = RelCongruenceState([0] * 4, [1, 0, 0, 0], [0] * 4, [0] * 4)
    with pytest.raises(TachyonicError):
        bohmian_acceleration(s, q)
