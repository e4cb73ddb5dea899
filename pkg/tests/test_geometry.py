import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covariant_control.checks import sectional_curvature
from covariant_control.geometry import (DegenerateMetricError, MetricProvider, PotentialProvider,
                                        central_difference, check_ricci_identity,
                                        covariant_hessian_V, covariant_time_derivative_covector,
                                        curvature_force, eval_geometry, lower_index, raise_index)
from covariant_control.models import build_model

import frozen


def const_metric(M):
    M = np.asarray(M, dtype=float)
    return MetricProvider(M.shape[0], lambda q: np.broadcast_to(M, np.shape(q)[:-1] + M.shape).copy())


def test_flat_metric_has_no_connection_or_curvature(flat2, rng):
    g = eval_geometry(flat2.metric, rng.normal(size=(7, 2)))
    assert np.all(g.christoffel == 0) and np.all(g.riemann == 0)


def test_constant_pendulum_metric(pendulum):
    g = eval_geometry(pendulum.metric, np.array([0.4]))
    assert g.metric[0, 0] == 1.0
    assert np.all(g.christoffel == 0) and np.all(g.riemann == 0)


def test_sphere_christoffel_matches_frozen(sphere):
    g = eval_geometry(sphere.metric, np.array(frozen.SPHERE_Q))
    for idx, val in frozen.SPHERE_CHRISTOFFEL.items():
        assert g.christoffel[idx] == pytest.approx(val, abs=1e-14)


def test_sphere_riemann_matches_frozen(sphere):
    g = eval_geometry(sphere.metric, np.array(frozen.SPHERE_Q))
    for idx, val in frozen.SPHERE_RIEMANN.items():
        assert g.riemann[idx] == pytest.approx(val, abs=1e-12)
    assert sectional_curvature(g) == pytest.approx(frozen.SPHERE_SECTIONAL, abs=1e-12)


def test_sphere_fd_path_riemann(sphere):
    g = eval_geometry(sphere.metric.without_derivatives(), np.array(frozen.SPHERE_Q))
    for idx, val in frozen.SPHERE_RIEMANN.items():
        assert g.riemann[idx] == pytest.approx(val, abs=1e-6)


def test_double_pendulum_riemann_matches_frozen(dpend):
    g = eval_geometry(dpend.metric, np.array(frozen.DP_Q))
    for idx, val in frozen.DP_RIEMANN.items():
        assert g.riemann[idx] == pytest.approx(val, rel=1e-12, abs=1e-13)
    assert sectional_curvature(g) == pytest.approx(frozen.DP_SECTIONAL, rel=1e-12)


def test_double_pendulum_sectional_closed_form(dpend, rng):
    q = dpend.sample(rng, 50)
    K = sectional_curvature(eval_geometry(dpend.metric, q))
    expect = -np.cos(q[:, 1]) / (1.0 + np.sin(q[:, 1]) ** 2) ** 2
    assert np.max(np.abs(K - expect)) < 1e-12


def test_riemann_antisymmetry_and_christoffel_symmetry(dpend, sphere, rng):
    for m in (dpend, sphere):
        g = eval_geometry(m.metric, m.sample(rng, 100))
        G, R = g.christoffel, g.riemann
        assert np.array_equal(G, np.swapaxes(G, -1, -2))
        assert np.max(np.abs(R + np.swapaxes(R, -1, -2))) <= 1e-10 * np.max(np.abs(R))


def test_metric_inverse(dpend, rng):
    g = eval_geometry(dpend.metric, dpend.sample(rng, 30))
    assert np.max(np.abs(g.metric @ g.metric_inv - np.eye(2))) < 1e-12


def test_degenerate_metric_names_q():
    p = const_metric([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DegenerateMetricError, match="q="):
        eval_geometry(p, np.array([0.1, 0.2]))


def test_degenerate_metric_large_n():
    M = np.eye(3)
    M[2, 2] = -1.0
    with pytest.raises(DegenerateMetricError):
        eval_geometry(const_metric(M), np.zeros(3))


def test_three_dof_generic_path_matches_fd(rng):
    def mass(q):
        q = np.asarray(q)
        c = np.cos(q)
        M = np.zeros(q.shape[:-1] + (3, 3))
        M[..., 0, 0] = 3 + c[..., 1]
        M[..., 1, 1] = 2 + 0.5 * c[..., 2]
        M[..., 2, 2] = 1.5
        M[..., 0, 1] = M[..., 1, 0] = 0.3 * c[..., 2]
        M[..., 1, 2] = M[..., 2, 1] = 0.2 * np.sin(q[..., 0])
        return M
    p = MetricProvider(3, mass)
    q = rng.uniform(-1, 1, size=(5, 3))
    g = eval_geometry(p, q)
    R = g.riemann
    assert np.max(np.abs(R + np.swapaxes(R, -1, -2))) <= 1e-10 * np.max(np.abs(R))
    assert check_ricci_identity(p, q).max < 1e-8


def test_raise_lower_examples():
    g = eval_geometry(const_metric(np.eye(2)), np.zeros(2))
    assert np.allclose(raise_index(g, np.array([1.0, 2.0])), [1.0, 2.0])
    g = eval_geometry(const_metric(np.diag([2.0, 1.0])), np.zeros(2))
    assert np.allclose(raise_index(g, np.array([1.0, 2.0])), [0.5, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_lower_raise_round_trip(a, xi):
    A = np.array(a).reshape(2, 2)
    M = A @ A.T + 0.5 * np.eye(2)
    g = eval_geometry(const_metric(M), np.zeros(2))
    xi = np.array(xi)
    assert np.allclose(lower_index(g, raise_index(g, xi)), xi, rtol=1e-12, atol=1e-12)


def test_curvature_force_examples(flat2, sphere, rng):
    g = eval_geometry(flat2.metric, rng.normal(size=2))
    assert np.all(curvature_force(g, rng.normal(size=2), rng.normal(size=2)) == 0)
    gs = eval_geometry(sphere.metric, np.array(frozen.SPHERE_Q))
    assert np.all(curvature_force(gs, np.zeros(2), rng.normal(size=2)) == 0)
    for zeta, xi, expect in frozen.SPHERE_CURVATURE_FORCE:
        got = curvature_force(gs, np.array(zeta), np.array(xi))
        assert np.allclose(got, expect, atol=1e-12)


def test_curvature_force_brute_force_loop(dpend):
    g = eval_geometry(dpend.metric, np.array(frozen.DP_Q))
    zeta, xi = np.array([0.4, -1.1]), np.array([2.0, 0.3])
    R = np.zeros((2, 2, 2, 2))
    for idx, val in frozen.DP_RIEMANN.items():
        R[idx] = val
    expect = np.zeros(2)
    for j in range(2):
        for i in range(2):
            for k in range(2):
                for l in range(2):
                    expect[j] += R[i, k, l, j] * zeta[k] * zeta[l] * xi[i]
    assert np.allclose(curvature_force(g, zeta, xi), expect, rtol=1e-12, atol=1e-13)


def test_covariant_hessian_examples(flat2, pendulum):
    g = eval_geometry(flat2.metric, np.zeros(2))
    assert np.all(covariant_hessian_V(g, flat2.potential) == 0)
    harmonic = build_model("flat", {"n": 2, "k": 1.0})
    assert np.allclose(covariant_hessian_V(eval_geometry(harmonic.metric, np.ones(2)), harmonic.potential), np.eye(2))
    unit = build_model("pendulum", {"m": 1.0, "l": 1.0, "g": 1.0})
    H = covariant_hessian_V(eval_geometry(unit.metric, np.zeros(1)), unit.potential)
    assert H[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_covariant_time_derivative_examples(flat2, sphere):
    xi, xd = np.array([1.0, 2.0]), np.array([0.5, -0.3])
    g = eval_geometry(flat2.metric, np.zeros(2))
    assert np.allclose(covariant_time_derivative_covector(g, np.array([1.0, 1.0]), xi, xd), xd)
    gs = eval_geometry(sphere.metric, np.array([1.0, 0.2]))
    assert np.allclose(covariant_time_derivative_covector(gs, np.zeros(2), xi, xd), xd)


def test_covariant_time_derivative_sphere_fd_oracle(sphere):
    # xi(t) = (t, 1) along q(t) = (pi/4 + t, t); compare with the Leibniz rule
    # d/dt (xi_j phi^j) = (D xi)_j phi^j + xi_j (D phi)^j for a transported phi
    t0, h = 0.1, 1e-5

    def q(t):
        return np.array([np.pi / 4 + t, t])

    def xi(t):
        return np.array([t, 1.0])

    def phi(t):
        return np.array([np.cos(t), np.sin(t) + 0.5])

    zeta = np.array([1.0, 1.0])
    g = eval_geometry(sphere.metric, q(t0))
    D_xi = covariant_time_derivative_covector(g, zeta, xi(t0), np.array([1.0, 0.0]))
    phi_dot = (phi(t0 + h) - phi(t0 - h)) / (2 * h)
    D_phi = phi_dot + np.einsum("jkl,k,l->j", g.christoffel, phi(t0), zeta)
    lhs = (xi(t0 + h) @ phi(t0 + h) - xi(t0 - h) @ phi(t0 - h)) / (2 * h)
    assert lhs == pytest.approx(D_xi @ phi(t0) + xi(t0) @ D_phi, abs=1e-8)


def test_ricci_identity_examples(flat2, dpend, sphere):
    assert check_ricci_identity(flat2.metric, np.zeros(2)).max == 0.0
    assert check_ricci_identity(dpend.metric, np.array(frozen.DP_Q)).max <= 1e-12
    fd = sphere.metric.without_derivatives(fd_step=1e-5)
    assert check_ricci_identity(fd, np.array([1.0, 0.4])).max <= 1e-8


def test_fd_vs_analytic_partials(dpend, sphere, rng):
    for m in (dpend, sphere):
        q = m.sample(rng, 20)
        a = m.metric.metric_partials(q)
        b = m.metric.without_derivatives().metric_partials(q)
        assert np.max(np.abs(a - b)) <= 1e-6 * max(1.0, np.max(np.abs(a)))


def test_fd_path_christoffel_partials_close(dpend, rng):
    q = dpend.sample(rng, 10)
    a = eval_geometry(dpend.metric, q)
    b = eval_geometry(dpend.metric.without_derivatives(), q)
    assert np.max(np.abs(a.christoffel - b.christoffel)) < 1e-8
    assert np.max(np.abs(a.riemann - b.riemann)) < 1e-5


def test_batched_equals_pointwise(dpend, rng):
    q = dpend.sample(rng, 4)
    batch = eval_geometry(dpend.metric, q)
    for i in range(4):
        single = eval_geometry(dpend.metric, q[i])
        assert np.allclose(batch.riemann[i], single.riemann, rtol=1e-14, atol=1e-14)


def test_geometry_is_immutable(dpend):
    g = eval_geometry(dpend.metric, np.zeros(2))
    with pytest.raises(ValueError):
        g.christoffel[0, 0, 0] = 1.0


def test_dimension_mismatch(dpend):
    with pytest.raises(ValueError):
        eval_geometry(dpend.metric, np.zeros(3))


def test_central_difference_and_potential_fallbacks():
    p = PotentialProvider(lambda q: np.sum(np.asarray(q) ** 3, axis=-1))
    q = np.array([0.5, -1.5])
    assert np.allclose(p.gradient(q), 3 * q ** 2, rtol=1e-8)
    assert np.allclose(p.hessian(q), np.diag(6 * q), rtol=1e-5, atol=1e-6)
    d = central_difference(lambda x: np.sin(x), np.array([0.3, 0.2]), 1e-6)
    assert np.allclose(d, np.diag(np.cos([0.3, 0.2])), atol=1e-9)


def test_invariant_suite_model_specific_checks(flat2, sphere, dpend):
    from covariant_control.checks import geometry_suite
    names = {m.name: {r.name for r in geometry_suite(m, points=10)} for m in (flat2, sphere, dpend)}
    assert "constant_metric_collapse" in names["flat"]
    assert "sphere_sectional_curvature" in names["sphere"]
    assert "constant_metric_collapse" not in names["double_pendulum"]
    fd = geometry_suite(dpend.finite_difference(), points=10)
    assert all(r.passed for r in fd)
    assert "ricci_identity_analytic" not in {r.name for r in fd}
