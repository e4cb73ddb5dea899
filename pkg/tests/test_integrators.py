import numpy as np
import pytest

from covariant_control.dynamics import ForwardSystem, simulate
from covariant_control.integrators import IntegrationError, integrate, uniform_grid


def test_free_drift_exact(flat2):
    tr = simulate(flat2, [0.1, -0.2], [1.5, 0.25], 2.0, 7)
    assert np.max(np.abs(tr.q[-1] - np.array([0.1 + 3.0, -0.2 + 0.5]))) <= 1e-12


def test_pendulum_small_oscillation_period():
    from covariant_control.models import build_model
    m = build_model("pendulum", {"m": 1.0, "l": 1.0, "g": 9.81})
    P = 2 * np.pi / np.sqrt(9.81)
    tr = simulate(m, [1e-3], [0.0], 2 * P, 4000)
    q = tr.q[:, 0]
    # first two downward zero crossings, linear interpolation
    idx = np.flatnonzero((q[:-1] > 0) & (q[1:] <= 0))
    cross = [tr.t[i] + q[i] / (q[i] - q[i + 1]) * (tr.t[i + 1] - tr.t[i]) for i in idx[:2]]
    assert abs((cross[1] - cross[0]) - P) / P <= 1e-4


def test_harmonic_rk4_and_rk45():
    field = lambda t, y: np.stack([y[..., 1], -y[..., 0]], axis=-1)  # noqa: E731
    for method in ("rk4", "rk45"):
        t, Y = integrate(field, np.array([1.0, 0.0]), np.pi, 1000, method=method)
        assert np.allclose(Y[-1], [-1.0, 0.0], atol=1e-6)
        assert t[-1] == pytest.approx(np.pi)


def test_batched_initial_conditions():
    field = lambda t, y: -y  # noqa: E731
    t, Y = integrate(field, np.ones((3, 2)), 1.0, 100)
    assert Y.shape == (101, 3, 2)
    assert np.allclose(Y[-1], np.exp(-1.0), rtol=1e-9)


def test_blow_up_raises():
    with pytest.raises(IntegrationError, match="step"), np.errstate(over="ignore"):
        integrate(lambda t, y: y * y, np.array([1.0]), 2.0, 100)
    with pytest.raises(IntegrationError):
        integrate(lambda t, y: y * y, np.array([1.0]), 2.0, 100, method="rk45")


@pytest.mark.parametrize("T,N,method", [(0.0, 10, "rk4"), (1.0, 0, "rk4"), (1.0, 10, "euler")])
def test_bad_arguments(T, N, method):
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, np.ones(1), T, N, method=method)


def test_uniform_grid():
    assert np.allclose(uniform_grid(1.0, 4), [0, 0.25, 0.5, 0.75, 1.0])


def test_forward_system_batched(dpend, rng):
    y = rng.normal(size=(4, 4))
    f = ForwardSystem(dpend)
    batch = f(0.0, y)
    assert np.allclose(batch, np.stack([f(0.0, row) for row in y]), rtol=1e-14, atol=1e-14)
