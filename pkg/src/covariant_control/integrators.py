"""Fixed-step RK4 and an adaptive RK45 resampled onto a uniform grid."""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

__all__ = ["IntegrationError", "integrate", "rk4_step", "uniform_grid"]

METHODS = ("rk4", "rk45")


class IntegrationError(FloatingPointError):
    """The state became non-finite during integration."""

    def __init__(self, step, t):
        super().__init__(f"non-finite state at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


def uniform_grid(T, N):
    return np.arange(N + 1) * (T / N)


def rk4_step(field, t, y, h):
    k1 = field(t, y)
    k2 = field(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = field(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = field(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(field, y0, T, N, method="rk4", rtol=1e-9, atol=1e-9):
    """Integrate ``dy/dt = field(t, y)`` on the uniform grid of N steps over [0, T].

    ``y0`` may carry leading batch axes; ``field`` must accept them.  Returns
    ``(t, Y)`` with ``Y.shape == (N + 1,) + y0.shape``.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    N = int(N)
    if N < 1:
        raise ValueError(f"need at least one step, got {N}")
    if method not in METHODS:
        raise ValueError(f"unknown integrator {method!r}; expected one of {METHODS}")
    y0 = np.asarray(y0, dtype=float)
    t = uniform_grid(T, N)
    if method == "rk45":
        return t, _rk45(field, y0, t, rtol, atol)
    h = T / N
    Y = np.empty((N + 1,) + y0.shape)
    Y[0] = y0
    y = y0
    for i in range(N):
        y = rk4_step(field, t[i], y, h)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(i + 1, t[i + 1])
        Y[i + 1] = y
    return t, Y


def _rk45(field, y0, t, rtol, atol):
    shape = y0.shape

    def flat(s, y):
        return np.asarray(field(s, y.reshape(shape)), dtype=float).ravel()

    sol = solve_ivp(flat, (t[0], t[-1]), y0.ravel(), method="RK45", t_eval=t, rtol=rtol, atol=atol)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        bad = np.flatnonzero(~np.all(np.isfinite(sol.y), axis=0))
        step = int(bad[0]) if bad.size else sol.y.shape[1]
        raise IntegrationError(step, float(t[min(step, len(t) - 1)]))
    return sol.y.T.reshape((len(t),) + shape)
