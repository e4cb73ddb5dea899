"""Controlled Euler-Lagrange dynamics and the covariant state-adjoint system.

State layout used by the integrators (trailing axis):

* forward system      y = [q, zeta]
* coupled system      y = [q, zeta, xi, pi, J]
* optimal-force check y = [q, zeta, w, w_dot]   (w the covariant force)

``pi`` is the reduced adjoint variable pi = D xi/dt - dgamma/dzeta, with D
the covariant time derivative along q(t).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .costs import (gamma, gamma_partials, gamma_covariant_q_gradient, control_from_adjoint)
from .geometry import (GeometryEval, eval_geometry, raise_index, lower_index, curvature_force,
                       covariant_time_derivative_covector)
from .integrators import integrate, rk4_step

__all__ = [
    "PhaseState",
    "AdjointState",
    "Trajectory",
    "CoupledRates",
    "forward_field",
    "coupled_field",
    "optimal_force_field",
    "energy",
    "ForwardSystem",
    "CoupledSystem",
    "OptimalForceSystem",
    "control_function",
    "simulate",
    "integrate_coupled",
    "check_prop2_identity",
]


class PhaseState(NamedTuple):
    q: np.ndarray
    zeta: np.ndarray


class AdjointState(NamedTuple):
    xi: np.ndarray
    pi: np.ndarray

    @property
    def rho(self):
        # the first multiplier is eliminated: rho = -pi
        return -self.pi


@dataclass(frozen=True)
class Trajectory:
    """Uniform-grid trajectory; per-node arrays have shape (N + 1, n)."""

    t: np.ndarray
    q: np.ndarray
    zeta: np.ndarray
    u: np.ndarray
    u_cov: np.ndarray
    energy: np.ndarray
    running_cost: np.ndarray
    xi: Optional[np.ndarray] = None
    pi: Optional[np.ndarray] = None

    def __post_init__(self):
        n_nodes = len(self.t)
        if n_nodes > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0) or np.max(np.abs(dt - dt[0])) > 1e-12 * max(1.0, abs(self.t[-1])):
                raise ValueError("time grid must be strictly increasing and uniform")
        for name in ("q", "zeta", "u", "u_cov", "energy", "running_cost", "xi", "pi"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n_nodes:
                raise ValueError(f"{name} has {len(arr)} nodes, expected {n_nodes}")

    @property
    def dim(self):
        return self.q.shape[-1]

    @property
    def cost(self):
        return float(self.running_cost[-1])

    @property
    def states(self):
        return PhaseState(self.q, self.zeta)

    @property
    def adjoints(self):
        return None if self.xi is None else AdjointState(self.xi, self.pi)


class CoupledRates(NamedTuple):
    q: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    pi: np.ndarray
    u: np.ndarray


def forward_field(model, geom, s, u, dV=None):
    """dq/dt = zeta,  dzeta^j/dt = -Gamma^j_{kl} zeta^k zeta^l - M^{jl} d_l V + u^j.

    ``dV`` is the potential gradient at q when the caller already has it.
    """
    q, zeta = s
    dV = model.potential.gradient(q) if dV is None else dV
    accel = (u - np.einsum("...jkl,...k,...l->...j", geom.christoffel, zeta, zeta)
             - raise_index(geom, dV))
    return zeta, accel


def _hessian_times(model, geom, q, dV, vec):
    # (nabla^2 V)_{jk} vec^k with nabla^2 V = d d V - Gamma^l_{jk} d_l V
    H = model.potential.hessian(q) - np.einsum("...ljk,...l->...jk", geom.christoffel, dV)
    return np.einsum("...jk,...k->...j", H, vec)


def coupled_field(model, cost, geom, s, a, u_guess=None):
    """Time derivatives of (q, zeta, xi, pi) for the optimal state-adjoint system.

    The control solves dgamma/du = xi.  The adjoint obeys
    D pi = -R_zeta.xi - nabla^2 V . xi - (dgamma/dq)_cov  with
    pi = D xi - dgamma/dzeta; the returned xi and pi rates are coordinate
    component derivatives.
    """
    q, zeta = s
    xi, pi = a
    u = control_from_adjoint(cost, geom, zeta, xi, u_guess)
    dV = model.potential.gradient(q)
    dq, dzeta = forward_field(model, geom, s, u, dV)
    partials = gamma_partials(cost, geom, zeta, u)
    G = geom.christoffel
    xi_dot = pi + partials.zeta + np.einsum("...kjl,...k,...l->...j", G, xi, zeta)
    xi_up = u if cost.quadratic else raise_index(geom, xi)
    hess_xi = _hessian_times(model, geom, q, dV, xi_up)
    D_pi = (-curvature_force(geom, zeta, xi) - hess_xi
            - gamma_covariant_q_gradient(cost, geom, zeta, u, partials))
    pi_dot = D_pi + np.einsum("...kjl,...k,...l->...j", G, pi, zeta)
    return CoupledRates(dq, dzeta, xi_dot, pi_dot, u)


def optimal_force_field(model, geom, s, w, w_dot):
    """Second-order covariant evolution of the optimal force for the quadratic cost.

    Integrates D^2 w_j = -R^i_{klj} zeta^k zeta^l w_i - (nabla^2 V)_{jk} w^k
    directly in coordinates, with the control u^j = M^{jk} w_k.  Used as an
    independent check of the reduced first-order adjoint system.
    Returns (dq, dzeta, dw, dw_dot).
    """
    q, zeta = s
    G, dG = geom.christoffel, geom.christoffel_partials
    w_up = raise_index(geom, w)
    dV = model.potential.gradient(q)
    dq, dzeta = forward_field(model, geom, s, w_up, dV)
    Dw = covariant_time_derivative_covector(geom, zeta, w, w_dot)
    target = -curvature_force(geom, zeta, w) - _hessian_times(model, geom, q, dV, w_up)
    w_ddot = (target
              + np.einsum("...kjl,...k,...l->...j", G, Dw, zeta)
              + np.einsum("...mkjl,...m,...k,...l->...j", dG, zeta, w, zeta)
              + np.einsum("...kjl,...k,...l->...j", G, w_dot, zeta)
              + np.einsum("...kjl,...k,...l->...j", G, w, dzeta))
    return dq, dzeta, w_dot, w_ddot


def energy(model, s):
    """Total mechanical energy K + V with K = M_{kl} zeta^k zeta^l / 2."""
    q, zeta = s
    M = model.metric.metric(q)
    return 0.5 * np.einsum("...k,...kl,...l->...", zeta, M, zeta) + model.potential(q)


def control_function(control, T, N, n):
    """Normalize a control specification to a callable t -> u (contravariant).

    ``None`` means zero control, a length-n vector a constant control, an
    (N + 1, n) array node values joined piecewise linearly.  Callables pass
    through unchanged.
    """
    if callable(control):
        return control
    if control is None:
        return lambda t: np.zeros(np.shape(t) + (n,))
    arr = np.asarray(control, dtype=float)
    if arr.shape == (n,):
        return lambda t: np.broadcast_to(arr, np.shape(t) + (n,)).copy()
    if arr.shape != (N + 1, n):
        raise ValueError(f"control must be None, shape ({n},) or ({N + 1}, {n}); got {arr.shape}")
    return _PiecewiseLinear(arr, T / N)


class _PiecewiseLinear:
    def __init__(self, nodes, h):
        self.nodes = nodes
        self.h = h

    def __call__(self, t):
        s = np.clip(np.asarray(t, dtype=float) / self.h, 0.0, len(self.nodes) - 1)
        i = np.minimum(np.floor(s).astype(int), len(self.nodes) - 2)
        w = (s - i)[..., None]
        return (1.0 - w) * self.nodes[i] + w * self.nodes[i + 1]


class ForwardSystem:
    """RHS of the forward dynamics for a given control u(t); y = [q, zeta]."""

    def __init__(self, model, control=None):
        self.model = model
        self.control = control

    def __call__(self, t, y):
        n = self.model.dim
        q, zeta = y[..., :n], y[..., n:]
        geom = eval_geometry(self.model.metric, q, curvature=False)
        if self.control is None:
            u = 0.0
        else:
            u = self.control(np.broadcast_to(np.asarray(t, dtype=float), y.shape[:-1]))
        dq, dzeta = forward_field(self.model, geom, (q, zeta), u)
        return np.concatenate([dq, dzeta], axis=-1)


class CoupledSystem:
    """RHS of the coupled system y = [q, zeta, xi, pi, J], J the running cost.

    The optimality inversion is warm-started from the previous evaluation.
    """

    def __init__(self, model, cost):
        self.model = model
        self.cost = cost
        self._u_last = None

    def __call__(self, t, y):
        n = self.model.dim
        q, zeta, xi, pi = (y[..., i * n:(i + 1) * n] for i in range(4))
        geom = eval_geometry(self.model.metric, q)
        guess = self._u_last
        if guess is not None and guess.shape != xi.shape:
            guess = None
        r = coupled_field(self.model, self.cost, geom, (q, zeta), (xi, pi), guess)
        self._u_last = r.u
        running = gamma(self.cost, geom, zeta, r.u)[..., None]
        return np.concatenate([r.q, r.zeta, r.xi, r.pi, running], axis=-1)


class OptimalForceSystem:
    """RHS for y = [q, zeta, w, w_dot] (quadratic-cost optimal force)."""

    def __init__(self, model):
        self.model = model

    def __call__(self, t, y):
        n = self.model.dim
        q, zeta, w, w_dot = (y[..., i * n:(i + 1) * n] for i in range(4))
        geom = eval_geometry(self.model.metric, q)
        return np.concatenate(optimal_force_field(self.model, geom, (q, zeta), w, w_dot), axis=-1)


def simulate(model, q0, zeta0, T, N, control=None, method="rk4"):
    """Forward integration under a prescribed control; cost is the quadratic-control trapezoid."""
    n = model.dim
    u_of_t = control_function(control, T, N, n)
    y0 = np.concatenate([np.asarray(q0, dtype=float), np.asarray(zeta0, dtype=float)])
    t, Y = integrate(ForwardSystem(model, None if control is None else u_of_t), y0, T, N, method)
    q, zeta = Y[:, :n], Y[:, n:]
    u = np.asarray(u_of_t(t), dtype=float).reshape(len(t), n)
    geom = eval_geometry(model.metric, q, curvature=False)
    u_cov = lower_index(geom, u)
    g = 0.5 * np.einsum("ik,ik->i", u, u_cov)
    running = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
    return Trajectory(t, q, zeta, u, u_cov, energy(model, (q, zeta)), running)


def integrate_coupled(model, cost, q0, zeta0, xi0, pi0, T, N, method="rk4"):
    """Integrate the coupled system from full initial data; returns a Trajectory.

    The running cost is integrated alongside the state by the same scheme.
    """
    n = model.dim
    y0 = np.concatenate([np.asarray(v, dtype=float) for v in (q0, zeta0, xi0, pi0)] + [np.zeros(1)])
    t, Y = integrate(CoupledSystem(model, cost), y0, T, N, method)
    return trajectory_from_coupled(model, cost, t, Y)


def trajectory_from_coupled(model, cost, t, Y):
    n = model.dim
    q, zeta, xi, pi = (Y[:, i * n:(i + 1) * n] for i in range(4))
    geom = eval_geometry(model.metric, q, curvature=False)
    u = np.empty_like(xi)
    guess = None
    for i in range(len(t)):
        gi = _node(geom, i)
        guess = control_from_adjoint(cost, gi, zeta[i], xi[i], guess)
        u[i] = guess
    return Trajectory(t, q, zeta, u, lower_index(geom, u), energy(model, (q, zeta)),
                      Y[:, 4 * n].copy(), xi, pi)


def _node(geom, i):
    return GeometryEval(geom.q[i], geom.metric[i], geom.metric_inv[i], geom.metric_partials[i],
                        geom.christoffel[i])


def check_prop2_identity(model, trajectory, test_field, control=None, fd_step=1e-4, nodes=None):
    """Max discrepancy between the closed-form second covariant derivative of a
    covector field along the trajectory and a finite-difference evaluation.

    The derivative of the first covariant derivative is a Richardson-extrapolated
    central difference with steps ``fd_step`` and ``fd_step / 2``.
    ``test_field(t)`` returns the coordinate components (xi, xi_dot, xi_ddot)
    at times ``t`` (shape (K,) -> three (K, n) arrays).  The curve between
    nodes is reconstructed by short RK4 sub-steps of the forward dynamics
    under ``control`` (default: cubic spline through the trajectory's nodal
    controls).
    """
    t_all = trajectory.t
    if nodes is None:
        nodes = np.arange(len(t_all)) if len(t_all) <= 101 else np.unique(
            np.linspace(0, len(t_all) - 1, 101).round().astype(int))
    nodes = np.asarray(nodes)
    n = model.dim
    if control is None:
        if np.all(trajectory.u == 0.0):
            control = control_function(None, 1.0, 1, n)
        else:
            control = CubicSpline(t_all, trajectory.u, axis=0)
    t = t_all[nodes]
    q, zeta = trajectory.q[nodes], trajectory.zeta[nodes]
    xi, xi_dot, xi_ddot = (np.asarray(a, dtype=float) for a in test_field(t))

    geom = eval_geometry(model.metric, q)
    G, dG, R = geom.christoffel, geom.christoffel_partials, geom.riemann
    _, zeta_dot = forward_field(model, geom, (q, zeta), control(t))
    D_zeta = zeta_dot + np.einsum("...jkl,...k,...l->...j", G, zeta, zeta)
    D_xi = covariant_time_derivative_covector(geom, zeta, xi, xi_dot)
    closed = (xi_ddot
              - 2.0 * np.einsum("...kjl,...k,...l->...j", G, D_xi, zeta)
              - np.einsum("...kjl,...k,...l->...j", G, xi, D_zeta)
              + np.einsum("...klmj,...k,...l,...m->...j", R, xi, zeta, zeta)
              - np.einsum("...jklm,...k,...l,...m->...j", dG, xi, zeta, zeta))

    fwd = ForwardSystem(model, control)
    y = np.concatenate([q, zeta], axis=-1)

    def shifted(h, substeps=4):
        ys, ts = y, t.copy()
        dh = h / substeps
        for _ in range(substeps):
            ys = rk4_step(fwd, ts, ys, dh)
            ts = ts + dh
        return ys

    def first_derivative(ys, ts):
        gs = eval_geometry(model.metric, ys[..., :n], curvature=False)
        x, xd, _ = test_field(ts)
        return covariant_time_derivative_covector(gs, ys[..., n:], np.asarray(x), np.asarray(xd))

    def central(h):
        return (first_derivative(shifted(h), t + h) - first_derivative(shifted(-h), t - h)) / (2.0 * h)

    # Richardson extrapolation removes the O(h^2) truncation term
    d1 = (4.0 * central(0.5 * fd_step) - central(fd_step)) / 3.0
    D1 = first_derivative(y, t)
    fd = d1 - np.einsum("...kjl,...k,...l->...j", G, D1, zeta)
    return float(np.max(np.abs(closed - fd)))

