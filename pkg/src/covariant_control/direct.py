"""Direct transcription oracle: nodal controls, forward RK4 and a terminal penalty.

Two control discretizations are available:

* ``"linear"`` (default): u at the N + 1 grid nodes, linear in between, so
  RK4 midpoint stages see the node average; cost by the trapezoid rule on
  the nodes.
* ``"stage"``: u at the 2N + 1 nodes and half-step points, each RK4 stage
  reads its own sample; the cost is integrated by the same RK4 stages.  The
  indirect solution is then stationary to O(h^4) rather than O(h^2).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .costs import gamma
from .dynamics import Trajectory, energy, forward_field
from .geometry import eval_geometry, lower_index
from .integrators import IntegrationError, uniform_grid
from .shooting import BoundarySpec

__all__ = ["SCHEMES", "DirectProblem", "DirectReport", "evaluate_cost", "optimize",
           "optimize_problem", "rollout", "trajectory_of"]

log = logging.getLogger(__name__)

SCHEMES = ("linear", "stage")


@dataclass(frozen=True)
class DirectProblem:
    """Direct transcription of the optimal control problem.

    ``control_grid`` holds contravariant controls: (N + 1, n) for the linear
    scheme, (2N + 1, n) for the stage scheme.  For case B the initial
    velocity is free as well; ``zeta0`` holds it (default (qT - q0) / T).
    """

    model: object
    cost: object
    bc: BoundarySpec
    T: float
    N: int
    penalty_weight: float = 1e6
    control_grid: Optional[np.ndarray] = None
    zeta0: Optional[np.ndarray] = None
    scheme: str = "linear"

    def __post_init__(self):
        n = self.model.dim
        if self.bc.dim != n:
            raise ValueError(f"boundary data has dimension {self.bc.dim}, model has {n}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        shape = (self.nodes, n)
        grid = np.zeros(shape) if self.control_grid is None else np.array(self.control_grid, dtype=float)
        if grid.shape != shape:
            raise ValueError(f"control_grid must have shape {shape}, got {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise ValueError("control grid must be finite")
        object.__setattr__(self, "control_grid", grid)
        if self.free_velocity:
            z0 = (self.bc.qT - self.bc.q0) / self.T if self.zeta0 is None else np.array(self.zeta0, float)
            if z0.shape != (n,):
                raise ValueError(f"zeta0 must have length {n}")
        else:
            z0 = self.bc.zeta0
        object.__setattr__(self, "zeta0", z0)

    @property
    def nodes(self):
        return self.N + 1 if self.scheme == "linear" else 2 * self.N + 1

    @property
    def free_velocity(self):
        return self.bc.case == "B_endpoint_positions"

    def decision_vector(self):
        x = self.control_grid.ravel()
        return np.concatenate([x, self.zeta0]) if self.free_velocity else x.copy()

    def with_decision(self, x):
        m = self.control_grid.size
        grid = np.asarray(x[:m], dtype=float).reshape(self.control_grid.shape)
        return replace(self, control_grid=grid, zeta0=x[m:] if self.free_velocity else None)


@dataclass
class DirectReport:
    converged: bool
    evaluations: int
    iterations: int
    history: list = field(default_factory=list)
    terminal_residual: float = 0.0
    exhausted: bool = False
    message: str = ""


def _unpack(p, X):
    n, m = p.model.dim, p.control_grid.size
    U = X[..., :m].reshape(X.shape[:-1] + (p.nodes, n))
    z0 = X[..., m:] if p.free_velocity else np.broadcast_to(p.zeta0, X.shape[:-1] + (n,))
    return U, z0


def rollout(p, X, keep=False):
    """Integrate the forward dynamics for a batch of decision vectors.

    Returns (J, terminal residual, extras); J is the quadrature of gamma and
    extras is ``(Q, Z, running_cost)`` on the grid nodes when ``keep``.
    """
    model, cost = p.model, p.cost
    U, z0 = _unpack(p, np.asarray(X, dtype=float))
    h = p.T / p.N
    stage = p.scheme == "stage"
    q = np.broadcast_to(p.bc.q0, z0.shape).copy()
    zeta = np.array(z0, dtype=float)
    batch = U.shape[:-2]
    running = np.zeros(batch + (p.N + 1,))
    if keep:
        Q = np.empty(batch + (p.N + 1, model.dim))
        Z = np.empty(batch + (p.N + 1, model.dim))

    def rates(qs, zs, u):
        geom = eval_geometry(model.metric, qs, curvature=False)
        dq, dz = forward_field(model, geom, (qs, zs), u)
        return dq, dz, geom

    g_prev = None
    for i in range(p.N):
        if stage:
            u0, um, u1 = U[..., 2 * i, :], U[..., 2 * i + 1, :], U[..., 2 * i + 2, :]
        else:
            u0, u1 = U[..., i, :], U[..., i + 1, :]
            um = 0.5 * (u0 + u1)
        if keep:
            Q[..., i, :], Z[..., i, :] = q, zeta
        k1q, k1z, g1 = rates(q, zeta, u0)
        s2 = (q + 0.5 * h * k1q, zeta + 0.5 * h * k1z)
        k2q, k2z, g2 = rates(*s2, um)
        s3 = (q + 0.5 * h * k2q, zeta + 0.5 * h * k2z)
        k3q, k3z, g3 = rates(*s3, um)
        s4 = (q + h * k3q, zeta + h * k3z)
        k4q, k4z, g4 = rates(*s4, u1)
        if stage:
            dJ = (h / 6.0) * (gamma(cost, g1, zeta, u0) + 2.0 * gamma(cost, g2, s2[1], um)
                              + 2.0 * gamma(cost, g3, s3[1], um) + gamma(cost, g4, s4[1], u1))
        elif g_prev is None:
            g_prev = gamma(cost, g1, zeta, u0)
        q = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        zeta = zeta + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(zeta))):
            raise IntegrationError(i + 1, (i + 1) * h)
        if not stage:
            g_next = gamma(cost, eval_geometry(model.metric, q, curvature=False), zeta, u1)
            dJ = 0.5 * h * (g_prev + g_next)
            g_prev = g_next
        running[..., i + 1] = running[..., i] + dJ
    if keep:
        Q[..., -1, :], Z[..., -1, :] = q, zeta
    J = running[..., -1]
    if p.bc.case == "A_initial_state":
        r = np.zeros(J.shape + (0,))
    elif p.bc.case == "B_endpoint_positions":
        r = q - p.bc.qT
    else:
        r = np.concatenate([q - p.bc.qT, zeta - p.bc.zetaT], axis=-1)
    return J, r, ((Q, Z, running) if keep else None)


def _objective(p, X):
    J, r, _ = rollout(p, X)
    return J + p.penalty_weight * np.sum(r * r, axis=-1)


def evaluate_cost(p):
    """J~ = quadrature of gamma + penalty_weight * |terminal residual|^2 (cases B and C)."""
    return float(_objective(p, p.decision_vector()))


def trajectory_of(p):
    """Forward trajectory on the grid nodes produced by the current control."""
    _, _, (Q, Z, running) = rollout(p, p.decision_vector(), keep=True)
    U = p.control_grid[::2] if p.scheme == "stage" else p.control_grid
    geom = eval_geometry(p.model.metric, Q, curvature=False)
    return Trajectory(uniform_grid(p.T, p.N), Q, Z, U.copy(), lower_index(geom, U),
                      energy(p.model, (Q, Z)), running)


def optimize(p, max_evals=20000, fd_step=1e-6, gtol=1e-6):
    """Minimize J~ with BFGS and central-difference gradients (step ``fd_step``).

    Returns ``(control_grid, J~, report)``.  Use :func:`optimize_problem` to
    also get the optimized free initial velocity of case B.
    """
    best, report = optimize_problem(p, max_evals, fd_step, gtol)
    return best.control_grid, evaluate_cost(best), report


def optimize_problem(p, max_evals=20000, fd_step=1e-6, gtol=1e-6, warm_stages=2):
    """Like :func:`optimize` but returns the optimized DirectProblem.

    With terminal constraints the search is warm started by solving the same
    problem at penalty weights reduced by 100**k (k = warm_stages .. 1).
    Only the final run at the requested weight is reported in ``history``;
    ``evaluations`` counts all runs.
    """
    if p.bc.case == "A_initial_state":
        warm_stages = 0
    total = 0
    for k in range(warm_stages, 0, -1):
        stage, rep = _bfgs(replace(p, penalty_weight=p.penalty_weight / 100.0 ** k),
                           max_evals - total, fd_step, gtol)
        total += rep.evaluations
        if total >= max_evals:
            break
        p = replace(p, control_grid=stage.control_grid, zeta0=stage.zeta0)
    best, report = _bfgs(p, max(1, max_evals - total), fd_step, gtol)
    report.evaluations += total
    report.exhausted = report.exhausted or (report.evaluations >= max_evals and not report.converged)
    return best, report


def _gauss_newton_inverse(p, x0, from_x, fd_step):
    # (I + 2 w A^T A)^{-1} by Woodbury, A the terminal-residual Jacobian in
    # the preconditioned variables; seeds BFGS with the stiff penalty directions
    dim = x0.size
    eye = np.eye(dim) * fd_step
    _, R, _ = rollout(p, from_x(np.vstack([x0 + eye, x0 - eye])))
    A = ((R[:dim] - R[dim:]) / (2.0 * fd_step)).T
    inner = np.eye(A.shape[0]) / (2.0 * p.penalty_weight) + A @ A.T
    H = np.eye(dim) - A.T @ np.linalg.solve(inner, A)
    return 0.5 * (H + H.T)


def _bfgs(p, max_evals, fd_step, gtol):
    n, m = p.model.dim, p.control_grid.size
    # precondition: x = sqrt(dt) L^T u per node with M(q0) = L L^T, so the
    # cost Hessian is close to the identity
    dt = p.T / (p.nodes - 1)
    L = np.linalg.cholesky(p.model.metric.metric(p.bc.q0))
    S = np.sqrt(dt) * L.T
    S_inv = np.linalg.inv(S)

    def to_x(v):
        U = v[..., :m].reshape(v.shape[:-1] + (p.nodes, n)) @ S.T
        return np.concatenate([U.reshape(v.shape[:-1] + (m,)), v[..., m:]], axis=-1)

    def from_x(y):
        U = y[..., :m].reshape(y.shape[:-1] + (p.nodes, n)) @ S_inv.T
        return np.concatenate([U.reshape(y.shape[:-1] + (m,)), y[..., m:]], axis=-1)

    x0 = to_x(p.decision_vector())
    dim = x0.size
    state = {"evals": 0, "best_f": np.inf, "best_x": x0.copy()}

    def fun(y):
        state["evals"] += 1
        try:
            f = float(_objective(p, from_x(y)))
        except IntegrationError:
            # let the line search back off from a diverging rollout
            return np.inf
        if f < state["best_f"]:
            state["best_f"], state["best_x"] = f, y.copy()
        return f

    eye = np.eye(dim) * fd_step

    def jac(y):
        F = _objective(p, from_x(np.vstack([y + eye, y - eye])))
        return (F[:dim] - F[dim:]) / (2.0 * fd_step)

    history = [fun(x0)]

    def callback(intermediate_result):
        history.append(float(intermediate_result.fun))
        if state["evals"] >= max_evals:
            raise StopIteration

    options = {"gtol": gtol, "maxiter": max(1, max_evals)}
    if p.bc.case != "A_initial_state":
        options["hess_inv0"] = _gauss_newton_inverse(p, x0, from_x, fd_step)
    res = minimize(fun, x0, jac=jac, method="BFGS", callback=callback, options=options)
    exhausted = state["evals"] >= max_evals and not res.success
    best = p.with_decision(from_x(state["best_x"]))
    _, r, _ = rollout(best, best.decision_vector())
    # status 2 is a line search that can no longer improve: stationary up to gradient noise
    converged = bool(res.success) or (res.status == 2 and not exhausted)
    report = DirectReport(converged=converged, evaluations=state["evals"], iterations=int(res.nit),
                          history=history, terminal_residual=float(np.max(np.abs(r), initial=0.0)),
                          exhausted=exhausted, message=str(res.message))
    log.debug("direct: %s after %d evaluations, J~=%.12g", res.message, state["evals"], state["best_f"])
    return best, report
