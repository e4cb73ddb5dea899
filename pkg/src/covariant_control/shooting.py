"""Single shooting with damped Newton for the state-adjoint boundary value problem."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .costs import InversionError, gamma_partials
from .dynamics import CoupledSystem, Trajectory, trajectory_from_coupled
from .geometry import DegenerateMetricError, eval_geometry
from .integrators import IntegrationError, integrate

__all__ = ["CASES", "BoundarySpec", "ShootReport", "ShootingError", "optimality_residual",
           "residual", "shoot", "unknowns_to_initial"]

log = logging.getLogger(__name__)

CASES = ("A_initial_state", "B_endpoint_positions", "C_fully_clamped")
_ALIASES = {"A": CASES[0], "B": CASES[1], "C": CASES[2]}


class ShootingError(RuntimeError):
    """Shooting could not evaluate the residual (integration blow-up)."""


def _vec(x):
    return None if x is None else np.asarray(x, dtype=float).copy()


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary data for one of the three shipped cases.

    * ``A_initial_state``: q(0), zeta(0) given; xi(T) = 0 and pi(T) = 0.
    * ``B_endpoint_positions``: q(0), q(T) given; xi(0) = xi(T) = 0.
    * ``C_fully_clamped``: q(0), zeta(0), q(T), zeta(T) given.
    """

    case: str
    q0: np.ndarray
    zeta0: Optional[np.ndarray] = None
    qT: Optional[np.ndarray] = None
    zetaT: Optional[np.ndarray] = None

    def __post_init__(self):
        case = _ALIASES.get(self.case, self.case)
        if case not in CASES:
            raise ValueError(f"unknown boundary case {self.case!r}; expected one of {list(CASES)}")
        object.__setattr__(self, "case", case)
        for name in ("q0", "zeta0", "qT", "zetaT"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        required = {"A_initial_state": ("q0", "zeta0"),
                    "B_endpoint_positions": ("q0", "qT"),
                    "C_fully_clamped": ("q0", "zeta0", "qT", "zetaT")}[case]
        missing = [k for k in required if getattr(self, k) is None]
        if missing:
            raise ValueError(f"boundary case {case} requires {list(required)}; missing {missing}")
        shapes = {getattr(self, k).shape for k in required}
        if len(shapes) != 1 or len(next(iter(shapes))) != 1:
            raise ValueError("boundary vectors must be 1-D and of equal length")
        if not all(np.all(np.isfinite(getattr(self, k))) for k in required):
            raise ValueError("boundary values must be finite")

    @property
    def dim(self):
        return self.q0.shape[0]


@dataclass
class ShootReport:
    converged: bool
    iterations: int
    residual_norm: float
    unknowns: np.ndarray
    trajectory: Optional[Trajectory]
    cost: float
    newton_history: list = field(default_factory=list)
    message: str = ""


def unknowns_to_initial(bc, x):
    """Full initial data (q, zeta, xi, pi) from the 2n shooting unknowns (batched)."""
    x = np.asarray(x, dtype=float)
    n = bc.dim
    lead = x.shape[:-1]
    q0 = np.broadcast_to(bc.q0, lead + (n,))
    a, b = x[..., :n], x[..., n:]
    if bc.case == "B_endpoint_positions":
        return q0, a, np.zeros(lead + (n,)), b
    return q0, np.broadcast_to(bc.zeta0, lead + (n,)), a, b


def _integrate(model, cost, bc, x, T, N, method):
    q0, z0, xi0, pi0 = unknowns_to_initial(bc, x)
    y0 = np.concatenate([q0, z0, xi0, pi0, np.zeros(q0.shape[:-1] + (1,))], axis=-1)
    return integrate(CoupledSystem(model, cost), y0, T, N, method)


def _terminal_residual(bc, yT, n):
    q, zeta, xi, pi = (yT[..., i * n:(i + 1) * n] for i in range(4))
    if bc.case == "A_initial_state":
        return np.concatenate([xi, pi], axis=-1)
    if bc.case == "B_endpoint_positions":
        return np.concatenate([q - bc.qT, xi], axis=-1)
    return np.concatenate([q - bc.qT, zeta - bc.zetaT], axis=-1)


def residual(model, cost, bc, unknowns, T, N, method="rk4"):
    """Terminal boundary residual (length 2n) for the given shooting unknowns.

    Accepts a batch of unknown vectors along leading axes.
    """
    if bc.dim != model.dim:
        raise ValueError(f"boundary data has dimension {bc.dim}, model has {model.dim}")
    _, Y = _integrate(model, cost, bc, unknowns, T, N, method)
    return _terminal_residual(bc, Y[-1], model.dim)


_FAILURES = (IntegrationError, InversionError, DegenerateMetricError, FloatingPointError)


def shoot(model, cost, bc, T, N, tol=1e-9, max_iter=100, initial_guess=None, method="rk4",
          max_halvings=20):
    """Solve the two-point boundary value problem by damped Newton shooting.

    Unknowns are (xi(0), pi(0)) for cases A and C and (zeta(0), pi(0)) for
    case B.  The Jacobian uses forward differences with column step
    1e-7 (1 + |x_i|); a step is halved up to ``max_halvings`` times until the
    max-norm residual decreases.
    """
    n = model.dim
    if bc.dim != n:
        raise ValueError(f"boundary data has dimension {bc.dim}, model has {n}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.zeros(2 * n) if initial_guess is None else np.asarray(initial_guess, dtype=float).copy()
    if x.shape != (2 * n,):
        raise ValueError(f"initial guess must have length {2 * n}")

    def run(xs):
        # integrate once; keep the trajectory data so nothing is re-integrated
        t, Y = _integrate(model, cost, bc, xs, T, N, method)
        return _terminal_residual(bc, Y[-1], n), (t, Y)

    try:
        r, sol = run(x)
    except _FAILURES as exc:
        raise ShootingError(f"Newton iteration 0: {exc}") from exc
    err = float(np.max(np.abs(r)))
    history = [err]
    message = ""
    it = 0
    while err > tol and it < max_iter:
        it += 1
        h = 1e-7 * (1.0 + np.abs(x))
        try:
            R, _ = run(x + np.diag(h))
        except _FAILURES as exc:
            raise ShootingError(f"Newton iteration {it} (Jacobian): {exc}") from exc
        jac = (R - r).T / h
        dx = np.linalg.lstsq(jac, -r, rcond=None)[0]
        lam = 1.0
        accepted = False
        last_failure = None
        for _ in range(max_halvings + 1):
            x_try = x + lam * dx
            try:
                r_try, sol_try = run(x_try)
                e_try = float(np.max(np.abs(r_try)))
            except _FAILURES as exc:
                last_failure, e_try = exc, np.inf
            if e_try < err:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if last_failure is not None and not np.isfinite(e_try):
                raise ShootingError(f"Newton iteration {it}: {last_failure}") from last_failure
            message = f"line search failed at iteration {it}"
            break
        x, r, err, sol = x_try, r_try, e_try, sol_try
        history.append(err)
        log.debug("newton %d: residual %.3e (step %.3g)", it, err, lam)

    converged = err <= tol
    if not converged and not message:
        message = f"max_iter={max_iter} reached"
    traj = trajectory_from_coupled(model, cost, *sol)
    return ShootReport(converged, it, err, x, traj, traj.cost, history,
                       "converged" if converged else message)


def optimality_residual(model, cost, trajectory):
    """max over nodes of |dgamma/du(u) - xi| along a coupled trajectory."""
    if trajectory.xi is None:
        raise ValueError("trajectory carries no adjoint")
    geom = eval_geometry(model.metric, trajectory.q, curvature=False)
    du = gamma_partials(cost, geom, trajectory.zeta, trajectory.u).u
    return float(np.max(np.abs(du - trajectory.xi)))
