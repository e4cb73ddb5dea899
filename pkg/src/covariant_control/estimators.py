"""scikit-learn style wrappers around the indirect and direct solvers.

``fit`` takes the boundary data (a BoundarySpec or a mapping of its
fields), ``predict`` returns the contravariant control at query times.
"""
from __future__ import annotations

from collections.abc import Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .costs import CostModel
from .direct import DirectProblem, evaluate_cost, optimize_problem, trajectory_of
from .models import build_model
from .shooting import BoundarySpec, optimality_residual, shoot

__all__ = ["IndirectSolver", "DirectSolver"]


def _boundary(bc):
    if isinstance(bc, BoundarySpec):
        return bc
    if isinstance(bc, Mapping):
        return BoundarySpec(**bc)
    raise TypeError(f"boundary must be a BoundarySpec or a mapping, got {type(bc).__name__}")


def _times(t, T):
    t = check_array(np.atleast_1d(np.asarray(t, dtype=float)), ensure_2d=False, input_name="t")
    if t.ndim != 1:
        raise ValueError("query times must be 1-D")
    if np.any(t < 0) or np.any(t > T * (1 + 1e-12)):
        raise ValueError(f"query times must lie in [0, {T}]")
    return t


class _Base(BaseEstimator):

    def _setup(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if int(self.steps) < 2:
            raise ValueError("steps must be >= 2")
        model = build_model(self.model, self.model_params)
        return model, CostModel(self.cost, dict(self.cost_weights or {}))

    def predict(self, t):
        """Contravariant control u(t), linearly interpolated between grid nodes."""
        check_is_fitted(self, "trajectory_")
        tr = self.trajectory_
        t = _times(t, tr.t[-1])
        return np.stack([np.interp(t, tr.t, tr.u[:, k]) for k in range(tr.dim)], axis=-1)

    def predict_state(self, t):
        """(q(t), zeta(t)) by linear interpolation of the node values."""
        check_is_fitted(self, "trajectory_")
        tr = self.trajectory_
        t = _times(t, tr.t[-1])
        q = np.stack([np.interp(t, tr.t, tr.q[:, k]) for k in range(tr.dim)], axis=-1)
        z = np.stack([np.interp(t, tr.t, tr.zeta[:, k]) for k in range(tr.dim)], axis=-1)
        return q, z

    def score(self, X=None, y=None):
        """Negative achieved cost (higher is better)."""
        check_is_fitted(self, "cost_")
        return -self.cost_


class IndirectSolver(_Base):
    """Shooting solution of the state-adjoint boundary value problem."""

    def __init__(self, model="double_pendulum", model_params=None, cost="quadratic_control",
                 cost_weights=None, horizon=1.0, steps=200, tol=1e-9, max_iter=100,
                 integrator="rk4", initial_guess=None):
        self.model = model
        self.model_params = model_params
        self.cost = cost
        self.cost_weights = cost_weights
        self.horizon = horizon
        self.steps = steps
        self.tol = tol
        self.max_iter = max_iter
        self.integrator = integrator
        self.initial_guess = initial_guess

    def fit(self, X, y=None):
        model, cost = self._setup()
        bc = _boundary(X)
        rep = shoot(model, cost, bc, float(self.horizon), int(self.steps), tol=self.tol,
                    max_iter=self.max_iter, initial_guess=self.initial_guess, method=self.integrator)
        self.report_ = rep
        self.trajectory_ = rep.trajectory
        self.cost_ = rep.cost
        self.converged_ = rep.converged
        self.unknowns_ = rep.unknowns
        self.optimality_residual_ = optimality_residual(model, cost, rep.trajectory)
        return self


class DirectSolver(_Base):
    """Direct transcription with a terminal penalty, solved by BFGS."""

    def __init__(self, model="double_pendulum", model_params=None, cost="quadratic_control",
                 cost_weights=None, horizon=1.0, steps=50, penalty_weight=1e6, scheme="linear",
                 max_evals=20000, initial_control=None):
        self.model = model
        self.model_params = model_params
        self.cost = cost
        self.cost_weights = cost_weights
        self.horizon = horizon
        self.steps = steps
        self.penalty_weight = penalty_weight
        self.scheme = scheme
        self.max_evals = max_evals
        self.initial_control = initial_control

    def fit(self, X, y=None):
        model, cost = self._setup()
        bc = _boundary(X)
        p = DirectProblem(model, cost, bc, float(self.horizon), int(self.steps),
                          penalty_weight=self.penalty_weight, control_grid=self.initial_control,
                          scheme=self.scheme)
        best, rep = optimize_problem(p, max_evals=self.max_evals)
        self.problem_ = best
        self.report_ = rep
        self.control_grid_ = best.control_grid
        self.trajectory_ = trajectory_of(best)
        self.cost_ = evaluate_cost(best)
        self.converged_ = rep.converged
        return self
