"""Running-cost integrands gamma(q, zeta, u) and the optimality inversion.

Every integrand is written in contravariant components (zeta^k, u^k) with
the metric taken from a GeometryEval, so ``d gamma / d zeta`` and
``d gamma / d u`` are covectors.  Coordinate partials are the primitive; the
covariant q-gradient applies the connection correction in one place.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import raise_index

__all__ = [
    "KINDS",
    "CostModel",
    "CostPartials",
    "InversionError",
    "gamma",
    "gamma_partials",
    "gamma_hessian_u",
    "gamma_covariant_q_gradient",
    "control_from_adjoint",
]

KINDS = ("quadratic_control", "quadratic_control_plus_velocity", "quartic_control")
_WEIGHTS = {
    "quadratic_control": {},
    "quadratic_control_plus_velocity": {"alpha": 1.0},
    "quartic_control": {},
}


class InversionError(RuntimeError):
    """Newton failed to solve d gamma / d u = xi."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class CostModel:
    kind: str = "quadratic_control"
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}; allowed kinds: {list(KINDS)}")
        allowed = _WEIGHTS[self.kind]
        extra = sorted(set(self.weights) - set(allowed))
        if extra:
            raise ValueError(f"cost kind {self.kind!r} takes weights {sorted(allowed)}, got {extra}")
        merged = {**allowed, **{k: float(v) for k, v in self.weights.items()}}
        if any(v < 0 or not np.isfinite(v) for v in merged.values()):
            raise ValueError("cost weights must be finite and non-negative")
        object.__setattr__(self, "weights", merged)

    @property
    def quadratic(self):
        return self.kind != "quartic_control"

    @property
    def alpha(self):
        return self.weights.get("alpha", 0.0)


class CostPartials(NamedTuple):
    """Coordinate partials of gamma: d/dq^j (at fixed zeta^k, u^k), d/dzeta^j, d/du^j."""

    q: np.ndarray
    zeta: np.ndarray
    u: np.ndarray


def _quad(M, a, b):
    return np.einsum("...k,...kl,...l->...", a, M, b)


def _dquad(dM, a):
    return np.einsum("...jkl,...k,...l->...j", dM, a, a)


def gamma(cost, geom, zeta, u):
    M = geom.metric
    su = _quad(M, u, u)
    if cost.kind == "quartic_control":
        return 0.25 * su * su
    g = 0.5 * su
    if cost.kind == "quadratic_control_plus_velocity":
        g = g + 0.5 * cost.alpha * _quad(M, zeta, zeta)
    return g


def gamma_partials(cost, geom, zeta, u):
    M, dM = geom.metric, geom.metric_partials
    Mu = np.einsum("...kl,...l->...k", M, u)
    if cost.kind == "quartic_control":
        su = np.einsum("...k,...k->...", u, Mu)[..., None]
        return CostPartials(0.5 * su * _dquad(dM, u), np.zeros_like(Mu), su * Mu)
    dq = 0.5 * _dquad(dM, u)
    dz = np.zeros_like(Mu)
    if cost.kind == "quadratic_control_plus_velocity":
        a = cost.alpha
        dq = dq + 0.5 * a * _dquad(dM, zeta)
        dz = a * np.einsum("...kl,...l->...k", M, zeta)
    return CostPartials(dq, dz, Mu)


def gamma_hessian_u(cost, geom, zeta, u):
    """d^2 gamma / du du (n x n)."""
    M = geom.metric
    if cost.kind != "quartic_control":
        return np.array(M)
    Mu = np.einsum("...kl,...l->...k", M, u)
    su = np.einsum("...k,...k->...", u, Mu)
    return su[..., None, None] * M + 2.0 * Mu[..., :, None] * Mu[..., None, :]


def gamma_covariant_q_gradient(cost, geom, zeta, u, partials=None):
    """Derivative along q with zeta and u parallel transported.

    (dgamma/dq)_j = d_j gamma - Gamma^l_{jk} zeta^k (dgamma/dzeta)_l
                    - Gamma^l_{jk} u^k (dgamma/du)_l
    """
    p = gamma_partials(cost, geom, zeta, u) if partials is None else partials
    G = geom.christoffel
    return (p.q
            - np.einsum("...ljk,...k,...l->...j", G, zeta, p.zeta)
            - np.einsum("...ljk,...k,...l->...j", G, u, p.u))


def control_from_adjoint(cost, geom, zeta, xi, u_guess=None, max_iter=50, max_halvings=30):
    """Solve (d gamma / d u)(u) = xi for the contravariant control u.

    Quadratic kinds use the closed form u = M^{-1} xi.  The quartic kind
    starts from its closed form and polishes it with damped Newton;
    converged when max_j |dgamma/du_j - xi_j| <= 1e-12 (1 + |xi|).
    ``u_guess`` is a warm start for kinds without a closed form.
    """
    xi = np.asarray(xi, dtype=float)
    if cost.quadratic:
        return raise_index(geom, xi)
    tol = 1e-12 * (1.0 + np.max(np.abs(xi), axis=-1))
    u_raised = raise_index(geom, xi)
    if cost.kind == "quartic_control":
        # u = c M^{-1} xi solves |u|^2 M u = xi exactly for c^3 (xi . M^{-1} xi) = 1
        s = np.einsum("...k,...k->...", xi, u_raised)
        c = np.where(s > 0, np.cbrt(np.where(s > 0, s, 1.0)) ** -1, 0.0)
        u_raised = c[..., None] * u_raised
    if u_guess is None:
        u = u_raised
    else:
        u = np.broadcast_to(np.asarray(u_guess, dtype=float), u_raised.shape)
        # a zero guess sits on the degenerate point of the quartic Hessian
        dead = np.all(u == 0.0, axis=-1)
        u = np.where(dead[..., None], u_raised, u)
    if cost.kind == "quartic_control":
        u = u_raised

    def resid(v):
        return gamma_partials(cost, geom, zeta, v).u - xi

    r = resid(u)
    err = np.max(np.abs(r), axis=-1)
    for _ in range(max_iter):
        active = err > tol
        if not np.any(active):
            return u
        H = gamma_hessian_u(cost, geom, zeta, u)
        H = np.where(active[..., None, None], H, np.eye(H.shape[-1]))
        step = np.linalg.solve(H, -r[..., None])[..., 0]
        t = np.ones(err.shape)
        for _ in range(max_halvings + 1):
            trial = u + t[..., None] * step
            rt = resid(trial)
            et = np.max(np.abs(rt), axis=-1)
            bad = active & ~(et < err)
            if not np.any(bad):
                break
            t = np.where(bad, 0.5 * t, t)
        accept = active & (et < err)
        u = np.where(accept[..., None], trial, u)
        r = np.where(accept[..., None], rt, r)
        err = np.where(accept, et, err)
        if not np.any(accept & (err > tol)) and np.any(err > tol):
            break
    if np.any(err > tol):
        raise InversionError("optimality inversion did not converge", float(np.max(err)))
    return u
