"""Metric structure induced by a mass matrix.

Index layout of every array (leading batch axes allowed everywhere):

* ``metric[..., k, l]``                 M_{kl}
* ``metric_partials[..., j, k, l]``     d_j M_{kl}
* ``christoffel[..., j, i, k]``         Gamma^j_{ik}
* ``christoffel_partials[..., m, j, i, k]``  d_m Gamma^j_{ik}
* ``riemann[..., j, i, k, l]``          R^j_{ikl}

with R^j_{ikl} = d_l Gamma^j_{ik} - d_k Gamma^j_{il}
+ Gamma^p_{ik} Gamma^j_{pl} - Gamma^p_{il} Gamma^j_{pk}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DegenerateMetricError",
    "MetricProvider",
    "PotentialProvider",
    "GeometryEval",
    "RicciReport",
    "eval_geometry",
    "raise_index",
    "lower_index",
    "curvature_force",
    "covariant_hessian_V",
    "covariant_time_derivative_covector",
    "check_ricci_identity",
    "central_difference",
]


class DegenerateMetricError(ValueError):
    """The mass matrix failed to factor as symmetric positive definite."""

    def __init__(self, q):
        self.q = np.asarray(q)
        super().__init__(f"mass matrix is not positive definite at q={np.array2string(self.q, precision=17)}")


def _steps(q, scale):
    return scale * np.maximum(1.0, np.abs(q))


def central_difference(fun, q, scale):
    """Central differences of ``fun`` along each coordinate of ``q``.

    Returns an array with the derivative axis inserted right after the batch
    axes: ``out[..., j, *fun_shape] = d_j fun``.  The step for coordinate j is
    ``scale * max(1, |q_j|)``.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[-1]
    h = _steps(q, scale)
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        hj = h[..., j]
        dq = hj[..., None] * e
        fp = fun(q + dq)
        fm = fun(q - dq)
        denom = (2.0 * hj).reshape(hj.shape + (1,) * (np.ndim(fp) - hj.ndim))
        cols.append((fp - fm) / denom)
    return np.stack(cols, axis=q.ndim - 1)


@dataclass(frozen=True)
class MetricProvider:
    """Mass matrix M(q) and optionally its analytic partials.

    All callables take ``q`` of shape ``(..., n)`` and must broadcast over
    leading axes.  Missing partials fall back to central differences with
    step ``fd_step * max(1, |q_j|)`` (first derivatives) and
    ``fd_step2 * max(1, |q_j|)`` (Christoffel partials).
    """

    dim: int
    mass: Callable
    mass_partials: Optional[Callable] = None
    mass_second_partials: Optional[Callable] = None
    fd_step: float = 1e-6
    fd_step2: float = 1e-4

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        if not (self.fd_step > 0 and self.fd_step2 > 0):
            raise ValueError("finite-difference steps must be positive")

    @property
    def analytic(self):
        return self.mass_partials is not None

    def metric(self, q):
        # mass() must return exactly symmetric matrices (checked when models are built)
        return np.asarray(self.mass(q), dtype=float)

    def metric_partials(self, q):
        if self.mass_partials is not None:
            return np.asarray(self.mass_partials(q), dtype=float)
        return central_difference(self.metric, q, self.fd_step)

    def without_derivatives(self, fd_step=None):
        """Same metric, forced onto the finite-difference path."""
        return MetricProvider(self.dim, self.mass, None, None,
                              self.fd_step if fd_step is None else fd_step, self.fd_step2)


@dataclass(frozen=True)
class PotentialProvider:
    """Potential energy V(q) (joules) with optional analytic derivatives."""

    value: Callable
    gradient_fn: Optional[Callable] = None
    hessian_fn: Optional[Callable] = None
    fd_step: float = 1e-6
    fd_step2: float = 1e-4

    def __call__(self, q):
        return np.asarray(self.value(q), dtype=float)

    def gradient(self, q):
        if self.gradient_fn is not None:
            return np.asarray(self.gradient_fn(q), dtype=float)
        return central_difference(self, q, self.fd_step)

    def hessian(self, q):
        if self.hessian_fn is not None:
            return np.asarray(self.hessian_fn(q), dtype=float)
        if self.gradient_fn is not None:
            H = central_difference(self.gradient, q, self.fd_step)
        else:
            H = central_difference(
                lambda x: central_difference(self, x, self.fd_step2), q, self.fd_step2)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def without_derivatives(self):
        return PotentialProvider(self.value, None, None, self.fd_step, self.fd_step2)


@dataclass(frozen=True)
class GeometryEval:
    """Immutable bundle of metric quantities at a configuration (or a batch).

    ``christoffel_partials`` and ``riemann`` are ``None`` when the bundle was
    evaluated with ``curvature=False``.
    """

    q: np.ndarray
    metric: np.ndarray
    metric_inv: np.ndarray
    metric_partials: np.ndarray
    christoffel: np.ndarray
    christoffel_partials: Optional[np.ndarray] = None
    riemann: Optional[np.ndarray] = None

    @property
    def dim(self):
        return self.metric.shape[-1]


def _factor_small(M, q):
    # explicit inverse for n <= 2; LAPACK call overhead dominates at this size
    if M.shape[-1] == 2 and M.ndim == 2:
        a, b, d = float(M[0, 0]), float(M[0, 1]), float(M[1, 1])
        det = a * d - b * b
        if not (a > 0 and det > 0):
            raise DegenerateMetricError(q)
        return np.array([[d / det, -b / det], [-b / det, a / det]])
    a = M[..., 0, 0]
    if not np.all(a > 0):
        raise DegenerateMetricError(q)
    if M.shape[-1] == 1:
        return 1.0 / M
    b, d = M[..., 0, 1], M[..., 1, 1]
    det = a * d - b * b
    if not np.all(det > 0):
        raise DegenerateMetricError(q)
    Minv = np.empty(M.shape)
    Minv[..., 0, 0] = d / det
    Minv[..., 1, 1] = a / det
    Minv[..., 0, 1] = Minv[..., 1, 0] = -b / det
    return Minv


def _factor(M, q):
    if M.shape[-1] <= 2:
        return _factor_small(M, q)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise DegenerateMetricError(q) from None
    if not np.all(np.isfinite(L)):
        raise DegenerateMetricError(q)
    n = M.shape[-1]
    Linv = np.linalg.solve(L, np.broadcast_to(np.eye(n), M.shape))
    Minv = np.swapaxes(Linv, -1, -2) @ Linv
    return 0.5 * (Minv + np.swapaxes(Minv, -1, -2))


def _first_kind(dM):
    # Gamma_{l,ik} = 1/2 (d_i M_{lk} + d_k M_{li} - d_l M_{ik})
    b = tuple(range(dM.ndim - 3))
    nd = dM.ndim
    swap = dM.transpose(b + (nd - 2, nd - 3, nd - 1))
    roll = dM.transpose(b + (nd - 2, nd - 1, nd - 3))
    return 0.5 * (swap + roll - dM)


def _christoffel(Minv, dM):
    n = Minv.shape[-1]
    F = _first_kind(dM)
    G = (Minv @ F.reshape(F.shape[:-3] + (n, n * n))).reshape(F.shape)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def _christoffel_at(provider, q):
    M = provider.metric(q)
    Minv = _factor(M, q)
    return _christoffel(Minv, provider.metric_partials(q))


def eval_geometry(provider, q, curvature=True):
    """Evaluate the metric, its inverse, Christoffel symbols and curvature at q.

    Raises DegenerateMetricError if M(q) is not positive definite.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != provider.dim:
        raise ValueError(f"expected configuration of length {provider.dim}, got shape {q.shape}")
    M = provider.metric(q)
    Minv = _factor(M, q)
    dM = provider.metric_partials(q)
    G = _christoffel(Minv, dM)
    dG = R = None
    if curvature:
        if provider.mass_second_partials is not None:
            d2M = np.asarray(provider.mass_second_partials(q), dtype=float)
            # d_m Gamma^j_{ik} = -M^{ja} d_m M_{ab} Gamma^b_{ik} + M^{jl} d_m Gamma_{l,ik}
            n = M.shape[-1]
            lead = d2M.shape[:-3]
            d_first = _first_kind(d2M)
            # M^{-1} (d_m Gamma_{l,ik} - d_m M_{lb} Gamma^b_{ik}), as batched matmuls;
            # exactly symmetric in (i, k) because both terms are
            inner = d_first - (dM @ G.reshape(G.shape[:-3] + (1, n, n * n))).reshape(lead + (n, n, n))
            dG = (Minv[..., None, :, :] @ inner.reshape(lead + (n, n * n))).reshape(lead + (n, n, n))
        else:
            dG = central_difference(lambda x: _christoffel_at(provider, x), q, provider.fd_step2)
            dG = 0.5 * (dG + np.swapaxes(dG, -1, -2))
        R = riemann_from(G, dG)
    arrays = [q, M, Minv, dM, G, dG, R]
    for a in arrays:
        if a is not None:
            a.setflags(write=False)
    return GeometryEval(*arrays)


def riemann_from(G, dG):
    """R^j_{ikl} from Christoffel symbols and their partials."""
    nd = dG.ndim
    dterm = dG.transpose(tuple(range(nd - 4)) + (nd - 3, nd - 2, nd - 1, nd - 4))
    quad = np.einsum("...pik,...jpl->...jikl", G, G)
    out = dterm + quad
    return out - np.swapaxes(out, -1, -2)


def raise_index(geom, xi):
    """phi^k = M^{kj} xi_j."""
    return np.einsum("...kj,...j->...k", geom.metric_inv, xi)


def lower_index(geom, phi):
    """phi_j = M_{jk} phi^k."""
    return np.einsum("...jk,...k->...j", geom.metric, phi)


def curvature_force(geom, zeta, xi):
    """(R_zeta . xi)_j = R^i_{klj} zeta^k zeta^l xi_i."""
    if geom.riemann is None:
        raise ValueError("geometry was evaluated without curvature")
    return np.einsum("...iklj,...k,...l,...i->...j", geom.riemann, zeta, zeta, xi)


def covariant_hessian_V(geom, pot, q=None):
    """(nabla^2 V)_{kl} = d_k d_l V - Gamma^j_{kl} d_j V."""
    q = geom.q if q is None else q
    return pot.hessian(q) - np.einsum("...jkl,...j->...kl", geom.christoffel, pot.gradient(q))


def covariant_time_derivative_covector(geom, zeta, xi, xi_dot):
    """(D xi / dt)_j = xi_dot_j - Gamma^k_{jl} xi_k zeta^l along a trajectory."""
    return xi_dot - np.einsum("...kjl,...k,...l->...j", geom.christoffel, xi, zeta)


@dataclass(frozen=True)
class RicciReport:
    """Max residuals of the two metric-compatibility identities."""

    lower: float
    upper: float

    @property
    def max(self):
        return max(self.lower, self.upper)


def check_ricci_identity(provider, q):
    """Residuals of d_j M_{kl} = Gamma_{jk}^p M_{lp} + Gamma^p_{jl} M_{kp} and its inverse form.

    The inverse-metric partials come from the provider's derivative path:
    -M^{-1} dM M^{-1} for analytic providers, central differences of M^{-1}
    otherwise.
    """
    q = np.asarray(q, dtype=float)
    geom = eval_geometry(provider, q, curvature=False)
    G, M, Minv, dM = geom.christoffel, geom.metric, geom.metric_inv, geom.metric_partials
    low = dM - np.einsum("...pjk,...lp->...jkl", G, M) - np.einsum("...pjl,...kp->...jkl", G, M)
    if provider.analytic:
        dMinv = -np.einsum("...ka,...jab,...bl->...jkl", Minv, dM, Minv)
    else:
        dMinv = central_difference(lambda x: _factor(provider.metric(x), x), q, provider.fd_step)
    up = dMinv + np.einsum("...kjp,...pl->...jkl", G, Minv) + np.einsum("...ljp,...pk->...jkl", G, Minv)
    return RicciReport(float(np.max(np.abs(low))), float(np.max(np.abs(up))))
