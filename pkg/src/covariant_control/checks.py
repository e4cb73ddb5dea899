"""Geometry invariant suite run by the ``check`` command."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import _first_kind, check_ricci_identity, eval_geometry

__all__ = ["CheckResult", "geometry_suite", "sectional_curvature", "SPHERE_SECTIONAL"]

# R_{0101} / det M on the unit sphere with R^j_{ikl} = d_l G^j_ik - d_k G^j_il + ...
# (sign frozen from a symbolic evaluation)
SPHERE_SECTIONAL = -1.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.threshold)

    def as_dict(self):
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "passed": self.passed}


def sectional_curvature(geom):
    """R_{0101} / det M for a 2-D metric, with R_{abcd} = M_{ap} R^p_{bcd}."""
    R, M = geom.riemann, geom.metric
    low = np.einsum("...ap,...p->...a", M, R[..., :, 1, 0, 1])[..., 0]
    return low / np.linalg.det(M)


def _max(a):
    return float(np.max(np.abs(a), initial=0.0))


def geometry_suite(model, points=100, seed=0, fd_step=1e-6):
    """Evaluate every geometry invariant on ``points`` random domain points."""
    rng = np.random.default_rng(seed)
    q = model.sample(rng, points)
    provider = model.metric
    geom = eval_geometry(provider, q)
    n = model.dim
    out = []

    ident = np.einsum("...ij,...jk->...ik", geom.metric, geom.metric_inv) - np.eye(n)
    out.append(CheckResult("metric_inverse", _max(ident), 1e-12))

    G = geom.christoffel
    out.append(CheckResult("christoffel_symmetry", _max(G - np.swapaxes(G, -1, -2)), 0.0))
    raw = np.einsum("...jl,...lik->...jik", geom.metric_inv, _first_kind(geom.metric_partials))
    out.append(CheckResult("christoffel_formula", _max(raw - G), 1e-10))

    R = geom.riemann
    scale = _max(R)
    anti = _max(R + np.swapaxes(R, -1, -2)) / scale if scale > 0 else 0.0
    out.append(CheckResult("riemann_antisymmetry_rel", anti, 1e-10))

    if provider.analytic:
        out.append(CheckResult("ricci_identity_analytic", check_ricci_identity(provider, q).max, 1e-12))
        fd = provider.without_derivatives(fd_step)
        a, b = provider.metric_partials(q), fd.metric_partials(q)
        rel = _max(a - b) / max(_max(a), 1.0)
        out.append(CheckResult("fd_vs_analytic_mass_partials_rel", rel, 1e-6))
    else:
        fd = provider
    out.append(CheckResult("ricci_identity_fd", check_ricci_identity(fd, q).max, 1e-8))

    M = geom.metric
    if np.all(M == M[:1]):
        out.append(CheckResult("constant_metric_collapse", max(_max(G), _max(R)), 0.0))
    if model.name == "sphere":
        out.append(CheckResult("sphere_sectional_curvature",
                               _max(sectional_curvature(geom) - SPHERE_SECTIONAL), 1e-8))
    return out
