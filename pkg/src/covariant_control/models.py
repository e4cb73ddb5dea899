"""Built-in mechanical systems with analytic metric and potential derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import MetricProvider, PotentialProvider, eval_geometry, DegenerateMetricError

__all__ = ["MechanicalModel", "ModelError", "build_model", "list_models"]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class MechanicalModel:
    name: str
    dim: int
    metric: MetricProvider
    potential: PotentialProvider
    params: dict
    domain_note: str
    domain_low: np.ndarray = field(repr=False)
    domain_high: np.ndarray = field(repr=False)
    test_only: bool = False

    def sample(self, rng, size=None):
        """Uniform random configurations inside the model's domain box."""
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.domain_low, self.domain_high, size=shape)

    def finite_difference(self, fd_step=1e-6):
        """Copy of the model with every analytic derivative removed."""
        return MechanicalModel(self.name, self.dim, self.metric.without_derivatives(fd_step),
                               self.potential.without_derivatives(), dict(self.params),
                               self.domain_note, self.domain_low, self.domain_high, self.test_only)


def _zeros_like_batch(q, *tail):
    q = np.asarray(q, dtype=float)
    return np.zeros(q.shape[:-1] + tail)


def _flat(n, k):
    n = int(n)

    def mass(q):
        return np.broadcast_to(np.eye(n), np.shape(q)[:-1] + (n, n)).copy()

    metric = MetricProvider(n, mass,
                            lambda q: _zeros_like_batch(q, n, n, n),
                            lambda q: _zeros_like_batch(q, n, n, n, n))
    potential = PotentialProvider(lambda q: 0.5 * k * np.sum(np.square(q), axis=-1),
                                  lambda q: k * np.asarray(q, dtype=float),
                                  lambda q: k * np.broadcast_to(np.eye(n), np.shape(q)[:-1] + (n, n)).copy())
    return metric, potential


def _pendulum(m, l, g):
    inertia, mgl = m * l * l, m * g * l

    metric = MetricProvider(1, lambda q: np.full(np.shape(q)[:-1] + (1, 1), inertia),
                            lambda q: _zeros_like_batch(q, 1, 1, 1),
                            lambda q: _zeros_like_batch(q, 1, 1, 1, 1))
    potential = PotentialProvider(lambda q: -mgl * np.cos(np.asarray(q)[..., 0]),
                                  lambda q: mgl * np.sin(np.asarray(q)),
                                  lambda q: mgl * np.cos(np.asarray(q))[..., None])
    return metric, potential


def _double_pendulum(m1, m2, l1, l2, g):
    # relative joint angles: q1 from the downward vertical, q2 relative to link 1
    a = (m1 + m2) * l1 * l1 + m2 * l2 * l2
    b = m2 * l1 * l2
    d = m2 * l2 * l2
    g1 = (m1 + m2) * g * l1
    g2 = m2 * g * l2

    def mass(q):
        c = np.cos(np.asarray(q, dtype=float)[..., 1])
        M = np.empty(c.shape + (2, 2))
        M[..., 0, 0] = a + 2.0 * b * c
        M[..., 0, 1] = M[..., 1, 0] = d + b * c
        M[..., 1, 1] = d
        return M

    def mass_partials(q):
        s = np.sin(np.asarray(q, dtype=float)[..., 1])
        dM = np.zeros(s.shape + (2, 2, 2))
        dM[..., 1, 0, 0] = -2.0 * b * s
        dM[..., 1, 0, 1] = dM[..., 1, 1, 0] = -b * s
        return dM

    def mass_second_partials(q):
        c = np.cos(np.asarray(q, dtype=float)[..., 1])
        d2M = np.zeros(c.shape + (2, 2, 2, 2))
        d2M[..., 1, 1, 0, 0] = -2.0 * b * c
        d2M[..., 1, 1, 0, 1] = d2M[..., 1, 1, 1, 0] = -b * c
        return d2M

    def value(q):
        q = np.asarray(q, dtype=float)
        return -g1 * np.cos(q[..., 0]) - g2 * np.cos(q[..., 0] + q[..., 1])

    def gradient(q):
        q = np.asarray(q, dtype=float)
        out = np.empty(q.shape)
        out[..., 1] = g2 * np.sin(q[..., 0] + q[..., 1])
        out[..., 0] = g1 * np.sin(q[..., 0]) + out[..., 1]
        return out

    def hessian(q):
        q = np.asarray(q, dtype=float)
        c12 = g2 * np.cos(q[..., 0] + q[..., 1])
        H = np.empty(c12.shape + (2, 2))
        H[..., 0, 0] = g1 * np.cos(q[..., 0]) + c12
        H[..., 0, 1] = H[..., 1, 0] = c12
        H[..., 1, 1] = c12
        return H

    return (MetricProvider(2, mass, mass_partials, mass_second_partials),
            PotentialProvider(value, gradient, hessian))


def _sphere():
    def mass(q):
        s = np.sin(np.asarray(q, dtype=float)[..., 0])
        M = np.zeros(s.shape + (2, 2))
        M[..., 0, 0] = 1.0
        M[..., 1, 1] = s * s
        return M

    def mass_partials(q):
        q1 = np.asarray(q, dtype=float)[..., 0]
        dM = np.zeros(q1.shape + (2, 2, 2))
        dM[..., 0, 1, 1] = np.sin(2.0 * q1)
        return dM

    def mass_second_partials(q):
        q1 = np.asarray(q, dtype=float)[..., 0]
        d2M = np.zeros(q1.shape + (2, 2, 2, 2))
        d2M[..., 0, 0, 1, 1] = 2.0 * np.cos(2.0 * q1)
        return d2M

    metric = MetricProvider(2, mass, mass_partials, mass_second_partials)
    potential = PotentialProvider(lambda q: np.zeros(np.shape(q)[:-1]),
                                  lambda q: _zeros_like_batch(q, 2),
                                  lambda q: _zeros_like_batch(q, 2, 2))
    return metric, potential


@dataclass(frozen=True)
class _Entry:
    name: str
    defaults: dict
    positive: tuple
    builder: Callable
    domain: Callable
    domain_note: str
    description: str
    test_only: bool = False


_CATALOG = (
    _Entry("flat", {"n": 2, "k": 0.0}, ("n",), lambda p: _flat(p["n"], p["k"]),
           lambda p: (np.full(int(p["n"]), -2.0), np.full(int(p["n"]), 2.0)),
           "all of R^n", "point mass, identity metric, optional potential k|q|^2/2"),
    _Entry("pendulum", {"m": 1.0, "l": 1.0, "g": 9.81}, ("m", "l"),
           lambda p: _pendulum(p["m"], p["l"], p["g"]),
           lambda p: (np.array([-np.pi]), np.array([np.pi])),
           "any angle (radians)", "simple pendulum, q measured from the downward vertical"),
    _Entry("double_pendulum", {"m1": 1.0, "m2": 1.0, "l1": 1.0, "l2": 1.0, "g": 9.81},
           ("m1", "m2", "l1", "l2"),
           lambda p: _double_pendulum(p["m1"], p["m2"], p["l1"], p["l2"], p["g"]),
           lambda p: (np.full(2, -np.pi), np.full(2, np.pi)),
           "any joint angles (radians, relative)", "planar two-link chain with point masses"),
    _Entry("sphere", {}, (), lambda p: _sphere(),
           lambda p: (np.array([np.pi / 4, -np.pi]), np.array([3 * np.pi / 4, np.pi])),
           "polar band pi/4 <= q1 <= 3pi/4, q2 any",
           "unit 2-sphere metric, V = 0 (test only)",
           test_only=True),
)
_BY_NAME = {e.name: e for e in _CATALOG}


def list_models():
    """Catalog of built-in models, in a stable order."""
    return [
        {
            "name": e.name,
            "params": dict(e.defaults),
            "required": sorted(e.defaults),
            "description": e.description,
            "domain": e.domain_note,
            "test_only": e.test_only,
        }
        for e in _CATALOG
    ]


def _resolve_params(entry, params):
    params = dict(params or {})
    unknown = sorted(set(params) - set(entry.defaults))
    if unknown:
        raise ModelError(f"model {entry.name!r}: unknown parameter(s) {unknown}; "
                         f"expected a subset of {sorted(entry.defaults)}")
    out = dict(entry.defaults)
    for key, val in params.items():
        if val is None:
            raise ModelError(f"model {entry.name!r}: parameter {key!r} is missing a value")
        out[key] = val
    for key, val in out.items():
        if not np.isfinite(float(val)):
            raise ModelError(f"model {entry.name!r}: parameter {key!r} must be finite")
    for key in entry.positive:
        if float(out[key]) <= 0:
            raise ModelError(f"model {entry.name!r}: parameter {key!r} must be positive, got {out[key]}")
    if "n" in out:
        if float(out["n"]) != int(out["n"]):
            raise ModelError(f"model {entry.name!r}: parameter 'n' must be an integer")
        out["n"] = int(out["n"])
    return out


def _validate(model, seed=0):
    rng = np.random.default_rng(seed)
    grid = model.sample(rng, 100)
    M = model.metric.metric(grid)
    if not np.array_equal(M, np.swapaxes(M, -1, -2)):
        raise ModelError(f"model {model.name!r}: mass matrix is not exactly symmetric")
    try:
        eval_geometry(model.metric, grid, curvature=False)
    except DegenerateMetricError as exc:
        raise ModelError(f"model {model.name!r}: {exc}") from None
    if model.metric.analytic:
        pts = model.sample(rng, 20)
        fd = model.metric.without_derivatives()
        a, b = model.metric.metric_partials(pts), fd.metric_partials(pts)
        scale = 1.0 + np.max(np.abs(model.metric.metric(pts)))
        if np.max(np.abs(a - b)) > 1e-6 * scale:
            raise ModelError(f"model {model.name!r}: analytic mass partials disagree with finite differences")
        ga = model.potential.gradient(pts)
        gb = model.potential.without_derivatives().gradient(pts)
        if np.max(np.abs(ga - gb)) > 1e-6 * (1.0 + np.max(np.abs(ga))):
            raise ModelError(f"model {model.name!r}: analytic potential gradient disagrees with finite differences")


def build_model(name, params=None, validate=True):
    """Build a built-in model by name, filling unspecified parameters with defaults."""
    if name not in _BY_NAME:
        raise ModelError(f"unknown model {name!r}; available: {[e.name for e in _CATALOG]}")
    entry = _BY_NAME[name]
    p = _resolve_params(entry, params)
    metric, potential = entry.builder(p)
    low, high = entry.domain(p)
    model = MechanicalModel(name, metric.dim, metric, potential, p, entry.domain_note,
                            low, high, entry.test_only)
    if validate:
        _validate(model)
    return model
