import numpy as np
import pytest

from covariant_control.dynamics import energy
from covariant_control.models import ModelError, build_model, list_models

import frozen


def test_flat_identity(flat2, rng):
    q = rng.normal(size=(5, 2))
    assert np.array_equal(flat2.metric.metric(q), np.broadcast_to(np.eye(2), (5, 2, 2)))
    assert np.all(flat2.potential(q) == 0)


def test_pendulum_unit():
    m = build_model("pendulum", {"m": 1, "l": 1, "g": 1})
    q = np.array([[0.0], [0.7]])
    assert np.allclose(m.metric.metric(q), 1.0)
    assert np.allclose(m.potential(q), -np.cos(q[:, 0]))


@pytest.mark.parametrize("q", list(frozen.DP_POINTS))
def test_double_pendulum_table(dpend, q):
    ref = frozen.DP_POINTS[q]
    qa = np.array(q)
    assert np.allclose(dpend.metric.metric(qa), ref["M"], rtol=1e-14, atol=1e-14)
    assert dpend.potential(qa) == pytest.approx(ref["V"], rel=1e-14)
    e = energy(dpend, (qa, np.array(frozen.DP_ENERGY_ZETA)))
    assert e == pytest.approx(ref["energy"], rel=1e-14)


def test_catalog_contract():
    cat = {m["name"]: m for m in list_models()}
    assert set(cat["double_pendulum"]["required"]) == {"m1", "m2", "l1", "l2", "g"}
    assert "n" in cat["flat"]["params"]
    assert cat["sphere"]["test_only"]
    for entry in cat.values():
        model = build_model(entry["name"])
        assert model.params == entry["params"]


@pytest.mark.parametrize("name,params,match", [
    ("nope", {}, "unknown model"),
    ("double_pendulum", {"m3": 1.0}, "unknown parameter"),
    ("double_pendulum", {"m1": -1.0}, "positive"),
    ("pendulum", {"l": float("nan")}, "finite"),
    ("flat", {"n": 1.5}, "integer"),
    ("pendulum", {"m": None}, "missing"),
])
def test_model_errors(name, params, match):
    with pytest.raises(ModelError, match=match):
        build_model(name, params)


def test_sample_stays_in_domain(sphere, rng):
    q = sphere.sample(rng, 1000)
    assert np.all(q[:, 0] >= np.pi / 4) and np.all(q[:, 0] <= 3 * np.pi / 4)


def test_finite_difference_copy(dpend, rng):
    fd = dpend.finite_difference()
    assert not fd.metric.analytic
    q = dpend.sample(rng, 5)
    assert np.allclose(fd.potential.gradient(q), dpend.potential.gradient(q), rtol=1e-7, atol=1e-7)


def test_potential_gradients_match_fd(dpend, pendulum, rng):
    for m in (dpend, pendulum):
        q = m.sample(rng, 20)
        fd = m.potential.without_derivatives()
        assert np.allclose(m.potential.gradient(q), fd.gradient(q), rtol=1e-7, atol=1e-7)
        assert np.allclose(m.potential.hessian(q), fd.hessian(q), rtol=1e-5, atol=1e-5)
