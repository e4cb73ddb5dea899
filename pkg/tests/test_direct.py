import numpy as np
import pytest
from scipy.integrate import trapezoid

from covariant_control.costs import CostModel
from covariant_control.direct import (DirectProblem, evaluate_cost, optimize, optimize_problem,
                                      rollout, trajectory_of)
from covariant_control.shooting import BoundarySpec, shoot

REST = BoundarySpec("C", [0.0], [0.0], [1.0], [0.0])
DP_BC = BoundarySpec("C", [0.0, 0.0], [0.0, 0.0], [0.2, -0.1], [0.0, 0.0])


def test_zero_control_case_a_is_free(flat2):
    p = DirectProblem(flat2, CostModel(), BoundarySpec("A", [0.0, 1.0], [1.0, 0.0]), 1.0, 10)
    assert evaluate_cost(p) == 0.0


def test_analytic_control_cost(flat1):
    for scheme, nodes in (("linear", 1001), ("stage", 2001)):
        t = np.linspace(0, 1, nodes)
        p = DirectProblem(flat1, CostModel(), REST, 1.0, 1000, control_grid=(6 - 12 * t)[:, None],
                          scheme=scheme)
        assert evaluate_cost(p) == pytest.approx(6.0, abs=1e-3)


def test_penalty_dominated_case_b(flat1):
    bc = BoundarySpec("B", [0.0], qT=[1.0])
    p = DirectProblem(flat1, CostModel(), bc, 1.0, 10, zeta0=[0.0], penalty_weight=1e4)
    assert evaluate_cost(p) == pytest.approx(1e4, rel=1e-12)


def test_rest_to_rest_direct(flat1):
    grid, J, rep = optimize(DirectProblem(flat1, CostModel(), REST, 1.0, 50))
    assert rep.converged
    t = np.linspace(0, 1, 51)
    u_star = 6 - 12 * t
    dist = np.sqrt(trapezoid((grid[:, 0] - u_star) ** 2, t))
    assert dist <= 0.05 * np.sqrt(trapezoid(u_star ** 2, t))
    assert abs(J - 6.0) <= 0.06


def test_case_a_random_start(flat2, rng):
    bc = BoundarySpec("A", [0.0, 0.0], [1.0, 0.0])
    p = DirectProblem(flat2, CostModel(), bc, 1.0, 20, control_grid=rng.normal(size=(21, 2)))
    grid, J, rep = optimize(p)
    assert rep.converged and abs(J) <= 1e-6


def test_case_b_optimizes_initial_velocity(flat2):
    bc = BoundarySpec("B", [0.0, 0.0], qT=[1.0, -2.0])
    best, rep = optimize_problem(DirectProblem(flat2, CostModel(), bc, 2.0, 10, zeta0=[0.0, 0.0]))
    assert rep.converged
    assert np.allclose(best.zeta0, [0.5, -1.0], atol=1e-4)
    assert evaluate_cost(best) <= 1e-6


def test_double_pendulum_agreement(dpend):
    J_ind = shoot(dpend, CostModel(), DP_BC, 1.0, 200).cost
    best, rep = optimize_problem(DirectProblem(dpend, CostModel(), DP_BC, 1.0, 50))
    assert rep.converged
    assert abs(evaluate_cost(best) - J_ind) <= 1e-2 * (1 + J_ind)
    assert rep.terminal_residual <= 1e-3


def test_rollout_batched_and_trajectory(dpend, rng):
    p = DirectProblem(dpend, CostModel(), DP_BC, 1.0, 8, scheme="stage",
                      control_grid=rng.normal(size=(17, 2)))
    X = np.stack([p.decision_vector(), 0.5 * p.decision_vector()])
    J, r, _ = rollout(p, X)
    J0, r0, _ = rollout(p, X[0])
    assert J[0] == pytest.approx(J0, rel=1e-14) and np.allclose(r[0], r0)
    tr = trajectory_of(p)
    assert tr.q.shape == (9, 2) and np.array_equal(tr.u, p.control_grid[::2])
    assert tr.cost == pytest.approx(float(J0))


def test_exhausted_budget_is_reported(dpend):
    _, rep = optimize_problem(DirectProblem(dpend, CostModel(), DP_BC, 1.0, 10), max_evals=3)
    assert rep.exhausted and not rep.converged


@pytest.mark.parametrize("kwargs,match", [
    ({"T": 0.0}, "T must"), ({"N": 0}, "N must"), ({"scheme": "spline"}, "scheme"),
    ({"penalty_weight": -1.0}, "penalty"), ({"control_grid": np.zeros((3, 1))}, "shape"),
])
def test_problem_validation(flat1, kwargs, match):
    args = {"model": flat1, "cost": CostModel(), "bc": REST, "T": 1.0, "N": 10, **kwargs}
    with pytest.raises(ValueError, match=match):
        DirectProblem(**args)
