"""Optimal control of mechanical systems on the Riemannian manifold of the mass matrix."""
from .checks import CheckResult, geometry_suite
from .config import ConfigError, ScenarioConfig, dump_config, load_config, parse_config
from .costs import CostModel, InversionError, control_from_adjoint, gamma, gamma_partials
from .direct import DirectProblem, evaluate_cost, optimize
from .dynamics import (CoupledSystem, ForwardSystem, Trajectory, check_prop2_identity, coupled_field,
                       energy, forward_field, integrate_coupled, simulate)
from .estimators import DirectSolver, IndirectSolver
from .geometry import (DegenerateMetricError, GeometryEval, MetricProvider, PotentialProvider,
                       check_ricci_identity, curvature_force, eval_geometry, lower_index, raise_index)
from .integrators import IntegrationError, integrate
from .io import read_trajectory, write_report, write_trajectory
from .models import MechanicalModel, ModelError, build_model, list_models
from .shooting import BoundarySpec, ShootReport, ShootingError, residual, shoot

__version__ = "0.1.0"
