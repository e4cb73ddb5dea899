"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 solver failure or
non-convergence, 3 invariant violation reported by ``check``.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np
from scipy.integrate import trapezoid

from .checks import geometry_suite
from .config import ConfigError, load_config
from .costs import InversionError
from .geometry import DegenerateMetricError
from .integrators import IntegrationError
from .direct import DirectProblem, evaluate_cost, optimize_problem, trajectory_of
from .dynamics import simulate
from .io import report_text, write_report, write_trajectory
from .models import ModelError, build_model
from .shooting import ShootingError, optimality_residual, shoot

__all__ = ["main", "run_command", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_CHECK"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3
COMMANDS = ("check", "simulate", "solve", "direct", "compare")
AGREEMENT_TOL = 1e-2

log = logging.getLogger("covariant_control")


def _parser():
    p = argparse.ArgumentParser(prog="covariant-control",
                                description="Covariant optimal control of mechanical systems.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "check": "run the geometry invariant suite on the configured model",
        "simulate": "integrate the forward dynamics under the configured control",
        "solve": "solve the boundary value problem by shooting",
        "direct": "solve by direct transcription (oracle)",
        "compare": "run solve and direct and report their difference",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        if name == "check":
            s.add_argument("config", nargs="?", help="scenario JSON file")
            s.add_argument("--model", help="model name (instead of a config file)")
            s.add_argument("--points", type=int, default=100, help="random points per check")
            s.add_argument("--seed", type=int, default=0)
        else:
            s.add_argument("config", help="scenario JSON file")
            s.add_argument("--trajectory", help="CSV output path (overrides config)")
        s.add_argument("--report", help="JSON report path (overrides config; default stdout)")
    return p


def _scenario(cfg):
    return {
        "model": {"name": cfg.model.name, "params": cfg.build_model().params},
        "cost": {"kind": cfg.cost.kind, "weights": cfg.build_cost().weights},
        "horizon_T": cfg.horizon_T,
        "steps_N": cfg.steps_N,
        "boundary": cfg.boundary.model_dump(),
        "derivatives": cfg.solver.derivatives,
    }


def _emit(report, path):
    if path:
        write_report(report, path)
    else:
        sys.stdout.write(report_text(report))


def _traj_summary(traj):
    e = traj.energy
    return {"final_q": traj.q[-1], "final_zeta": traj.zeta[-1], "cost": traj.cost,
            "energy_drift_rel": float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-300))}


def _cmd_check(args):
    if args.config:
        cfg = load_config(args.config)
        model = cfg.build_model()
    elif args.model:
        model = build_model(args.model)
    else:
        raise ConfigError(["check needs a config file or --model"])
    results = geometry_suite(model, points=args.points, seed=args.seed)
    ok = all(r.passed for r in results)
    report = {"command": "check", "model": {"name": model.name, "params": model.params},
              "points": args.points, "seed": args.seed,
              "invariants": [r.as_dict() for r in results], "passed": ok}
    for r in results:
        log.info("%-36s %.3e <= %.1e %s", r.name, r.value, r.threshold, "ok" if r.passed else "FAIL")
    return report, None, EXIT_OK if ok else EXIT_CHECK


def _cmd_simulate(cfg, model, cost, bc):
    if bc.zeta0 is None:
        raise ConfigError(["boundary.zeta0: simulate needs an initial velocity"])
    control = None if cfg.control is None else np.asarray(cfg.control, dtype=float)
    traj = simulate(model, bc.q0, bc.zeta0, cfg.horizon_T, cfg.steps_N, control,
                    method=cfg.solver.integrator)
    return {"command": "simulate", **_traj_summary(traj)}, traj, EXIT_OK


def _shoot(cfg, model, cost, bc):
    s = cfg.solver
    rep = shoot(model, cost, bc, cfg.horizon_T, cfg.steps_N, tol=s.tol, max_iter=s.max_iter,
                initial_guess=s.initial_guess, method=s.integrator)
    out = {"converged": rep.converged, "iterations": rep.iterations,
           "residual_norm": rep.residual_norm, "newton_history": rep.newton_history,
           "unknowns": rep.unknowns, "cost": rep.cost, "message": rep.message,
           "optimality_residual": optimality_residual(model, cost, rep.trajectory),
           "tol": s.tol}
    return rep, out


def _cmd_solve(cfg, model, cost, bc):
    rep, out = _shoot(cfg, model, cost, bc)
    report = {"command": "solve", **out, **_traj_summary(rep.trajectory)}
    return report, rep.trajectory, EXIT_OK if rep.converged else EXIT_SOLVER


def _direct(cfg, model, cost, bc):
    d = cfg.direct
    N = d.steps_N or cfg.steps_N
    p = DirectProblem(model, cost, bc, cfg.horizon_T, N, penalty_weight=d.penalty_weight,
                      scheme=d.scheme)
    best, rep = optimize_problem(p, max_evals=d.max_evals)
    out = {"converged": rep.converged, "exhausted": rep.exhausted, "evaluations": rep.evaluations,
           "iterations": rep.iterations, "cost_penalized": evaluate_cost(best),
           "terminal_residual": rep.terminal_residual, "penalty_weight": d.penalty_weight,
           "steps_N": N, "scheme": d.scheme, "message": rep.message}
    if best.free_velocity:
        out["zeta0"] = best.zeta0
    return best, rep, out


def _cmd_direct(cfg, model, cost, bc):
    best, rep, out = _direct(cfg, model, cost, bc)
    traj = trajectory_of(best)
    report = {"command": "direct", **out, **_traj_summary(traj)}
    return report, traj, EXIT_OK if rep.converged else EXIT_SOLVER


def _cmd_compare(cfg, model, cost, bc):
    srep, sout = _shoot(cfg, model, cost, bc)
    best, drep, dout = _direct(cfg, model, cost, bc)
    dtraj = trajectory_of(best)
    ti = srep.trajectory
    u_d = np.stack([np.interp(ti.t, dtraj.t, dtraj.u[:, k]) for k in range(ti.dim)], axis=-1)
    J_i, J_d = srep.cost, dout["cost_penalized"]
    diff = abs(J_i - J_d) / (1.0 + abs(J_i))
    u_norm = np.sqrt(trapezoid(np.sum(ti.u ** 2, axis=-1), ti.t))
    u_dist = np.sqrt(trapezoid(np.sum((ti.u - u_d) ** 2, axis=-1), ti.t))
    report = {"command": "compare", "indirect": sout, "direct": dout,
              "diff": {"J_indirect": J_i, "J_direct": J_d, "relative_difference": diff,
                       "tolerance": AGREEMENT_TOL, "agree": bool(diff <= AGREEMENT_TOL),
                       "control_l2_distance": u_dist,
                       "control_l2_relative": u_dist / u_norm if u_norm > 0 else u_dist}}
    ok = srep.converged and drep.converged
    return report, ti, EXIT_OK if ok else EXIT_SOLVER


_HANDLERS = {"simulate": _cmd_simulate, "solve": _cmd_solve, "direct": _cmd_direct,
             "compare": _cmd_compare}


def run_command(argv):
    """Run one CLI invocation and return its exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    report_path = getattr(args, "report", None)
    try:
        if args.command == "check":
            report, traj, code = _cmd_check(args)
            traj_path = None
        else:
            cfg = load_config(args.config)
            model, cost, bc = cfg.build_model(), cfg.build_cost(), cfg.build_boundary()
            report_path = report_path or cfg.output.report_path
            traj_path = args.trajectory or cfg.output.trajectory_path
            try:
                report, traj, code = _HANDLERS[args.command](cfg, model, cost, bc)
            except (ShootingError, IntegrationError, InversionError, DegenerateMetricError) as exc:
                report, traj, code = {"command": args.command, "converged": False,
                                      "error": str(exc)}, None, EXIT_SOLVER
            report = {"scenario": _scenario(cfg), **report}
    except (ConfigError, ModelError) as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_CONFIG
    report["exit_code"] = code
    try:
        if traj is not None and traj_path:
            write_trajectory(traj, traj_path)
        _emit(report, report_path)
    except OSError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_CONFIG
    if code == EXIT_SOLVER:
        sys.stderr.write("solver did not converge; best iterate reported\n")
    return code


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
