"""Trajectory CSV and JSON report serialization (byte-deterministic)."""
from __future__ import annotations

import csv
import json
import math

import numpy as np

from .dynamics import Trajectory

__all__ = ["trajectory_header", "write_trajectory", "read_trajectory", "write_report",
           "report_text", "jsonable"]

_VECTORS = ("q", "zeta", "u", "ucov", "xi", "pi")


def trajectory_header(n):
    cols = ["t"]
    for name in _VECTORS:
        cols += [f"{name}_{k}" for k in range(1, n + 1)]
    return cols + ["energy", "running_cost"]


def _fmt(x):
    return "%.17g" % x


def write_trajectory(traj, path):
    """Write one row per grid node; adjoint columns are ``nan`` when absent."""
    n, rows = traj.dim, len(traj.t)
    missing = np.full((rows, n), np.nan)
    blocks = [traj.t[:, None], traj.q, traj.zeta, traj.u, traj.u_cov,
              missing if traj.xi is None else traj.xi,
              missing if traj.pi is None else traj.pi,
              traj.energy[:, None], traj.running_cost[:, None]]
    table = np.hstack([np.asarray(b, dtype=float) for b in blocks])
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(trajectory_header(n))
            w.writerows([_fmt(x) for x in row] for row in table)
    except OSError as exc:
        raise OSError(f"cannot write trajectory to {path}: {exc.strerror}") from exc


def read_trajectory(path):
    """Inverse of write_trajectory; all-nan adjoint columns come back as None."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read trajectory from {path}: {exc.strerror}") from exc
    header, body = rows[0], rows[1:]
    n = (len(header) - 3) // len(_VECTORS)
    if header != trajectory_header(n):
        raise ValueError(f"{path}: unexpected trajectory header")
    table = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))
    cols = {}
    i = 1
    for name in _VECTORS:
        cols[name] = table[:, i:i + n]
        i += n
    adj = {k: (None if np.all(np.isnan(cols[k])) else cols[k]) for k in ("xi", "pi")}
    return Trajectory(table[:, 0], cols["q"], cols["zeta"], cols["u"], cols["ucov"],
                      table[:, -2], table[:, -1], adj["xi"], adj["pi"])


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings 'nan', 'inf', '-inf'."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def report_text(report):
    return json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report_text(report))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
