################################################################################
# FILE: frc_output.py
# DESCRIPTION: Writers for forced response curves (CSV, gnuplot data), the JSON
#              run report and the iteration / timing tables.
# AUTHOR: MSCRNT LLC
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import json
import math
import logging
import logging.handlers

import numpy as np
import pandas as pd

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("frc_output")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

CSV_COLUMNS = ["omega", "amplitude", "converged", "picard_iters", "newton_iters", "solver_path"]
FLOAT_FORMAT = "%.17g"


def points_frame(points):
    """FRCPoint list -> DataFrame with the CSV columns."""
    rows = [{
        "omega": p.omega,
        "amplitude": p.amplitude,
        "converged": bool(p.converged),
        "picard_iters": int(p.picard_iters),
        "newton_iters": int(p.newton_iters),
        "solver_path": getattr(p.solver_path, "value", p.solver_path),
    } for p in points]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_frc_csv(points, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    points_frame(points).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"FRC written: {path} ({len(points)} points)")
    return path


def read_frc_csv(path):
    frame = pd.read_csv(path, dtype={"picard_iters": int, "newton_iters": int, "solver_path": str},
                        float_precision="round_trip")
    frame["converged"] = frame["converged"].astype(bool)
    return frame


def write_plot_data(curves, path):
    """gnuplot data: one block per curve (index i), blank line where a point did not converge."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as handle:
        for label, points in curves:
            handle.write(f"# {label}\n# omega amplitude\n")
            for p in points:
                if p.converged and np.isfinite(p.amplitude):
                    handle.write(f"{p.omega:.17g} {p.amplitude:.17g}\n")
                else:
                    handle.write("\n")
            handle.write("\n\n")
    logger.info(f"Plot data written: {path} ({len(curves)} curves)")
    return path


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return None if not math.isfinite(value) else float(value)
    if hasattr(value, "value"):
        return value.value
    return value


def write_report(report, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as handle:
        json.dump(_json_safe(report), handle, indent=2)
    logger.info(f"Run report written: {path}")
    return path


def curve_summary(points):
    """Totals of one sweep (the cells of the iteration / timing tables)."""
    return {
        "picard_iters": int(sum(p.picard_iters for p in points)),
        "newton_iters": int(sum(p.newton_iters for p in points)),
        "picard_time": float(sum(p.picard_time for p in points)),
        "newton_time": float(sum(p.newton_time for p in points)),
        "nonlinear_time": float(sum(p.nonlinear_time for p in points)),
        "converged_points": int(sum(1 for p in points if p.converged)),
        "picard_converged_omegas": [p.omega for p in points if p.picard_only],
    }


def report_tables(report):
    """Iteration and timing tables: one row per forcing amplitude, one column per
    formulation/basis pair, each cell 'total (picard, newton)'."""
    iterations, timings = {}, {}
    for curve in report.get("curves", []):
        row = f"F = {curve['amplitude']:g}"
        column = f"{curve['formulation']} / {curve['basis']}"
        picard, newton = curve["picard_iters"], curve["newton_iters"]
        iterations.setdefault(row, {})[column] = f"{picard + newton} ({picard}, {newton})"
        p_time, n_time = curve["picard_time"], curve["newton_time"]
        timings.setdefault(row, {})[column] = f"{p_time + n_time:.2f} ({p_time:.2f}, {n_time:.2f})"

    if not iterations:
        return "No curves computed."
    iter_frame = pd.DataFrame.from_dict(iterations, orient="index").fillna("-")
    time_frame = pd.DataFrame.from_dict(timings, orient="index").fillna("-")
    return ("Iterations: total (picard, newton)\n" + iter_frame.to_string()
            + "\n\nTime [s]: total (picard, newton)\n" + time_frame.to_string())
