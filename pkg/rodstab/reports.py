"""
Flat-file outputs: JSON reports and plot-ready CSV tables.

Floats are written with 17 significant digits and '.' as decimal separator so
that a file read back reproduces the numbers exactly.
"""

import csv
import json
import logging
import sys

import numpy as np

from rodstab.coefficients import RodCoefficients
from rodstab.critical_force import CriticalForceBreakdown
from rodstab.energy import RotationCurve
from rodstab.helix import HelixSpec

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["x"] + [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)]
SCAN_COLUMNS = ["t", "delta", "det_m", "sigma_min"]
TRACE_COLUMNS = ["iteration", "energy", "grad_norm", "step"]
SWEEP_COLUMNS = ["w_z", "chi", "force_frac", "f_crit", "theta", "verdict", "flags"]


def fmt(x):
    return f"{float(x):.17g}"


def _open(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def write_json(payload, path=None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    out, close = _open(path)
    try:
        out.write(text + "\n")
    finally:
        if close:
            out.close()
    if close:
        logger.debug("wrote %s", path)
    return text


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def coefficients_from_json(text):
    return RodCoefficients.from_dict(json.loads(text))


def breakdown_from_json(text):
    return CriticalForceBreakdown.from_dict(json.loads(text))


def helix_from_json(text):
    return HelixSpec.from_dict(json.loads(text))


def _write_rows(path, header, rows):
    out, close = _open(path)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    finally:
        if close:
            out.close()


def write_curve_csv(path, curve):
    rows = ([fmt(x)] + [fmt(v) for v in R.ravel()]
            for x, R in zip(curve.xs, curve.samples))
    _write_rows(path, CURVE_COLUMNS, rows)


def read_curve_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CURVE_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(CURVE_COLUMNS)}")
        data = np.array([[float(v) for v in row] for row in reader if row])
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError(f"{path}: no curve samples")
    xs = data[:, 0]
    if not np.allclose(np.diff(xs), xs[-1] / (len(xs) - 1), rtol=1e-9, atol=1e-12):
        raise ValueError(f"{path}: nodes are not uniformly spaced")
    return RotationCurve(data[:, 1:].reshape(-1, 3, 3), xs[-1])


def write_scan_csv(path, report):
    rows = ((fmt(t), fmt(d), fmt(m), fmt(s)) for t, d, m, s in
            zip(report.ts, report.delta_vals, report.det_vals, report.sigma_min))
    _write_rows(path, SCAN_COLUMNS, rows)


def write_trace_csv(path, trace):
    rows = []
    for i, (e, g) in enumerate(zip(trace.energies, trace.grad_norms)):
        step = trace.steps[i - 1] if i > 0 else 0.0
        rows.append((i, fmt(e), fmt(g), fmt(step)))
    _write_rows(path, TRACE_COLUMNS, rows)


def write_sweep_csv(path, rows):
    """rows: dicts with SWEEP_COLUMNS keys, already in grid order."""
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, str):
            return v
        return fmt(v)

    _write_rows(path, SWEEP_COLUMNS, ([cell(r.get(c)) for c in SWEEP_COLUMNS] for r in rows))
