"""Plain-text file formats.

Matrices and vectors are CSV with 17 significant digits.  Structured
outputs (learned Laplacians, graph exports, over-smoothing reports) are
JSON; floats are written with ``repr`` so they round-trip bit-exactly and
an infinite ``kappa`` is stored as ``null``.
"""

import csv
import json
import math

import numpy as np

from .errors import ValidationError


def _fmt(v):
    return f"{v:.17g}"


def write_matrix_csv(path, A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in A:
            w.writerow([_fmt(v) for v in row])


def read_matrix_csv(path, square=False):
    """Numeric CSV without header.  Errors name the offending line."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if rows and len(row) != len(rows[0]):
                raise ValidationError(
                    f"{path}:{lineno}: expected {len(rows[0])} fields, got {len(row)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-numeric field ({exc})") from None
    if not rows:
        raise ValidationError(f"{path}: empty matrix file")
    A = np.array(rows)
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{path}: non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise ValidationError(f"{path}: matrix is {A.shape[0]} x {A.shape[1]}, not square")
    return A


def read_vector(path):
    """A vector stored as one row or one column of a CSV file."""
    A = read_matrix_csv(path)
    if min(A.shape) != 1:
        raise ValidationError(f"{path}: expected a single row or column")
    return A.ravel()


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def laplacian_record(result, u, kappa, rho):
    """Serialisable summary of a :class:`~.glasso.GlassoResult`."""
    L = np.asarray(result.L, dtype=float)
    return {
        "n": int(L.shape[0]),
        "matrix": [float(v) for v in L.ravel()],
        "kappa": None if math.isinf(kappa) else float(kappa),
        "rho": float(rho),
        "gap_cov": float(result.decomp.gap),
        "gap_laplacian": float(1.0 / result.decomp.values[-2] - 1.0 / result.decomp.values[-1]),
        "u": [float(v) for v in np.asarray(u, dtype=float)],
        "converged": bool(result.converged),
        "sweeps": int(result.sweeps),
    }


def write_laplacian(path, result, u, kappa, rho):
    _dump(path, laplacian_record(result, u, kappa, rho))


def read_laplacian(path):
    """Load a Laplacian file; returns the record with ``L`` and ``u`` as arrays."""
    rec = _load(path)
    required = {"n", "matrix", "kappa", "rho", "gap_cov", "u", "converged", "sweeps"}
    if not isinstance(rec, dict) or not required <= set(rec):
        raise ValidationError(f"{path}: missing Laplacian fields {sorted(required - set(rec))}")
    n = rec["n"]
    if not isinstance(n, int) or n < 1 or len(rec["matrix"]) != n * n or len(rec["u"]) != n:
        raise ValidationError(f"{path}: inconsistent sizes")
    rec["L"] = np.array(rec["matrix"], dtype=float).reshape(n, n)
    rec["u"] = np.array(rec["u"], dtype=float)
    rec["kappa"] = math.inf if rec["kappa"] is None else float(rec["kappa"])
    return rec


def graph_record(g, op):
    return {
        "n": int(g.n),
        "mode": g.mode,
        "edges": [[i, j, w] for i, j, w in g.edges()],
        "self_loops": [float(v) for v in g.self_loops],
        "components": int(g.components),
        "p_eigenvalues": [float(v) for v in op.eigenvalues],
        "lambda_bound": op.lambda_bound,
    }


def write_graph(path, g, op):
    _dump(path, graph_record(g, op))


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for e, loss in enumerate(trace):
            w.writerow([e, _fmt(loss)])


def write_report(path, report):
    _dump(path, report.to_dict())


def write_json(path, obj):
    _dump(path, obj)
