"""CSV artifacts for decision boundaries, simplified points and perturbations.

Every file starts with a ``#`` comment line carrying the code version and,
when known, the config hash. Floats are written with shortest round-trip
repr so that re-parsed values are exact.
"""

import csv
import warnings

import numpy as np

from . import __version__
from .autodiff import ops
from .models import simplify


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def header_line(config_hash=None, **extra):
    fields = {"friendly": __version__, "config_hash": config_hash or "none", **extra}
    return "# " + " ".join(f"{k}={v}" for k, v in fields.items())


def write_csv(path, columns, rows, config_hash=None, **extra):
    with open(path, "w", newline="") as fh:
        fh.write(header_line(config_hash, **extra) + "\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    """Returns ``(header_comment, column_names, rows_as_strings)``."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = list(csv.reader(body))
    return (comments[0] if comments else ""), reader[0], reader[1:]


def lattice(grid_res, bounds):
    """``grid_res x grid_res`` points over [x1_lo, x1_hi] x [x2_lo, x2_hi]."""
    x1_lo, x1_hi, x2_lo, x2_hi = bounds
    if grid_res < 1:
        raise ValueError("grid_res must be >= 1")
    g1 = np.linspace(x1_lo, x1_hi, grid_res)
    g2 = np.linspace(x2_lo, x2_hi, grid_res)
    a, b = np.meshgrid(g1, g2, indexing="ij")
    return np.stack([a.ravel(), b.ravel()], axis=1)


def boundary_rows(main, grid_res, bounds):
    if main.spec.input_dim != 2:
        raise ValueError(f"decision-boundary export needs a 2-d input model, got d={main.spec.input_dim}")
    pts = lattice(grid_res, bounds).astype(main.params[next(iter(main.params))].dtype)
    probs = ops.softmax(main.predict(pts)).data
    return [(p[0], p[1], int(np.argmax(q)), float(np.max(q))) for p, q in zip(pts, probs)]


BOUNDARY_COLUMNS = ["x1", "x2", "predicted_class", "max_prob"]
POINT_COLUMNS = ["orig_x1", "orig_x2", "simp_x1", "simp_x2", "label"]


def write_boundary(path, main, grid_res, bounds, config_hash=None, **extra):
    write_csv(path, BOUNDARY_COLUMNS, boundary_rows(main, grid_res, bounds), config_hash, **extra)


def write_points(path, X, y, aux, config_hash=None, **extra):
    if X.shape[1] != 2:
        raise ValueError("point export needs 2-d inputs")
    x_tilde, _ = simplify(X, aux)
    rows = [(a[0], a[1], b[0], b[1], int(c)) for a, b, c in zip(X, x_tilde, y)]
    write_csv(path, POINT_COLUMNS, rows, config_hash, **extra)


def perturbation_table(X, y, aux, k, seed=0):
    """Columns and rows for ``k`` sampled examples: x, raw delta, normalised delta, x_tilde."""
    n, d = X.shape
    if k > n:
        warnings.warn(f"k={k} exceeds the {n} available examples; clamping")
        k = n
    idx = np.sort(np.random.default_rng(seed).choice(n, size=k, replace=False)) if k else np.zeros(0, int)
    cols = (["index", "label"] + [f"x_{j}" for j in range(d)] + [f"delta_{j}" for j in range(d)]
            + [f"delta_norm_{j}" for j in range(d)] + [f"xt_{j}" for j in range(d)])
    rows = []
    if k:
        x_tilde, delta = simplify(X[idx], aux)
        lo = delta.min(axis=1, keepdims=True)
        span = delta.max(axis=1, keepdims=True) - lo
        norm = np.divide(delta - lo, span, out=np.zeros_like(delta), where=span > 0)
        for r, i in enumerate(idx):
            rows.append([int(i), int(y[i]), *X[i], *delta[r], *norm[r], *x_tilde[r]])
    return cols, rows


def logistic_probe_error(X, y, steps=3000, lr=0.5):
    """Training error of a binary logistic regression fitted by full-batch gradient descent.

    Features are standardised first; used to gauge how linearly separable a
    (possibly simplified) point cloud is.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if set(np.unique(y)) - {0, 1}:
        raise ValueError("logistic probe needs binary labels")
    z = np.hstack([(X - X.mean(0)) / (X.std(0) + 1e-12), np.ones((len(X), 1))])
    w = np.zeros(z.shape[1])
    for _ in range(steps):
        p = 0.5 * (1.0 + np.tanh(0.5 * (z @ w)))
        w -= lr * z.T @ (p - y) / len(y)
    return float(np.mean((z @ w > 0) != y))
