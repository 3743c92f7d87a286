"""Pure numpy implementation of the hot kernels.

Arithmetic order matches ``_ckernels.pyx`` operation for operation, so both
backends produce bit-identical iterates:

* squared norms are summed coordinate by coordinate, left to right;
* the projection scale is ``radius / norm`` outside the ball and ``1.0``
  inside, and the residual is ``y - y * scale``;
* edge residuals are accumulated per node in edge order (``+`` at the smaller
  endpoint, ``-`` at the larger), anchor residuals in pair order, both from
  ``0.0``;
* gradient = ``(edge_acc + anchor_acc) + (2 * lam) * (w - xt)``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalDivergence

NAME = "python"


def ball_residuals(y: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Row-wise ``y - P(y)`` for balls centred at the origin."""
    sq = y[:, 0] * y[:, 0]
    for c in range(1, y.shape[1]):
        sq = sq + y[:, c] * y[:, c]
    norm = np.sqrt(sq)
    outside = norm > radius
    scale = np.ones_like(norm)
    np.divide(radius, norm, out=scale, where=outside)
    return y - y * scale[:, None]


def gradient(w, edge_i, edge_j, d, pair_node, pair_pos, r, lam, xt):
    n, p = w.shape
    acc_e = np.zeros((n, p))
    E = edge_i.shape[0]
    if E:
        res = ball_residuals(w[edge_i] - w[edge_j], d)
        idx = np.empty(2 * E, dtype=np.intp)
        idx[0::2] = edge_i
        idx[1::2] = edge_j
        vals = np.empty((2 * E, p))
        vals[0::2] = res
        vals[1::2] = -res
        np.add.at(acc_e, idx, vals)
    acc_a = np.zeros((n, p))
    if pair_node.shape[0]:
        np.add.at(acc_a, pair_node, ball_residuals(w[pair_node] - pair_pos, r))
    g = acc_e + acc_a
    g += (2.0 * lam) * (w - xt)
    return g


def rms(g: np.ndarray) -> float:
    # cumsum is strictly sequential, matching the C loop
    flat = g.ravel()
    return math.sqrt(float(np.cumsum(flat * flat)[-1]) / flat.size)


def nesterov(x0, edge_i, edge_j, d, pair_node, pair_pos, r, lam, xt,
             step, beta, fista, max_iters, tol, record=None):
    """Accelerated gradient loop; returns ``(x, iterations, final_rms)``.

    ``fista=True`` uses the momentum schedule ``(k - 1) / (k + 2)`` instead of
    the constant ``beta``.  When ``record`` is a ``(max_iters + 1, n, p)``
    array, row ``k`` receives iterate ``x(k)``.
    """
    x_prev = np.array(x0, dtype=float, copy=True)
    x = x_prev.copy()
    if record is not None:
        record[0] = x
    gn = math.nan
    kappa = 0
    for kappa in range(1, max_iters + 1):
        b = (kappa - 1.0) / (kappa + 2.0) if fista else beta
        w = x + b * (x - x_prev)
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            g = gradient(w, edge_i, edge_j, d, pair_node, pair_pos, r, lam, xt)
            x_new = w - step * g
            gn = rms(g)
        if not math.isfinite(gn):
            raise NumericalDivergence(f"non-finite gradient at iteration {kappa}")
        x_prev, x = x, x_new
        if record is not None:
            record[kappa] = x
        if gn <= tol:
            break
    return x, kappa, gn
