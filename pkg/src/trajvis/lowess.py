"""Robust locally weighted regression (LOWESS).

Local linear fits with tricube neighborhood weights, robustified by
bisquare reweighting of residuals between passes. Conventions:

* the neighborhood of x_i covers the r nearest sample points (self
  included, r = ceil(span * n), never below 2) and h_i is the distance to
  the r-th nearest, which receives weight zero;
* ``robust_iters`` counts total regression passes; robustness weights are
  recomputed after every pass except the last;
* a pass that fits residuals of exactly zero (constant or linear data)
  leaves the robustness weights at one.
"""

from __future__ import annotations

import math

import numpy as np

from trajvis.errors import ValidationError


def lowess(x, y, span: float = 2.0 / 3.0, robust_iters: int = 3) -> np.ndarray:
    """Smoothed y values at the sample points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n < 3:
        raise ValidationError(f"lowess needs >= 3 points, got {n}")
    if y.shape[0] != n:
        raise ValidationError("x and y must have equal length")
    if not 0.0 < span <= 1.0:
        raise ValidationError(f"span must be in (0, 1], got {span}")
    if robust_iters < 1:
        raise ValidationError(f"robust_iters must be >= 1, got {robust_iters}")

    r = max(2, int(math.ceil(span * n)))
    dist = np.abs(x[:, None] - x[None, :])
    h = np.sort(dist, axis=1)[:, r - 1]
    h = np.maximum(h, 1e-12)
    u = np.clip(dist / h[:, None], 0.0, 1.0)
    neighborhood = (1.0 - u**3) ** 3  # tricube; zero at and beyond h

    yhat = np.empty(n)
    delta = np.ones(n)
    for iteration in range(robust_iters):
        for i in range(n):
            w = delta * neighborhood[i]
            wsum = w.sum()
            xw = np.dot(w, x) / wsum
            yw = np.dot(w, y) / wsum
            dx = x - xw
            sxx = np.dot(w, dx * dx)
            if sxx <= 0.0:
                yhat[i] = yw
                continue
            slope = np.dot(w, dx * (y - yw)) / sxx
            yhat[i] = yw + slope * (x[i] - xw)
        if iteration == robust_iters - 1:
            break
        residuals = y - yhat
        s = np.median(np.abs(residuals))
        if s == 0.0:
            continue
        scaled = np.clip(residuals / (6.0 * s), -1.0, 1.0)
        delta = (1.0 - scaled**2) ** 2
    return yhat


def smooth_trajectory(ordered_points, span: float = 2.0 / 3.0, robust_iters: int = 3) -> np.ndarray:
    """Smooth an ordered 2-D polyline coordinate-wise against rank.

    Points must already be ordered along the oriented branch; the running
    variable is the integer rank 1..k, each coordinate smoothed separately.
    """
    pts = np.asarray(ordered_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("ordered_points must be a k x 2 array")
    k = pts.shape[0]
    if k < 3:
        raise ValidationError(f"smooth_trajectory needs >= 3 points, got {k}")
    ranks = np.arange(1, k + 1, dtype=float)
    out = np.column_stack(
        [lowess(ranks, pts[:, 0], span, robust_iters), lowess(ranks, pts[:, 1], span, robust_iters)]
    )
    return out
