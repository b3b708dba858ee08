"""Time-series calculus on uniform output grids."""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid as _cumtrapz

from .errors import DomainError

__all__ = ["differentiate_series", "cumulative_trapezoid", "STENCIL_HALF_WIDTH"]

STENCIL_HALF_WIDTH = 2


def _uniform_step(times: np.ndarray) -> float:
    steps = np.diff(times)
    h = float(np.mean(steps))
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)) + 1e-12 * np.max(np.abs(times)):
        raise DomainError("times must be uniform and increasing")
    return h


def differentiate_series(values, times, order: int = 1) -> np.ndarray:
    """Centered fourth-order finite difference.

    Entries within two samples of either end cannot carry the five-point
    stencil and are returned as NaN.
    """
    y = np.asarray(values, dtype=float)
    t = np.asarray(times, dtype=float)
    if y.shape != t.shape or y.ndim != 1:
        raise DomainError("values and times must be matching 1-D arrays")
    if y.size < 7:
        raise DomainError("need at least 7 samples")
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    h = _uniform_step(t)
    out = np.full_like(y, np.nan)
    ym2, ym1, y0, yp1, yp2 = y[:-4], y[1:-3], y[2:-2], y[3:-1], y[4:]
    if order == 1:
        out[2:-2] = (ym2 - 8.0 * ym1 + 8.0 * yp1 - yp2) / (12.0 * h)
    else:
        out[2:-2] = (-ym2 + 16.0 * ym1 - 30.0 * y0 + 16.0 * yp1 - yp2) / (12.0 * h * h)
    return out


def cumulative_trapezoid(values, times) -> np.ndarray:
    """Running trapezoid integral starting from zero at the first sample."""
    return _cumtrapz(np.asarray(values, dtype=float), np.asarray(times, dtype=float), initial=0.0)
