"""Natural cubic spline with an O(N) tridiagonal build.

The solver rebuilds splines every time step, so the construction goes straight
to LAPACK ``gtsv`` and accepts several value columns at once (amplitude and
action share one knot set and therefore one matrix).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidInputError


def natural_second_derivatives(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot second derivatives of the natural spline through ``(x, y)``.

    ``y`` may be 1-D or 2-D with one column per interpolated function. The end
    values are zero by construction.
    """
    n = x.shape[0]
    h = np.diff(x)
    slope = np.diff(y, axis=0) / (h if y.ndim == 1 else h[:, None])
    m = np.zeros_like(y, dtype=float)
    if n == 3:
        # single interior unknown
        m[1] = 6.0 * (slope[1] - slope[0]) / (2.0 * (h[0] + h[1]))
        return m
    rhs = 6.0 * (slope[1:] - slope[:-1])
    diag = 2.0 * (h[:-1] + h[1:])
    off = h[1:-1].copy()
    _, _, _, sol, info = lapack.dgtsv(off, diag, off.copy(), rhs)
    if info != 0:
        raise InvalidInputError(f"spline system is singular (gtsv info={info})")
    m[1:-1] = sol
    return m


class NaturalSpline:
    """Piecewise cubic interpolant with zero second derivative at both ends.

    Outside ``[x[0], x[-1]]`` the terminal cubic segment is continued, which the
    discontinuous scheme relies on for its short-range extrapolation.

    Parameters
    ----------
    x : array_like, shape (N,)
        Strictly increasing knots, N >= 3.
    y : array_like, shape (N,) or (N, m)
        Knot values, one column per function.
    """

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape[0] < 3:
            raise InvalidInputError("spline needs at least 3 knots")
        if y.shape[0] != x.shape[0] or y.ndim > 2:
            raise InvalidInputError("knot values must match knot positions")
        if not np.all(np.diff(x) > 0.0):
            raise InvalidInputError("spline knots must be strictly increasing")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("spline knots and values must be finite")
        self.x = x
        self.y = y
        self.m = natural_second_derivatives(x, y)

    def _locate(self, xq):
        i = np.searchsorted(self.x, xq, side="right") - 1
        return np.clip(i, 0, self.x.shape[0] - 2)

    def __call__(self, xq, nu: int = 0):
        """Evaluate the spline (``nu`` = 0) or its first/second derivative."""
        xq = np.asarray(xq, dtype=float)
        i = self._locate(xq)
        x0 = self.x[i]
        h = self.x[i + 1] - x0
        b = (xq - x0) / h
        a = 1.0 - b
        if self.y.ndim == 2:
            a, b, h = a[..., None], b[..., None], h[..., None]
        y0, y1 = self.y[i], self.y[i + 1]
        m0, m1 = self.m[i], self.m[i + 1]
        if nu == 0:
            return a * y0 + b * y1 + ((a**3 - a) * m0 + (b**3 - b) * m1) * h * h / 6.0
        if nu == 1:
            return (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0
        if nu == 2:
            return a * m0 + b * m1
        raise ValueError("nu must be 0, 1 or 2")


def build_spline(x, y) -> NaturalSpline:
    return NaturalSpline(x, y)
