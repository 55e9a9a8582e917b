"""Natural frequencies of a uniform clamped beam carrying a tip mass and rotary inertia.

With W = A(cosh bx - cos bx) + B(sinh bx - sin bx) and b^4 = rho w^2 / c, the
free-end conditions c W''(l) = J w^2 W'(l) and c W'''(l) = -m w^2 W(l) give a
2x2 homogeneous system in (A, B); its determinant vanishes at the eigenvalues.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq


def _shape_rows(b: float, l: float) -> np.ndarray:
    """Rows [W, W', W'', W'''] at x = l for the two clamped basis functions."""
    s = b * l
    ch, sh, co, si = math.cosh(s), math.sinh(s), math.cos(s), math.sin(s)
    return np.array([
        [ch - co, sh - si],
        [b * (sh + si), b * (ch - co)],
        [b**2 * (ch + co), b**2 * (sh + si)],
        [b**3 * (sh - si), b**3 * (ch + co)],
    ])


def characteristic(b: float, l: float, rho: float, c: float, m: float, J: float) -> float:
    """Scaled determinant of the free-end conditions; roots are the wavenumbers b."""
    w2 = c * b**4 / rho
    W = _shape_rows(b, l)
    moment = c * W[2] - J * w2 * W[1]
    shear = c * W[3] + m * w2 * W[0]
    scale = math.cosh(b * l) ** 2 * c**2 * b**5
    return float(moment[0] * shear[1] - moment[1] * shear[0]) / scale


def wavenumbers(l: float, rho: float, c: float, m: float, J: float, count: int = 1,
                samples_per_unit: int = 200) -> np.ndarray:
    """First ``count`` positive roots b_i (bracketed on a fine grid, then refined by brentq)."""
    if min(l, rho, c) <= 0.0 or min(m, J) < 0.0:
        raise ValueError("need l, rho, c > 0 and m, J >= 0")
    roots: list[float] = []
    lo = 1e-6 / l
    step = 1.0 / (samples_per_unit * l)
    f_lo = characteristic(lo, l, rho, c, m, J)
    while len(roots) < count:
        hi = lo + step
        f_hi = characteristic(hi, l, rho, c, m, J)
        if f_lo == 0.0:
            roots.append(lo)
        elif f_lo * f_hi < 0.0:
            roots.append(brentq(characteristic, lo, hi, args=(l, rho, c, m, J), xtol=1e-15, rtol=1e-15))
        lo, f_lo = hi, f_hi
        if lo * l > 50.0 * (count + 1):
            raise RuntimeError("root bracketing ran past the search window")
    return np.array(roots[:count])


def natural_frequencies(l: float, rho: float, c: float, m: float, J: float, count: int = 1) -> np.ndarray:
    """Angular frequencies w_i = b_i^2 sqrt(c / rho)."""
    b = wavenumbers(l, rho, c, m, J, count)
    return b**2 * math.sqrt(c / rho)
