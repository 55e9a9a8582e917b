"""Piecewise-cubic profiles on [0, l] and exact Gauss-Legendre quadrature.

Each interval ``[x_k, x_{k+1}]`` carries four coefficients in the local
variable ``t = x - x_k``, ascending: ``c0 + c1 t + c2 t**2 + c3 t**3``.
That is also the JSON record layout ``{x_start, x_end, coeffs}``.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_FACT = np.array([1.0, 1.0, 2.0, 6.0])


class ProfileError(ValueError):
    pass


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


class Profile:
    """Immutable piecewise polynomial of degree <= 3."""

    __slots__ = ("_breaks", "_coeffs")

    def __init__(self, breakpoints: Sequence[float], coefficients) -> None:
        breaks = np.array(breakpoints, dtype=float)
        coeffs = np.zeros((len(breaks) - 1, 4))
        given = np.atleast_2d(np.asarray(coefficients, dtype=float))
        if breaks.ndim != 1 or len(breaks) < 2:
            raise ProfileError("need at least two breakpoints")
        if given.shape[0] != len(breaks) - 1 or given.shape[1] > 4:
            raise ProfileError(
                f"expected {len(breaks) - 1} rows of <= 4 coefficients, got {given.shape}"
            )
        if breaks[0] != 0.0:
            raise ProfileError(f"first breakpoint must be 0, got {breaks[0]}")
        if np.any(np.diff(breaks) <= 0.0):
            raise ProfileError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(given)):
            raise ProfileError("coefficients must be finite")
        coeffs[:, : given.shape[1]] = given
        breaks.setflags(write=False)
        coeffs.setflags(write=False)
        self._breaks = breaks
        self._coeffs = coeffs
        if not self.is_smooth(0):
            raise ProfileError("profile is discontinuous at a breakpoint")

    # construction helpers

    @classmethod
    def constant(cls, value: float, length: float) -> "Profile":
        return cls([0.0, length], [[value]])

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], length: float) -> "Profile":
        """Single cubic ``sum coeffs[j] * x**j`` on [0, length]."""
        return cls([0.0, length], [list(coeffs)])

    @classmethod
    def zero(cls, length: float) -> "Profile":
        return cls.constant(0.0, length)

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "Profile":
        records = list(records)
        if not records:
            raise ProfileError("empty profile record list")
        breaks = [float(records[0]["x_start"])]
        coeffs = []
        for rec in records:
            if not math.isclose(float(rec["x_start"]), breaks[-1], rel_tol=0, abs_tol=1e-12):
                raise ProfileError(f"gap in profile records at x={rec['x_start']}")
            breaks.append(float(rec["x_end"]))
            coeffs.append([float(c) for c in rec["coeffs"]])
        return cls(breaks, coeffs)

    @classmethod
    def load(cls, path: str | Path) -> "Profile":
        return cls.from_records(json.loads(Path(path).read_text()))

    def to_records(self) -> list[dict]:
        return [
            {"x_start": float(a), "x_end": float(b), "coeffs": [float(c) for c in row]}
            for a, b, row in zip(self._breaks[:-1], self._breaks[1:], self._coeffs)
        ]

    # basic properties

    @property
    def breakpoints(self) -> np.ndarray:
        return self._breaks

    @property
    def coefficients(self) -> np.ndarray:
        return self._coeffs

    @property
    def length(self) -> float:
        return float(self._breaks[-1])

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.any(self._coeffs != 0.0, axis=0))[0]
        return int(nz[-1]) if nz.size else 0

    def __repr__(self) -> str:
        return f"Profile(intervals={len(self._coeffs)}, length={self.length:g}, degree={self.degree})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Profile):
            return NotImplemented
        return np.array_equal(self._breaks, other._breaks) and np.array_equal(
            self._coeffs, other._coeffs
        )

    def __hash__(self) -> int:
        return hash((self._breaks.tobytes(), self._coeffs.tobytes()))

    # evaluation

    def _locate(self, x: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self._breaks, x, side="right") - 1
        return np.clip(k, 0, len(self._coeffs) - 1)

    def derivative_coefficients(self, order: int) -> np.ndarray:
        c = self._coeffs
        for _ in range(order):
            c = np.column_stack([c[:, 1:] * np.arange(1, c.shape[1]), np.zeros(len(c))])
        return c

    def __call__(self, x, order: int = 0):
        """Value (or ``order``-th derivative) at ``x``; intervals are closed on the left."""
        xa = np.asarray(x, dtype=float)
        k = self._locate(xa)
        t = xa - self._breaks[k]
        c = self.derivative_coefficients(order)[k]
        out = ((c[..., 3] * t + c[..., 2]) * t + c[..., 1]) * t + c[..., 0]
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, x, order: int = 1):
        return self(x, order)

    def one_sided(self, k: int, t: float, order: int = 0) -> float:
        """Evaluate interval ``k``'s polynomial at local offset ``t``."""
        c = self.derivative_coefficients(order)[k]
        return float(((c[3] * t + c[2]) * t + c[1]) * t + c[0])

    def is_smooth(self, order: int, tol: float = 1e-9) -> bool:
        """True if derivatives 0..order match across every interior breakpoint."""
        scale = max(1.0, float(np.max(np.abs(self._coeffs))))
        for k in range(len(self._coeffs) - 1):
            h = self._breaks[k + 1] - self._breaks[k]
            for d in range(order + 1):
                left = self.one_sided(k, h, d)
                right = self.one_sided(k + 1, 0.0, d)
                if abs(left - right) > tol * scale * max(1.0, h ** -d):
                    return False
        return True

    # algebra

    def refine(self, breakpoints: Sequence[float]) -> "Profile":
        """Re-express on a finer breakpoint set (must contain the current one)."""
        new = np.union1d(self._breaks, np.asarray(breakpoints, dtype=float))
        if new[0] != 0.0 or not np.isclose(new[-1], self.length, rtol=0, atol=1e-14):
            raise ProfileError("refinement changes the domain")
        new[-1] = self.length
        rows = []
        for s in new[:-1]:
            k = int(self._locate(np.array(s)))
            delta = s - self._breaks[k]
            rows.append([self.one_sided(k, delta, j) / _FACT[j] for j in range(4)])
        return Profile(new, rows)

    def _aligned(self, other: "Profile") -> tuple["Profile", "Profile"]:
        check_same_domain(self, other)
        if np.array_equal(self._breaks, other._breaks):
            return self, other
        common = np.union1d(self._breaks, other._breaks[:-1])
        return self.refine(common), other.refine(common)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            c = self._coeffs.copy()
            c[:, 0] += other
            return Profile(self._breaks, c)
        a, b = self._aligned(other)
        return Profile(a._breaks, a._coeffs + b._coeffs)

    __radd__ = __add__

    def __mul__(self, scalar: float) -> "Profile":
        if not isinstance(scalar, (int, float)):
            raise TypeError("profiles only scale by scalars; use integrate_product for products")
        return Profile(self._breaks, self._coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Profile":
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)


def check_same_domain(*profiles: Profile) -> None:
    lengths = {p.length for p in profiles}
    if len(lengths) > 1:
        raise ProfileError(f"profiles live on different domains: {sorted(lengths)}")


def gauss_order(*degrees: int) -> int:
    return math.ceil((sum(degrees) + 1) / 2) + 1


def integrate_product(*profiles: Profile, moment: int = 0) -> float:
    """Exact integral of ``prod(profiles) * x**moment`` over [0, l]."""
    if not profiles:
        raise ProfileError("nothing to integrate")
    check_same_domain(*profiles)
    breaks = profiles[0].breakpoints.copy()
    for p in profiles[1:]:
        breaks = np.union1d(breaks, p.breakpoints)
    breaks[-1] = profiles[0].length
    xi, w = gauss_order_nodes(gauss_order(*(p.degree for p in profiles), moment))
    a, b = breaks[:-1], breaks[1:]
    h = b - a
    x = a[:, None] + h[:, None] * xi[None, :]
    vals = np.ones_like(x)
    for p in profiles:
        vals = vals * p(x)
    if moment:
        vals = vals * x**moment
    return float(np.sum(h * (vals @ w)))


def gauss_order_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    return gauss_legendre(max(order, 1))


def integrate_profile(f: Profile, weight: Profile | None = None, moment: int = 0) -> float:
    """``int_0^l f(x) weight(x) x**moment dx``, exact for the piecewise-cubic class."""
    if moment not in (0, 1, 2):
        raise ProfileError(f"moment must be 0, 1 or 2, got {moment}")
    if weight is None:
        return integrate_product(f, moment=moment)
    return integrate_product(f, weight, moment=moment)


def profile_extrema(f: Profile, samples: int = 64, tol: float = 1e-10) -> tuple[float, float]:
    """(min, max) over [0, l] from breakpoint-anchored grids, doubled until stable."""
    prev = None
    while True:
        parts = [
            np.linspace(a, b, samples + 1) for a, b in zip(f.breakpoints[:-1], f.breakpoints[1:])
        ]
        vals = f(np.concatenate(parts))
        cur = (float(np.min(vals)), float(np.max(vals)))
        if prev is not None:
            scale = max(1.0, abs(cur[0]), abs(cur[1]))
            if abs(cur[0] - prev[0]) <= tol * scale and abs(cur[1] - prev[1]) <= tol * scale:
                return cur
        if samples > 2**16:
            return cur
        prev = cur
        samples *= 2
