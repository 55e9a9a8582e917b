from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiscreteState:
    """Simulation state: eta dofs ``a``, zeta dofs ``b`` (constrained layout), phi, omega.

    The tip value/slope entries of ``b`` double as p and q.
    """

    a: np.ndarray
    b: np.ndarray
    phi: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1 or len(a) % 2:
            raise ValueError(f"inconsistent dof vectors: a{a.shape}, b{b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def n(self) -> int:
        return len(self.a)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, [self.phi, self.omega]])

    @classmethod
    def from_vector(cls, x) -> "DiscreteState":
        x = np.asarray(x, dtype=float)
        n = (len(x) - 2) // 2
        return cls(x[:n], x[n: 2 * n], x[2 * n], x[2 * n + 1])

    @classmethod
    def zeros(cls, n: int) -> "DiscreteState":
        return cls(np.zeros(n), np.zeros(n))


def as_vector(x) -> np.ndarray:
    if isinstance(x, DiscreteState):
        return x.vector()
    return np.asarray(x, dtype=float)
