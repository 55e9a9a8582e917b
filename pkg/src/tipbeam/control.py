"""Stabilizing boundary feedback, gain certificates and the torque maps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .beam import ChannelSpec, ChannelTag, ModelError, TorqueMapParams
from .fem import DiscreteOperators, Mesh, boundary_rows, assemble_structure
from .profiles import integrate_product, profile_extrema
from .state import DiscreteState, as_vector

FLOOR_ALPHA = 1.0
FLOOR_BETA = 1.0


class FeedbackMode(str, Enum):
    DISCRETE = "consistent"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Gains:
    alpha: float
    beta: float
    k: float
    kappa: float

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ModelError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0.0:
            raise ModelError(f"beta must be positive, got {self.beta}")
        # k = 0 is allowed: the conservative limit used in spectral diagnostics
        if not self.k >= 0.0:
            raise ModelError(f"k must be non-negative, got {self.k}")
        if self.kappa == 0.0 or not math.isfinite(self.kappa):
            raise ModelError("kappa must be finite and nonzero")


@dataclass(frozen=True)
class StabilityCertificate:
    M1: float
    M2: float
    kappa_lower_sq: float
    alpha_lower: float
    beta_lower: float
    feasible: bool
    gains: Gains

    def to_json(self) -> dict:
        return {
            "M1": self.M1,
            "M2": self.M2,
            "kappa_lower_sq": self.kappa_lower_sq,
            "alpha_lower": self.alpha_lower,
            "beta_lower": self.beta_lower,
            "feasible": self.feasible,
            "gains": asdict(self.gains),
        }


@dataclass(frozen=True)
class _BeamConstants:
    rho_min: float
    rho_max: float
    c_min: float
    c_max: float
    rho_sq: float  # int rho^2
    psi_inertia: float  # int rho psi^2 + m psi(l)^2 + J psi'(l)^2


def _constants(ch: ChannelSpec) -> _BeamConstants:
    rmin, rmax = profile_extrema(ch.rho)
    cmin, cmax = profile_extrema(ch.c)
    return _BeamConstants(rmin, rmax, cmin, cmax, integrate_product(ch.rho, ch.rho), ch.psi_inertia())


def certificate(ch: ChannelSpec, g: Gains) -> StabilityCertificate:
    """Closed-form norm-equivalence constants M1, M2 and the gain constraints."""
    k = _constants(ch)
    l, m, J, gam = ch.length, ch.m, ch.J, ch.gamma
    tip_coupling = m**2 + 0.5 * l * k.rho_sq
    kappa_sq = g.kappa**2
    kappa_lower_sq = l**3 / k.c_min * tip_coupling
    alpha_lower = kappa_sq * gam**2
    beta_lower = k.psi_inertia
    p, dp = ch.psi_tip()
    psi_sq = integrate_product(ch.rho, ch.psi, ch.psi)
    M2 = max(
        g.alpha + gam**2,
        2 * m,
        2 * J,
        2 * k.rho_max,
        g.beta + 2 * psi_sq + 2 * J * dp**2 + 2 * m * p**2,
        l**3 * tip_coupling + k.c_max,
    )
    M1 = min(
        g.alpha - alpha_lower,
        m / 2,
        J / 2,
        k.rho_min / 2,
        g.beta - beta_lower,
        k.c_min - l**3 / kappa_sq * tip_coupling,
    )
    feasible = kappa_sq > kappa_lower_sq and g.alpha > alpha_lower and g.beta > beta_lower
    return StabilityCertificate(M1, M2, kappa_lower_sq, alpha_lower, beta_lower, feasible, g)


def suggest_gains(ch: ChannelSpec, margin: float = 2.0, k: float = 1.0,
                  floor_alpha: float = FLOOR_ALPHA) -> Gains:
    if not margin > 1.0:
        raise ModelError(f"margin must exceed 1, got {margin}")
    c = _constants(ch)
    kappa_lower_sq = ch.length**3 / c.c_min * (ch.m**2 + 0.5 * ch.length * c.rho_sq)
    kappa_sq = margin * kappa_lower_sq
    alpha = max(margin * kappa_sq * ch.gamma**2, floor_alpha)
    beta = margin * c.psi_inertia if c.psi_inertia > 0.0 else FLOOR_BETA
    return Gains(alpha=alpha, beta=beta, k=k, kappa=math.sqrt(kappa_sq))


def feedback_row(ops: DiscreteOperators, g: Gains, mode: FeedbackMode | str = FeedbackMode.DISCRETE) -> np.ndarray:
    """Row vector F with u = F @ x over the simulation state (a, b, phi, omega).

    DISCRETE pairs the interpolated control shape (clamped dofs dropped) with
    the stiffness matrix, so the midpoint-discrete energy identity is exact.
    CONTINUOUS transcribes the continuous law: interior integral with the true
    psi plus clamp-end boundary terms recovered from the first element.
    """
    mode = FeedbackMode(mode)
    ch = ops.channel
    n = ops.n
    fr = ops.layout.free
    row = np.zeros(2 * n + 2)
    if mode is FeedbackMode.DISCRETE:
        eta_part = ops.K_psi - ch.gamma * ops.L_rho
        phi_coef = g.alpha - ch.gamma * (ops.L_rho @ ops.psi_free)
    else:
        psi0, dpsi0 = ch.psi(0.0), ch.psi(0.0, 1)
        c0 = ch.c(0.0)
        bdry = c0 * dpsi0 * ops.boundary[0] - psi0 * ops.boundary[1]
        eta_part = ops.c_psi_dd[fr] + bdry[fr] - ch.gamma * ops.L_rho
        phi_coef = g.alpha - ch.gamma * ops.psi_moment
    row[:n] = -eta_part / g.beta
    row[2 * n] = -phi_coef / g.beta
    row[2 * n + 1] = -g.k / g.beta
    return row


def feedback(x, ops: DiscreteOperators, g: Gains, mode: FeedbackMode | str = FeedbackMode.DISCRETE) -> float:
    x = as_vector(x)
    if x.shape[0] != 2 * ops.n + 2:
        raise ModelError(f"state has length {x.shape[0]}, operators expect {2 * ops.n + 2}")
    return feedback_row(ops, g, mode) @ x


def feedback_turning(x, ops: DiscreteOperators, g: Gains, mode=FeedbackMode.DISCRETE) -> float:
    if ops.channel.tag is not ChannelTag.TURNING:
        raise ModelError("feedback_turning needs operators assembled on the turning channel")
    return feedback(x, ops, g, mode)


def feedback_raising(x, ops: DiscreteOperators, g: Gains, mode=FeedbackMode.DISCRETE) -> float:
    if ops.channel.tag is not ChannelTag.RAISING:
        raise ModelError("feedback_raising needs operators assembled on the raising channel")
    return feedback(x, ops, g, mode)


class TorqueMap:
    """Linear maps between angular accelerations (u_T, u_R) and torques (M_T, M_R - M_R^0).

    Both channels share ``mesh``; states are DiscreteState or flat vectors.
    """

    def __init__(self, p: TorqueMapParams, mesh: Mesh):
        if abs(mesh.length - p.l) > 1e-12 * p.l:
            raise ModelError("mesh does not span [0, l]")
        self.params = p
        self.mesh = mesh
        lay = mesh.layout
        fr = lay.free
        self.n = lay.n_free
        self.D_T, self.D_R = p.denominators
        cs, sn = math.cos(p.phiR0), math.sin(p.phiR0)
        bz = boundary_rows(mesh, p.cz)
        by = boundary_rows(mesh, p.cy)
        # (R (cz y'')' + cz y'' cos phiR0) at x = 0
        self.turn_row = (p.R * bz[1] + p.cz(0.0) * cs * bz[0])[fr]
        st = assemble_structure(mesh, p.rho, p.cy)
        L_rho = st.L_rho_full[fr].copy()
        L_rho[lay.tip_value] += p.m
        # c_y z'' at 0 plus the gravity integral, as one row on the eta dofs
        self.raise_row = (p.cy(0.0) * by[0])[fr] + p.g * sn * L_rho
        self.raise_const = p.g * p.m0 * p.d * sn
        self.raise_phi = p.g * (integrate_product(p.z0, p.rho) + p.m * p.z0(p.l)) * cs

    def _split(self, x) -> tuple[np.ndarray, float]:
        v = as_vector(x)
        if v.shape[0] != 2 * self.n + 2:
            raise ModelError(f"state has length {v.shape[0]}, expected {2 * self.n + 2}")
        return v[: self.n], v[2 * self.n]

    def turning_torque(self, uT: float, xT) -> float:
        a, _ = self._split(xT)
        return self.D_T * uT + self.turn_row @ a

    def raising_torque(self, uR: float, xR) -> float:
        a, phi = self._split(xR)
        return self.D_R * uR - (self.raise_row @ a + self.raise_const + self.raise_phi * phi)

    def turning_accel(self, MT: float, xT) -> float:
        a, _ = self._split(xT)
        return (MT - self.turn_row @ a) / self.D_T

    def raising_accel(self, MR: float, xR) -> float:
        a, phi = self._split(xR)
        return (MR + self.raise_row @ a + self.raise_const + self.raise_phi * phi) / self.D_R


def torque_from_accel(uT: float, uR: float, xT, xR, tmap: TorqueMap) -> tuple[float, float]:
    return tmap.turning_torque(uT, xT), tmap.raising_torque(uR, xR)


def accel_from_torque(MT: float, MR: float, xT, xR, tmap: TorqueMap) -> tuple[float, float]:
    return tmap.turning_accel(MT, xT), tmap.raising_accel(MR, xR)


__all__ = [
    "DiscreteState",
    "FeedbackMode",
    "Gains",
    "StabilityCertificate",
    "TorqueMap",
    "accel_from_torque",
    "certificate",
    "feedback",
    "feedback_raising",
    "feedback_row",
    "feedback_turning",
    "suggest_gains",
    "torque_from_accel",
]
