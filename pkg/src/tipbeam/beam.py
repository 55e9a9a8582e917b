"""Physical parameters and the turning/raising channel specializations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .profiles import Profile, ProfileError, check_same_domain, integrate_product, profile_extrema


class ModelError(ValueError):
    """A physical or structural invariant is violated."""


class ChannelTag(str, Enum):
    TURNING = "turning"
    RAISING = "raising"
    CUSTOM = "custom"


def _require_positive(name: str, prof: Profile) -> None:
    lo, _ = profile_extrema(prof)
    if not lo > 0.0:
        raise ModelError(f"{name}(x) must be positive on [0, l]; min is {lo:g}")


@dataclass(frozen=True)
class BeamPhysical:
    length: float
    rho: Profile
    c: Profile
    m: float
    J: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise ModelError(f"length must be positive, got {self.length}")
        try:
            check_same_domain(self.rho, self.c)
        except ProfileError as exc:
            raise ModelError(str(exc)) from exc
        if abs(self.rho.length - self.length) > 1e-12 * self.length:
            raise ModelError("profiles must be defined on [0, length]")
        _require_positive("rho", self.rho)
        _require_positive("c", self.c)
        if not self.m > 0.0:
            raise ModelError(f"tip mass m must be positive, got {self.m}")
        if not self.J > 0.0:
            raise ModelError(f"tip inertia J must be positive, got {self.J}")


@dataclass(frozen=True)
class ChannelSpec:
    """One instance of the abstract pair (A, B): shape psi and gravity coupling gamma."""

    physical: BeamPhysical
    psi: Profile
    gamma: float = 0.0
    tag: ChannelTag = ChannelTag.CUSTOM

    def __post_init__(self):
        if abs(self.psi.length - self.physical.length) > 1e-12 * self.physical.length:
            raise ModelError("psi must be defined on [0, l]")
        if not self.psi.is_smooth(2):
            raise ModelError("psi must be C2 on [0, l]")
        if not math.isfinite(self.gamma):
            raise ModelError("gamma must be finite")

    # shorthands used throughout the numerics
    @property
    def length(self) -> float:
        return self.physical.length

    @property
    def rho(self) -> Profile:
        return self.physical.rho

    @property
    def c(self) -> Profile:
        return self.physical.c

    @property
    def m(self) -> float:
        return self.physical.m

    @property
    def J(self) -> float:
        return self.physical.J

    def psi_tip(self) -> tuple[float, float]:
        L = self.length
        return self.psi(L), self.psi(L, 1)

    def psi_moment(self) -> float:
        """int rho psi + m psi(l)."""
        return integrate_product(self.rho, self.psi) + self.m * self.psi(self.length)

    def psi_inertia(self) -> float:
        """int rho psi^2 + m psi(l)^2 + J psi'(l)^2."""
        p, dp = self.psi_tip()
        return integrate_product(self.rho, self.psi, self.psi) + self.m * p**2 + self.J * dp**2


@dataclass(frozen=True)
class TorqueMapParams:
    """Every physical parameter of the one-link manipulator (SI units)."""

    l: float
    rho: Profile
    cz: Profile
    cy: Profile
    m: float
    I0: float
    I1: float
    I2: float
    I3: float
    J1: float
    J2: float
    J3: float
    m0: float
    d: float
    R: float
    g: float = 9.81
    phiR0: float = 0.0
    z0: Profile | None = None
    MR0: float = 0.0
    _denoms: tuple[float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.z0 is None:
            object.__setattr__(self, "z0", Profile.zero(self.l))
        if not self.l > 0.0:
            raise ModelError(f"length must be positive, got {self.l}")
        try:
            check_same_domain(self.rho, self.cz, self.cy, self.z0)
        except ProfileError as exc:
            raise ModelError(str(exc)) from exc
        if abs(self.rho.length - self.l) > 1e-12 * self.l:
            raise ModelError("profiles must be defined on [0, l]")
        dT, dR = self.turning_inertia(), self.raising_inertia()
        if not dT > 0.0:
            raise ModelError(f"turning inertia denominator must be positive, got {dT:g}")
        if not dR > 0.0:
            raise ModelError(f"raising inertia denominator I2 + m0 d^2 must be positive, got {dR:g}")
        object.__setattr__(self, "_denoms", (dT, dR))

    def turning_inertia(self) -> float:
        """Braced coefficient multiplying u_T in the turning torque balance."""
        cs, sn = math.cos(self.phiR0), math.sin(self.phiR0)
        z0 = self.z0
        weighted = integrate_product(z0, self.rho, moment=1) * cs - self.R * integrate_product(
            z0, self.rho
        )
        return (
            self.I0
            + (self.I1 + self.J1) * sn**2
            + self.m0 * (self.R - self.d * cs) ** 2
            + (self.I3 * cs + self.J3 * z0(self.l, 1) * sn) * cs
            + (self.m * (self.l * cs - self.R) * z0(self.l) + weighted) * sn
        )

    def raising_inertia(self) -> float:
        return self.I2 + self.m0 * self.d**2

    @property
    def denominators(self) -> tuple[float, float]:
        return self._denoms


def make_t_channel(p: TorqueMapParams) -> ChannelSpec:
    """psi_T = x cos(phiR0) - z0 sin(phiR0) - R, gamma = 0, c = cz, J = J3."""
    if not p.z0.is_smooth(2):
        raise ModelError("z0 must be C2 on [0, l]")
    _require_positive("cz", p.cz)
    cs, sn = math.cos(p.phiR0), math.sin(p.phiR0)
    line = Profile.polynomial([-p.R, cs], p.l)
    psi = line - p.z0 * sn
    phys = BeamPhysical(p.l, p.rho, p.cz, p.m, p.J3)
    return ChannelSpec(phys, psi, 0.0, ChannelTag.TURNING)


def make_r_channel(p: TorqueMapParams) -> ChannelSpec:
    """psi = -x, gamma = g sin(phiR0), c = cy, J = J2."""
    _require_positive("cy", p.cy)
    phys = BeamPhysical(p.l, p.rho, p.cy, p.m, p.J2)
    psi = Profile.polynomial([0.0, -1.0], p.l)
    return ChannelSpec(phys, psi, p.g * math.sin(p.phiR0), ChannelTag.RAISING)
