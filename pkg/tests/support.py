"""Shared builders for the test-suite."""

from __future__ import annotations

import math

import numpy as np

from tipbeam.beam import BeamPhysical, ChannelSpec, ChannelTag, TorqueMapParams
from tipbeam.profiles import Profile

# acceptance results collected for the terminal summary: name -> (ok, detail)
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def manipulator(**overrides) -> TorqueMapParams:
    """The shipped default manipulator, with keyword overrides."""
    l = overrides.pop("l", 1.0)
    base = dict(
        l=l, rho=Profile.constant(1.0, l), cz=Profile.constant(2.0, l), cy=Profile.constant(2.0, l),
        m=0.1, I0=0.5, I1=0.1, I2=0.2, I3=0.1, J1=0.05, J2=0.01, J3=0.01, m0=1.0, d=0.1, R=0.5,
    )
    base.update(overrides)
    return TorqueMapParams(**base)


def custom_channel(psi: Profile, gamma: float = 0.0, rho: float | Profile = 1.0, c: float | Profile = 1.0,
                   m: float = 1.0, J: float = 1.0, l: float = 1.0) -> ChannelSpec:
    rho_p = rho if isinstance(rho, Profile) else Profile.constant(rho, l)
    c_p = c if isinstance(c, Profile) else Profile.constant(c, l)
    return ChannelSpec(BeamPhysical(l, rho_p, c_p, m, J), psi, gamma, ChannelTag.CUSTOM)


def field_dofs(f, df, nodes: np.ndarray) -> np.ndarray:
    """Full-layout Hermite dofs of a smooth callable with derivative ``df``."""
    out = np.empty(2 * len(nodes))
    out[0::2] = f(nodes)
    out[1::2] = df(nodes)
    return out


def observed_order(errors, hs) -> list[float]:
    return [math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1]) for i in range(len(errors) - 1)]
