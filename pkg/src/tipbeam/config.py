"""Run configuration: TOML (or JSON) with sections beam, channel, mesh, gains, sim, output."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .beam import ChannelSpec, ModelError, TorqueMapParams, make_r_channel, make_t_channel
from .control import FeedbackMode, Gains, suggest_gains
from .fem import LoadMode, Mesh
from .profiles import Profile, ProfileError


class ConfigError(ValueError):
    """Malformed or invalid configuration (CLI exit code 2)."""


# A profile entry is a number, a list of up to four global monomial
# coefficients, or a path to a JSON record file.
ProfileValue = float | list | str


@dataclass
class BeamSection:
    l: float = 1.0
    rho: ProfileValue = 1.0
    cz: ProfileValue = 2.0
    cy: ProfileValue = 2.0
    z0: ProfileValue = 0.0
    m: float = 0.1
    I0: float = 0.5
    I1: float = 0.1
    I2: float = 0.2
    I3: float = 0.1
    J1: float = 0.05
    J2: float = 0.01
    J3: float = 0.01
    m0: float = 1.0
    d: float = 0.1
    R: float = 0.5
    g: float = 9.81
    phiR0: float = 0.0
    MR0: float = 0.0


@dataclass
class ChannelSection:
    kind: str = "turning"  # turning | raising


@dataclass
class MeshSection:
    n: int = 16
    nodes: list[float] | None = None  # explicit node list overrides n


@dataclass
class GainsSection:
    mode: str = "suggest"  # suggest | explicit
    margin: float = 2.0
    k: float = 1.0
    floor_alpha: float = 1.0
    alpha: float | None = None
    beta: float | None = None
    kappa: float | None = None


@dataclass
class SimSection:
    dt: float = 0.01
    T: float = 200.0
    feedback: str = "consistent"  # consistent | continuous
    load: str = "consistent"  # consistent | exact
    initial: str = "smooth"  # smooth | random
    amplitude: float = 1.0  # X-norm of the initial state
    seed: int = 42


@dataclass
class OutputSection:
    dir: str = "out"


@dataclass
class RunConfig:
    beam: BeamSection = field(default_factory=BeamSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    mesh: MeshSection = field(default_factory=MeshSection)
    gains: GainsSection = field(default_factory=GainsSection)
    sim: SimSection = field(default_factory=SimSection)
    output: OutputSection = field(default_factory=OutputSection)
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    # ---- derived objects -------------------------------------------------

    def profile(self, value: ProfileValue) -> Profile:
        l = self.beam.l
        try:
            if isinstance(value, bool):
                raise ConfigError("profile value must be a number, a coefficient list or a file path")
            if isinstance(value, (int, float)):
                return Profile.constant(float(value), l)
            if isinstance(value, list):
                return Profile.polynomial([float(c) for c in value], l)
            if isinstance(value, str):
                path = Path(value)
                if not path.is_absolute():
                    path = self.base_dir / path
                prof = Profile.load(path)
                if abs(prof.length - l) > 1e-12 * l:
                    raise ConfigError(f"profile file {value} spans [0, {prof.length}], beam length is {l}")
                return prof
        except (ProfileError, OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"bad profile {value!r}: {exc}") from exc
        raise ConfigError(f"unsupported profile value {value!r}")

    def torque_params(self) -> TorqueMapParams:
        b = self.beam
        return TorqueMapParams(
            l=b.l, rho=self.profile(b.rho), cz=self.profile(b.cz), cy=self.profile(b.cy),
            m=b.m, I0=b.I0, I1=b.I1, I2=b.I2, I3=b.I3, J1=b.J1, J2=b.J2, J3=b.J3,
            m0=b.m0, d=b.d, R=b.R, g=b.g, phiR0=b.phiR0, z0=self.profile(b.z0), MR0=b.MR0,
        )

    def channel_spec(self, params: TorqueMapParams | None = None) -> ChannelSpec:
        p = params or self.torque_params()
        return make_r_channel(p) if self.channel.kind == "raising" else make_t_channel(p)

    def mesh_obj(self) -> Mesh:
        if self.mesh.nodes is not None:
            return Mesh(self.mesh.nodes)
        return Mesh.uniform(self.mesh.n, self.beam.l)

    def gains_for(self, ch: ChannelSpec) -> Gains:
        gs = self.gains
        if gs.mode == "explicit":
            return Gains(alpha=gs.alpha, beta=gs.beta, k=gs.k, kappa=gs.kappa)
        base = suggest_gains(ch, margin=gs.margin, k=gs.k, floor_alpha=gs.floor_alpha)
        # individual explicit values override the suggestion
        return Gains(
            alpha=base.alpha if gs.alpha is None else gs.alpha,
            beta=base.beta if gs.beta is None else gs.beta,
            k=base.k,
            kappa=base.kappa if gs.kappa is None else gs.kappa,
        )

    def validate(self) -> None:
        """Check every section and build the physical model once; raise ConfigError on failure."""
        if self.channel.kind not in ("turning", "raising"):
            raise ConfigError(f"channel.kind must be 'turning' or 'raising', got {self.channel.kind!r}")
        if self.gains.mode not in ("suggest", "explicit"):
            raise ConfigError(f"gains.mode must be 'suggest' or 'explicit', got {self.gains.mode!r}")
        if self.gains.mode == "explicit" and None in (self.gains.alpha, self.gains.beta, self.gains.kappa):
            raise ConfigError("explicit gains need alpha, beta and kappa")
        if not (isinstance(self.mesh.n, int) and self.mesh.n >= 1):
            raise ConfigError(f"mesh.n must be a positive integer, got {self.mesh.n!r}")
        for name in ("feedback", "load", "initial"):
            value = getattr(self.sim, name)
            allowed = {"feedback": [m.value for m in FeedbackMode], "load": [m.value for m in LoadMode],
                       "initial": ["smooth", "random"]}[name]
            if value not in allowed:
                raise ConfigError(f"sim.{name} must be one of {allowed}, got {value!r}")
        s = self.sim
        if not (math.isfinite(s.dt) and math.isfinite(s.T) and 0.0 < s.dt <= s.T):
            raise ConfigError(f"need 0 < sim.dt <= sim.T, got dt={s.dt}, T={s.T}")
        if not s.amplitude > 0.0:
            raise ConfigError("sim.amplitude must be positive")
        if not (isinstance(s.seed, int) and 0 <= s.seed < 2**64):
            raise ConfigError(f"sim.seed must be an unsigned 64-bit integer, got {s.seed!r}")
        try:
            ch = self.channel_spec()
            mesh = self.mesh_obj()
            if abs(mesh.length - self.beam.l) > 1e-12 * self.beam.l:
                raise ConfigError("mesh nodes must span [0, beam.l]")
            self.gains_for(ch)
        except (ModelError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    # ---- serialization ---------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            if f.name == "base_dir":
                continue
            section = {k: v for k, v in asdict(getattr(self, f.name)).items() if v is not None}
            out[f.name] = section
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())


_SECTIONS = {
    "beam": BeamSection,
    "channel": ChannelSection,
    "mesh": MeshSection,
    "gains": GainsSection,
    "sim": SimSection,
    "output": OutputSection,
}


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    # ints are accepted wherever floats are expected
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if default is None or isinstance(default, (list, str)) or section == "beam" and key in ("rho", "cz", "cy", "z0"):
        return value
    if type(value) is not type(default):
        raise ConfigError(f"{section}.{key} expects {type(default).__name__}, got {type(value).__name__}")
    return value


def from_dict(data: dict[str, Any], base_dir: Path | str = ".") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a table")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    parts = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"section {name} must be a table")
        defaults = cls()
        allowed = {f.name for f in fields(cls)}
        bad = set(raw) - allowed
        if bad:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
        parts[name] = cls(**{k: _coerce(name, k, v, getattr(defaults, k)) for k, v in raw.items()})
    cfg = RunConfig(**parts, base_dir=Path(base_dir))
    cfg.validate()
    return cfg


def loads(text: str, fmt: str = "toml", base_dir: Path | str = ".") -> RunConfig:
    try:
        data = json.loads(text) if fmt == "json" else tomli.loads(text)
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {fmt} configuration: {exc}") from exc
    return from_dict(data, base_dir)


def load(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return loads(text, fmt, base_dir=path.parent)


def default_config() -> RunConfig:
    cfg = RunConfig()
    cfg.validate()
    return cfg
