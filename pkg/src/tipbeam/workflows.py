"""The four batch workflows behind the command line: certify, simulate, verify, converge."""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beam import ChannelSpec, TorqueMapParams
from .config import RunConfig
from .control import FeedbackMode, Gains, StabilityCertificate, TorqueMap, certificate, feedback_row
from .fem import (DiscreteOperators, LoadMode, Mesh, assemble, assemble_structure, frequencies,
                  interpolate, tip_mass_matrix)
from .lyapunov import (LyapunovForm, build_V, dissipation_residual, inequality_report,
                       norm_equivalence, sim_embedding)
from .modal import natural_frequencies
from .profiles import Profile, integrate_profile
from .simulator import (ClosedLoopSystem, CSV_COLUMNS, build_closed_loop, observables, simulate,
                        write_csv)

BOUND_RTOL = 1e-8
DISSIPATION_RTOL = 1e-10
SPECTRUM_TOL = 1e-10
LASALLE_RATIO = 1e-3
CONVERGE_MESHES = (4, 8, 16, 32, 64)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream: portable and reproducible across platforms for a given seed."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class Setup:
    cfg: RunConfig
    params: TorqueMapParams
    channel: ChannelSpec
    ops: DiscreteOperators
    gains: Gains
    cert: StabilityCertificate
    system: ClosedLoopSystem
    form: LyapunovForm

    @property
    def G_sim(self) -> np.ndarray:
        E = sim_embedding(self.ops.n)
        return E.T @ self.ops.G @ E

    def norm_X(self, x: np.ndarray) -> float:
        return math.sqrt(max(float(x @ self.G_sim @ x), 0.0))


def build(cfg: RunConfig, mesh: Mesh | None = None, mode: FeedbackMode | str | None = None) -> Setup:
    params = cfg.torque_params()
    ch = cfg.channel_spec(params)
    ops = assemble(mesh or cfg.mesh_obj(), ch, LoadMode(cfg.sim.load))
    g = cfg.gains_for(ch)
    mode = FeedbackMode(mode or cfg.sim.feedback)
    return Setup(cfg, params, ch, ops, g, certificate(ch, g), build_closed_loop(ops, g, mode), build_V(ops, g))


def smooth_state(ops: DiscreteOperators) -> np.ndarray:
    """A static-deflection-like bend with tip deflection 0.3 l, unit hub angle, at rest."""
    l = ops.mesh.length
    shape = Profile.polynomial([0.0, 0.0, 0.45 / l, -0.15 / l**2], l)
    x = np.zeros(2 * ops.n + 2)
    x[: ops.n] = interpolate(shape, ops.mesh)[ops.layout.free]
    x[2 * ops.n] = 1.0
    return x


def initial_state(setup: Setup, rng: np.random.Generator | None = None) -> np.ndarray:
    sim = setup.cfg.sim
    if sim.initial == "random":
        x = (rng or make_rng(sim.seed)).standard_normal(2 * setup.ops.n + 2)
    else:
        x = smooth_state(setup.ops)
    return sim.amplitude * x / setup.norm_X(x)


def random_clamped(mesh: Mesh, rng: np.random.Generator) -> np.ndarray:
    """Full-layout dof vector with standard normal free dofs and zero clamped dofs."""
    a = np.zeros(mesh.layout.n_full)
    a[2:] = rng.standard_normal(mesh.layout.n_free)
    return a


def write_atomic(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---- certify ---------------------------------------------------------------

def run_certify(cfg: RunConfig) -> dict:
    ch = cfg.channel_spec()
    g = cfg.gains_for(ch)
    out = certificate(ch, g).to_json()
    out["channel"] = cfg.channel.kind
    out["MR0_note"] = "raising torques are reported as offsets from MR0 (input, not computed)"
    return out


# ---- simulate --------------------------------------------------------------

def run_simulate(cfg: RunConfig) -> tuple[str, dict]:
    """Trajectory CSV text and the summary record."""
    s = build(cfg)
    x0 = initial_state(s)
    traj = simulate(s.system, x0, cfg.sim.dt, cfg.sim.T)
    tmap = TorqueMap(s.params, s.ops.mesh)
    table = observables(traj, s.form, s.ops.G, tmap, s.channel.tag)
    res = dissipation_residual(traj.states, s.form, s.gains, traj.dt)
    V0 = float(table["V"][0])
    norm0 = float(table["norm_X"][0])
    omega = np.abs(table["omega"])
    bound = math.sqrt(s.cert.M2 / s.cert.M1) if s.cert.feasible else float("nan")
    sup_ratio = float(table["norm_X"].max() / norm0)
    omega_ratio = float(omega[-1] / omega.max()) if omega.max() > 0 else 0.0
    summary = {
        "channel": cfg.channel.kind,
        "feedback": s.system.mode.value,
        "n": s.ops.mesh.n_elements,
        "dt": traj.dt,
        "steps": len(traj) - 1,
        "T": float(traj.times[-1]),
        "feasible": s.cert.feasible,
        "sup_norm_ratio": sup_ratio,
        "bound_sqrt_M2_over_M1": bound,
        "bound_holds": bool(s.cert.feasible and sup_ratio <= bound * (1 + BOUND_RTOL)),
        "V0": V0,
        "dissipation_max_residual": float(np.abs(res).max()) if len(res) else 0.0,
        "dissipation_max_residual_rel": float(np.abs(res).max() / V0) if len(res) and V0 > 0 else 0.0,
        "final_abs_omega": float(omega[-1]),
        "omega_decay_ratio": omega_ratio,
        "omega_decay_pass": omega_ratio < LASALLE_RATIO,
        "max_abs_u": float(np.abs(traj.u).max()),
        "max_mode_gap": float(np.abs(traj.u - traj.u_literal).max()),
    }
    return write_csv(table), summary


def simulate_ok(summary: dict) -> bool:
    ok = summary["bound_holds"]
    if summary["feedback"] == FeedbackMode.DISCRETE.value:
        ok = ok and summary["dissipation_max_residual_rel"] <= DISSIPATION_RTOL
    return bool(ok)


# ---- verify ----------------------------------------------------------------

def max_real_part(system: ClosedLoopSystem, form: LyapunovForm) -> float:
    return float(system.eigenvalues(form).real.max())


def run_verify(cfg: RunConfig, seed: int | None = None, samples: int = 200, steps: int = 1000) -> dict:
    """Dissipation identity, norm equivalence, spectrum and the Friedrichs/Cauchy-Schwarz chain."""
    seed = cfg.sim.seed if seed is None else seed
    rng = make_rng(seed)
    s = build(cfg, mode=FeedbackMode.DISCRETE)

    x0 = rng.standard_normal(2 * s.ops.n + 2)
    x0 /= s.norm_X(x0)
    traj = simulate(s.system, x0, cfg.sim.dt, steps * cfg.sim.dt)
    res = np.abs(dissipation_residual(traj.states, s.form, s.gains, traj.dt))
    V0 = float(s.form.V(x0))
    diss_ok = bool(res.max() <= DISSIPATION_RTOL * V0)

    ne = norm_equivalence(s.form, s.ops.G, s.cert)
    re_max = max_real_part(s.system, s.form)

    mesh = s.ops.mesh
    counts = {"friedrichs": 0, "cs_integral": 0, "cs_tip": 0, "composite": 0}
    worst = {}
    for _ in range(samples):
        rep = inequality_report(random_clamped(mesh, rng), mesh, s.channel.rho, s.channel.m)
        for name in rep.violations():
            counts[name] += 1
        for name, margin in rep.margins().items():
            worst[name] = min(worst.get(name, math.inf), margin)

    props = {
        "dissipation": {"pass": diss_ok, "max_residual_rel": float(res.max() / V0)},
        "norm_equivalence": {"pass": ne.passed, "lambda_min": ne.lambda_min, "lambda_max": ne.lambda_max,
                             "margin_low": ne.lambda_min - s.cert.M1, "margin_high": s.cert.M2 - ne.lambda_max},
        "spectrum": {"pass": re_max <= SPECTRUM_TOL, "max_real_part": re_max},
        "friedrichs": {"pass": counts["friedrichs"] == 0, "violations": counts["friedrichs"],
                       "worst_margin": min(worst["friedrichs_first"], worst["friedrichs_second"])},
        "cauchy_schwarz": {"pass": counts["cs_integral"] + counts["cs_tip"] == 0,
                           "violations": counts["cs_integral"] + counts["cs_tip"],
                           "worst_margin": min(worst["cs_integral"], worst["cs_tip"])},
        "composite_bound": {"pass": counts["composite"] == 0, "violations": counts["composite"],
                            "worst_margin": worst["composite"]},
        "certificate": {"pass": s.cert.feasible},
    }
    return {
        "seed": seed,
        "n": mesh.n_elements,
        "lambda_min": ne.lambda_min,
        "lambda_max": ne.lambda_max,
        "M1": s.cert.M1,
        "M2": s.cert.M2,
        "dissipation_max_residual": float(res.max()),
        "friedrichs_violations": counts["friedrichs"],
        "properties": props,
        "pass": all(p["pass"] for p in props.values()),
    }


# ---- converge --------------------------------------------------------------

def smooth_probe(ops: DiscreteOperators) -> np.ndarray:
    """Smooth non-polynomial state used for mode-gap and dissipation refinement columns."""
    l = ops.mesh.length
    x = np.zeros(2 * ops.n + 2)
    nodes = ops.mesh.nodes
    full = np.empty(2 * len(nodes))
    full[0::2] = 0.1 * (1.0 - np.cos(math.pi * nodes / l))
    full[1::2] = 0.1 * math.pi / l * np.sin(math.pi * nodes / l)
    x[: ops.n] = full[2:]
    full[0::2] = 0.2 * np.sin(math.pi * nodes / (2 * l)) ** 2
    full[1::2] = 0.2 * math.pi / (2 * l) * np.sin(math.pi * nodes / l)
    x[ops.n: 2 * ops.n] = full[2:]
    x[2 * ops.n] = 0.3
    x[2 * ops.n + 1] = -0.2
    return x


def uniform_surrogate_frequency(ch: ChannelSpec, mesh: Mesh) -> tuple[float, float]:
    """(FEM, oracle) first frequency of the beam with rho, c replaced by their means."""
    l = ch.length
    rho = integrate_profile(ch.rho) / l
    c = integrate_profile(ch.c) / l
    st = assemble_structure(mesh, Profile.constant(rho, l), Profile.constant(c, l))
    M = st.M_full + tip_mass_matrix(mesh.layout, ch.m, ch.J)
    w_h = frequencies(st.K_full[2:, 2:], M[2:, 2:], 1)[0]
    return float(w_h), float(natural_frequencies(l, rho, c, ch.m, ch.J)[0])


def _converge_row(cfg: RunConfig, n: int, steps: int) -> dict:
    mesh = Mesh.uniform(n, cfg.beam.l)
    s = build(cfg, mesh=mesh, mode=FeedbackMode.CONTINUOUS)
    w_h, w = uniform_surrogate_frequency(s.channel, mesh)
    x = smooth_probe(s.ops)
    gap = abs(float((feedback_row(s.ops, s.gains, FeedbackMode.DISCRETE) - s.system.F) @ x))
    traj = simulate(s.system, x, cfg.sim.dt, steps * cfg.sim.dt)
    res = dissipation_residual(traj.states, s.form, s.gains, traj.dt)
    return {
        "n": n,
        "h": cfg.beam.l / n,
        "freq_rel_error": abs(w_h / w - 1.0),
        "mode_gap": gap,
        "cf_dissipation": float(np.abs(res).max() / s.form.V(x)),
    }


def observed_orders(h: list[float], err: list[float], floor: float = 1e-10) -> list[float]:
    """log(e_i / e_{i+1}) / log(h_i / h_{i+1}); NaN where either error is at round-off."""
    out = [math.nan]
    for i in range(1, len(h)):
        e0, e1 = err[i - 1], err[i]
        if e0 <= floor or e1 <= floor:
            out.append(math.nan)
        else:
            out.append(math.log(e0 / e1) / math.log(h[i - 1] / h[i]))
    return out


CONVERGE_COLUMNS = ("n", "h", "freq_rel_error", "freq_order", "mode_gap", "mode_gap_order",
                    "cf_dissipation", "cf_dissipation_order")


def run_converge(cfg: RunConfig, meshes=CONVERGE_MESHES, steps: int = 200, workers: int = 4) -> list[dict]:
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda n: _converge_row(cfg, n, steps), meshes))
    h = [r["h"] for r in rows]
    for col in ("freq_rel_error", "mode_gap", "cf_dissipation"):
        name = "freq_order" if col == "freq_rel_error" else col + "_order"
        for r, o in zip(rows, observed_orders(h, [r[col] for r in rows])):
            r[name] = o
    return rows


def converge_csv(rows: list[dict]) -> str:
    lines = [",".join(CONVERGE_COLUMNS)]
    for r in rows:
        lines.append(",".join(str(r["n"]) if c == "n" else f"{r[c]:.17g}" for c in CONVERGE_COLUMNS))
    return "\n".join(lines) + "\n"


__all__ = [
    "CSV_COLUMNS",
    "Setup",
    "build",
    "converge_csv",
    "initial_state",
    "make_rng",
    "run_certify",
    "run_converge",
    "run_simulate",
    "run_verify",
    "smooth_state",
    "write_atomic",
]
