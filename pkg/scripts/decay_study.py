"""Hub-rate decay over long runs for the smooth and random initial states at several meshes."""

import argparse
import dataclasses

import numpy as np

from tipbeam.config import default_config, load
from tipbeam.simulator import simulate
from tipbeam.workflows import build, initial_state, make_rng


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--meshes", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--T", type=float, default=200.0)
    args = ap.parse_args()
    cfg = load(args.config) if args.config else default_config()
    print("n,initial,final_over_max_omega,final_V_over_V0")
    for n in args.meshes:
        for initial in ("smooth", "random"):
            run = dataclasses.replace(cfg, mesh=dataclasses.replace(cfg.mesh, n=n),
                                      sim=dataclasses.replace(cfg.sim, initial=initial, T=args.T))
            s = build(run)
            x0 = initial_state(s, make_rng(run.sim.seed))
            traj = simulate(s.system, x0, run.sim.dt, run.sim.T)
            omega = np.abs(traj.states[:, -1])
            V = s.form.V(traj.states.T)
            print(f"{n},{initial},{omega[-1] / omega.max():.3e},{V[-1] / V[0]:.3e}")


if __name__ == "__main__":
    main()
