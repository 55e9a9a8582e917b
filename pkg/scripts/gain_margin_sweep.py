"""How the certificate constants and the closed-loop spectral abscissa move with the gain margin."""

import argparse

import numpy as np

from tipbeam.config import default_config, load
from tipbeam.control import certificate, suggest_gains
from tipbeam.fem import assemble
from tipbeam.lyapunov import build_V
from tipbeam.simulator import build_closed_loop


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--margins", type=float, nargs="+", default=[1.1, 1.5, 2.0, 4.0, 8.0])
    ap.add_argument("--k", type=float, default=1.0)
    args = ap.parse_args()
    cfg = load(args.config) if args.config else default_config()
    ch = cfg.channel_spec()
    ops = assemble(cfg.mesh_obj(), ch)
    print("margin,alpha,beta,kappa,M1,M2,bound,max_real_part,slowest_damping")
    for margin in args.margins:
        g = suggest_gains(ch, margin=margin, k=args.k)
        cert = certificate(ch, g)
        lam = build_closed_loop(ops, g).eigenvalues(build_V(ops, g))
        order = np.argsort(np.abs(lam))
        slow = -lam[order[0]].real
        print(f"{margin:g},{g.alpha:.6g},{g.beta:.6g},{g.kappa:.6g},{cert.M1:.6g},{cert.M2:.6g},"
              f"{np.sqrt(cert.M2 / cert.M1):.6g},{lam.real.max():.3e},{slow:.3e}")


if __name__ == "__main__":
    main()
