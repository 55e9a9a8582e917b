"""Mesh refinement table for one configuration: frequency error, feedback-mode gap, dissipation error."""

import argparse

from tipbeam.config import default_config, load
from tipbeam.workflows import converge_csv, run_converge


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="TOML/JSON run configuration (defaults when omitted)")
    ap.add_argument("--meshes", type=int, nargs="+", default=[4, 8, 16, 32, 64, 128])
    args = ap.parse_args()
    cfg = load(args.config) if args.config else default_config()
    print(converge_csv(run_converge(cfg, meshes=tuple(args.meshes))), end="")


if __name__ == "__main__":
    main()
