"""Command line: ``tipbeam certify|simulate|verify|converge --config FILE [--out DIR] [--seed N]``.

Exit codes: 0 pass, 1 domain-negative result (infeasible gains, failed property), 2 usage or
configuration error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import workflows as wf
from .beam import ModelError
from .config import ConfigError, RunConfig, default_config, load

EXIT_PASS, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2


def _load(config: str | None, out: str | None, seed: int | None) -> tuple[RunConfig, Path]:
    try:
        cfg = load(config) if config else default_config()
        if seed is not None:
            cfg.sim.seed = seed
            cfg.validate()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    return cfg, Path(out if out is not None else cfg.output.dir)


def _common(fn):
    fn = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                      help="RNG seed (overrides sim.seed).")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None,
                      help="Output directory (overrides output.dir).")(fn)
    fn = click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None,
                      help="TOML or JSON run configuration; built-in defaults when omitted.")(fn)
    return fn


def _guard(fn):
    """Map model errors raised after config validation to exit code 2."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, ModelError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
def main() -> None:
    """Boundary-feedback stabilization of a flexible beam with tip mass."""


@main.command()
@_common
@_guard
def certify(config, out, seed):
    """Write certificate.json; exit 0 iff the gains satisfy the stability constraints."""
    cfg, outdir = _load(config, out, seed)
    cert = wf.run_certify(cfg)
    wf.write_atomic(outdir / "certificate.json", wf.dump_json(cert))
    click.echo(f"M1={cert['M1']:.6g} M2={cert['M2']:.6g} feasible={cert['feasible']}")
    sys.exit(EXIT_PASS if cert["feasible"] else EXIT_NEGATIVE)


@main.command()
@_common
@_guard
def simulate(config, out, seed):
    """Write trajectory.csv and summary.json for one closed-loop run."""
    cfg, outdir = _load(config, out, seed)
    csv_text, summary = wf.run_simulate(cfg)
    wf.write_atomic(outdir / "trajectory.csv", csv_text)
    wf.write_atomic(outdir / "summary.json", wf.dump_json(summary))
    click.echo(f"sup|x|/|x0|={summary['sup_norm_ratio']:.6g} bound={summary['bound_sqrt_M2_over_M1']:.6g} "
               f"residual={summary['dissipation_max_residual']:.3g} final|omega|={summary['final_abs_omega']:.3g}")
    if not summary["omega_decay_pass"]:
        click.echo(f"warning: |omega(T)|/max|omega| = {summary['omega_decay_ratio']:.3g} >= {wf.LASALLE_RATIO:g} "
                   f"(n={summary['n']}, dt={summary['dt']:g}); decay of omega is not guaranteed", err=True)
    sys.exit(EXIT_PASS if wf.simulate_ok(summary) else EXIT_NEGATIVE)


@main.command()
@_common
@_guard
def verify(config, out, seed):
    """Run the property battery and write verify.json; exit 0 iff every property holds."""
    cfg, outdir = _load(config, out, seed)
    report = wf.run_verify(cfg)
    wf.write_atomic(outdir / "verify.json", wf.dump_json(report))
    for name, prop in report["properties"].items():
        click.echo(f"{'PASS' if prop['pass'] else 'FAIL'} {name}")
    sys.exit(EXIT_PASS if report["pass"] else EXIT_NEGATIVE)


@main.command()
@_common
@_guard
def converge(config, out, seed):
    """Write converge.csv: refinement table over n = 4, 8, 16, 32, 64."""
    cfg, outdir = _load(config, out, seed)
    rows = wf.run_converge(cfg)
    text = wf.converge_csv(rows)
    wf.write_atomic(outdir / "converge.csv", text)
    click.echo(text, nl=False)
    sys.exit(EXIT_PASS)


if __name__ == "__main__":
    main()
