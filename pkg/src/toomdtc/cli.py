"""Command-line harness: run, sweep, validate, oracle-check.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error
(including a failed oracle comparison).  All randomness flows through the
counter-based seeding scheme, so outputs are byte-reproducible for a given
config file regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time

import click
import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, config_digest, load_config
from .dense import (MAX_DENSITY_QUBITS, OperatorCache, magnetization_dm,
                    oracle_apply_period, plus_state, zero_state)
from .protocol import ensemble_mean, run_ensemble


def _csv_row(values) -> str:
    return ",".join(repr(float(v)) if isinstance(v, float) else str(v)
                    for v in values)


def write_timeseries_csv(path, mean, stderr):
    """Columns: t, mean_M, stderr_M, mean_M_even_parity_tag."""
    lines = ["t,mean_M,stderr_M,mean_M_even_parity_tag"]
    for t in range(len(mean)):
        rect = mean[t] * (1.0 if t % 2 == 0 else -1.0)
        lines.append(_csv_row([t, float(mean[t]), float(stderr[t]), float(rect)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(outdir, config_path, outputs, wall_clock, cfg: RunConfig):
    manifest = {
        "format": "toomdtc-run-manifest",
        "version": __version__,
        "config_sha256": config_digest(config_path),
        "master_seed": cfg.master_seed,
        "wall_clock_seconds": wall_clock,
        "outputs": {name: _sha256(outdir / name) for name in outputs},
    }
    path = outdir / "run_manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _plot_svg(path, mean, stderr):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = np.arange(len(mean))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(t, mean, yerr=stderr, lw=0.8, elinewidth=0.5, label="M(t)")
    rect = mean * (-1.0) ** t
    ax.plot(t, rect, lw=0.8, label="parity-rectified")
    ax.set_xlabel("period t")
    ax.set_ylabel("magnetization")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


@click.group()
@click.version_option(__version__)
def main():
    """Measurement-feedback time-crystal simulation harness."""


def _load(config_path) -> RunConfig:
    try:
        return load_config(config_path)
    except (ConfigError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("config_path", type=click.Path(exists=False))
def validate(config_path):
    """Check a config file; prints OK or the errors."""
    _load(config_path)
    click.echo("OK")


@main.command()
@click.argument("config_path", type=click.Path(exists=False))
@click.option("--outdir", "-o", type=click.Path(), default=".",
              help="output directory (created if missing)")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--plot/--no-plot", default=False,
              help="also write an SVG of the magnetization trace")
def run(config_path, outdir, workers, plot):
    """Run one ensemble and write timeseries.csv plus a manifest."""
    from pathlib import Path

    cfg = _load(config_path)
    if cfg.sweep is not None:
        click.echo("config error: 'sweep' block present; use the sweep "
                   "command", err=True)
        sys.exit(1)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    try:
        mags = run_ensemble(cfg.protocol_params(), cfg.init, cfg.trajectories,
                            cfg.master_seed, point_index=0, workers=workers)
    except Exception as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)
    mean, se = ensemble_mean(mags)
    outputs = ["timeseries.csv"]
    write_timeseries_csv(out / "timeseries.csv", mean, se)
    if plot:
        _plot_svg(out / "magnetization.svg", mean, se)
        outputs.append("magnetization.svg")
    write_manifest(out, config_path, outputs, time.monotonic() - t0, cfg)
    click.echo(f"wrote {out / 'timeseries.csv'}")


@main.command()
@click.argument("config_path", type=click.Path(exists=False))
@click.option("--outdir", "-o", type=click.Path(), default=".")
@click.option("--workers", type=int, default=1, show_default=True)
def sweep(config_path, outdir, workers):
    """Run the config's sweep block and write one combined CSV."""
    from pathlib import Path

    cfg = _load(config_path)
    if cfg.sweep is None:
        click.echo("config error: no 'sweep' block in config", err=True)
        sys.exit(1)
    key, values = cfg.sweep
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    lines = [f"{key},t,mean_M,stderr_M,mean_M_even_parity_tag"]
    for point, value in enumerate(values):
        overrides = {key: value}
        n_traj = int(value) if key == "trajectories" else cfg.trajectories
        seed = int(value) if key == "master_seed" else cfg.master_seed
        try:
            params = cfg.protocol_params(**overrides)
            mags = run_ensemble(params, cfg.init, n_traj, seed,
                                point_index=point, workers=workers)
        except ValueError as exc:
            click.echo(f"config error: sweep value {value!r}: {exc}", err=True)
            sys.exit(1)
        except Exception as exc:
            click.echo(f"runtime error: {exc}", err=True)
            sys.exit(2)
        mean, se = ensemble_mean(mags)
        for t in range(len(mean)):
            rect = mean[t] * (1.0 if t % 2 == 0 else -1.0)
            lines.append(_csv_row([value, t, float(mean[t]), float(se[t]),
                                   float(rect)]))
    with open(out / "sweep.csv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    write_manifest(out, config_path, ["sweep.csv"], time.monotonic() - t0, cfg)
    click.echo(f"wrote {out / 'sweep.csv'}")


@main.command("oracle-check")
@click.argument("config_path", type=click.Path(exists=False))
@click.option("--tolerance-se", type=float, default=5.0, show_default=True,
              help="allowed deviation in standard-error units")
def oracle_check(config_path, tolerance_se):
    """Compare the sampled ensemble against the exact mixture channel.

    Runs the stabilizer sampler and iterates the exact single-period
    channel on the same small lattice, then compares mean M(t).
    """
    cfg = _load(config_path)
    params = cfg.protocol_params()
    n = params.lattice.n_sites
    if n > MAX_DENSITY_QUBITS:
        click.echo(f"config error: oracle-check needs <= {MAX_DENSITY_QUBITS} "
                   f"sites, got {n}", err=True)
        sys.exit(1)
    if cfg.init not in ("all_plus", "all_zero"):
        click.echo("config error: oracle-check needs a deterministic init",
                   err=True)
        sys.exit(1)
    try:
        mags = run_ensemble(params, cfg.init, cfg.trajectories,
                            cfg.master_seed)
        mean, se = ensemble_mean(mags)
        ops = OperatorCache(params.lattice)
        psi = plus_state(n) if cfg.init == "all_plus" else zero_state(n)
        rho = np.outer(psi, psi.conj())
        exact = [magnetization_dm(rho, ops)]
        for _ in range(params.steps):
            rho = oracle_apply_period(rho, params, ops)
            exact.append(magnetization_dm(rho, ops))
    except Exception as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)
    exact = np.asarray(exact)
    floor = 1.0 / np.sqrt(cfg.trajectories)
    dev = np.abs(mean - exact) / np.maximum(se, 1e-3 * floor)
    worst = float(dev.max())
    click.echo(f"max deviation: {worst:.2f} SE (tolerance {tolerance_se})")
    if worst > tolerance_se:
        click.echo("oracle-check FAILED", err=True)
        sys.exit(2)
    click.echo("oracle-check passed")


if __name__ == "__main__":
    main()
