"""Command line entry point.

Usage
-----

    stochlattice simulate   --config run.yaml --out results/
    stochlattice attractor  --config run.yaml --out results/ --threads 4
    stochlattice measures   --config run.yaml --reuse-noise results/noise.bin
    stochlattice liouville  --config run.yaml
    stochlattice sweep-all  --config run.yaml

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import cloud_scale, tail_profile, usc_sweep
from .config import ConfigError, RunConfig, load_config
from .dynamics import IntegrationError, energy_inequality, integrate
from .io import file_digest, write_csv, write_json, write_matrix
from .lattice import LatticeVec, norms_along_last
from .liouville import TERM_NAMES, termwise_sweep
from .measures import measure_sweep
from .noise import load_path, ou_attach, path_digest, sample_wiener, save_path, z_at
from .testfunctions import CylTestFunction, direction_vectors

log = logging.getLogger("stochlattice")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP = 0, 2, 3
COMMANDS = ("simulate", "attractor", "measures", "liouville", "sweep-all")


@dataclass
class RunContext:
    cfg: RunConfig
    out: Path
    threads: int
    path: object
    config_digest: str
    noise_digest: str
    files: list = field(default_factory=list)

    @property
    def digests(self) -> dict:
        return {"config_digest": self.config_digest, "noise_digest": self.noise_digest}

    def wants(self, fmt: str) -> bool:
        return fmt in self.cfg.output.formats

    def record(self, filename: Path) -> None:
        self.files.append(filename)


def required_interval(cfg: RunConfig, command: str) -> tuple[float, float]:
    """Times of the noise sample a subcommand reads (path frame, origin = now)."""
    ex = cfg.experiment
    if command == "simulate":
        return ex.tau, ex.t_end
    if command == "attractor":
        return -ex.T - ex.horizon, 0.0
    if command == "measures":
        lo = min(ex.t_list) - ex.tau - max(ex.measure_window, ex.horizon)
        return lo, max(ex.t_list) - ex.tau
    if command == "liouville":
        return ex.s - ex.tau - ex.measure_window, ex.t - ex.tau
    spans = [required_interval(cfg, c) for c in COMMANDS[1:4]]
    return min(s[0] for s in spans), max(s[1] for s in spans)


def _check_grid(cfg: RunConfig) -> None:
    ex, dt = cfg.experiment, cfg.noise.dt
    named = {"experiment.tau": ex.tau, "experiment.T": ex.T, "experiment.t_end": ex.t_end,
             "experiment.s": ex.s, "experiment.t": ex.t}
    named.update({f"experiment.t_list[{i}]": t for i, t in enumerate(ex.t_list)})
    for name, value in named.items():
        x = value / dt
        if abs(x - round(x)) > 1e-6:
            raise ConfigError(name, f"{value!r} is not a multiple of noise.dt")


def _noise_path(cfg: RunConfig, reuse: str | None, command: str):
    lo, hi = required_interval(cfg, command)
    if reuse is None:
        nz = cfg.noise
        if nz.t_min > lo + 1e-9:
            raise ConfigError("noise.t_min", f"must be <= {lo!r} for {command}")
        if nz.t_max < hi - 1e-9:
            raise ConfigError("noise.t_max", f"must be >= {hi!r} for {command}")
        return ou_attach(sample_wiener(nz.seed, nz.t_min, nz.t_max, nz.dt, nz.burn_in))
    try:
        path = load_path(reuse)
    except (OSError, ValueError) as err:
        raise ConfigError("--reuse-noise", str(err)) from None
    if abs(path.dt - cfg.noise.dt) > 1e-15:
        raise ConfigError("--reuse-noise", f"path step {path.dt!r} != noise.dt")
    if not path.covers(lo, hi):
        raise ConfigError("--reuse-noise", f"path [{path.t_min}, {path.t_max}] does not "
                                            f"cover [{lo}, {hi}] needed by {command}")
    return path if path.z_values is not None else ou_attach(path)


def _initial_state(cfg: RunConfig) -> np.ndarray:
    ex = cfg.experiment
    idx = np.arange(-ex.half_width, ex.half_width + 1, dtype=float)
    if ex.initial == "ones":
        u = np.ones_like(idx)
    elif ex.initial == "zeros":
        u = np.zeros_like(idx)
    else:
        u = np.exp(-idx**2 / 8.0)
    return ex.initial_scale * u


def cmd_simulate(ctx: RunContext) -> dict:
    cfg, ex = ctx.cfg, ctx.cfg.experiment
    params = cfg.params(ex.alpha)
    u0 = _initial_state(cfg)
    v0 = LatticeVec(np.exp(-ex.alpha * z_at(ctx.path, ex.tau)) * u0)
    traj = integrate(v0, ex.tau, ex.t_end, ctx.path, params, cfg.forcing(), guard=ex.guard)
    left, right = energy_inequality(traj)
    keep = np.arange(0, traj.times.size, ex.record_every)
    if keep[-1] != traj.times.size - 1:
        keep = np.append(keep, traj.times.size - 1)
    cols = [c + ex.half_width for c in ex.coords]
    l2 = norms_along_last(traj.u, 2.0)
    lq = norms_along_last(traj.u, params.q)
    header = (["t"] + [f"u_{c}" for c in ex.coords]
              + ["norm_l2", "norm_lq", "energy_left", "energy_right", "energy_gap"])
    rows = [[traj.times[k]] + [traj.u[k, c] for c in cols]
            + [l2[k], lq[k], left[k], right[k], right[k] - left[k]] for k in keep]
    if ctx.wants("csv"):
        write_csv(ctx.out / "trajectory.csv", header, rows, ctx.digests)
        ctx.record(ctx.out / "trajectory.csv")
    if ctx.wants("bin"):
        write_matrix(ctx.out / "trajectory.bin", traj.u[keep], ctx.config_digest,
                     ctx.noise_digest)
        ctx.record(ctx.out / "trajectory.bin")
    gap = right - left
    return {"steps": int(traj.times.size - 1), "rows": int(keep.size),
            "min_energy_gap": float(gap.min()), "final_norm_l2": float(l2[-1])}


def cmd_attractor(ctx: RunContext) -> dict:
    cfg, ex = ctx.cfg, ctx.cfg.experiment
    params = cfg.params()
    res = usc_sweep(ex.alphas, ex.alpha0, ex.tau, ctx.path, ex.T, ex.M, params, cfg.forcing(),
                    ex.half_width, threads=ctx.threads, horizon=ex.horizon)
    cdir = ctx.out / "clouds"
    cdir.mkdir(exist_ok=True)
    clouds, tails = [], []
    for k, (alpha, cloud) in enumerate(res.clouds.items()):
        name = f"cloud_{k:02d}"
        l2max, lqmax = cloud_scale(cloud, params.q)
        meta = {"alpha": alpha, "tau": ex.tau, "T": ex.T, "M": ex.M, "seed": cloud.seed,
                "half_width": ex.half_width, "initial_radius": cloud.initial_radius,
                "resolution": cloud.resolution, "diameter": cloud.diameter(),
                "max_norm_l2": l2max, "max_norm_lq": lqmax, **ctx.digests}
        if ctx.wants("bin"):
            write_matrix(cdir / f"{name}.bin", cloud.points, ctx.config_digest,
                         ctx.noise_digest)
            ctx.record(cdir / f"{name}.bin")
        if ctx.wants("json"):
            write_json(cdir / f"{name}.json", meta)
            ctx.record(cdir / f"{name}.json")
        clouds.append(dict(meta, file=name))
        for row in tail_profile(cloud, ex.tail_cutoffs, params.q):
            tails.append(dict(row, alpha=alpha))
    usc = [r for r in res.rows if r["alpha"] != float(ex.alpha0)]
    if ctx.wants("csv"):
        write_csv(ctx.out / "usc.csv", ["alpha", "dist_l2", "dist_lq", "dist_sum", "M", "T"],
                  usc, ctx.digests)
        ctx.record(ctx.out / "usc.csv")
        write_csv(ctx.out / "tails.csv",
                  ["alpha", "cutoff", "tail_l2", "tail_lq", "mass_l2", "mass_lq"], tails,
                  ctx.digests)
        ctx.record(ctx.out / "tails.csv")
    return {"clouds": [{k: c[k] for k in ("file", "alpha", "resolution", "initial_radius")}
                       for c in clouds],
            "distance_rows": len(usc)}


def cmd_measures(ctx: RunContext) -> dict:
    cfg, ex = ctx.cfg, ctx.cfg.experiment
    params = cfg.params()
    sw = measure_sweep(ex.alphas, ex.alpha0, ex.t_list, ex.tau, ctx.path, ex.measure_window,
                       params, cfg.forcing(), ds=ex.ds, half_width=ex.half_width,
                       dict_size=ex.dict_size, threads=ctx.threads, horizon=ex.horizon)
    mdir = ctx.out / "measures"
    mdir.mkdir(exist_ok=True)
    header = ["weight"] + [f"u_{i}" for i in range(-ex.half_width, ex.half_width + 1)]
    listing = []
    for k, (alpha, fam) in enumerate(sw.measures.items()):
        for j, t in enumerate(sorted(fam)):
            mu = fam[t]
            name = f"measure_{k:02d}_t{j:02d}"
            if ctx.wants("csv"):
                rows = [[w] + list(x) for w, x in zip(mu.weights, mu.particles)]
                write_csv(mdir / f"{name}.csv", header, rows, ctx.digests)
                ctx.record(mdir / f"{name}.csv")
            if ctx.wants("bin"):
                write_matrix(mdir / f"{name}.bin", mu.particles, ctx.config_digest,
                             ctx.noise_digest)
                ctx.record(mdir / f"{name}.bin")
            listing.append({"file": name, "alpha": alpha, "t": t, "particles": mu.size,
                            "window": ex.measure_window, "ds": ex.ds})
    if ctx.wants("json"):
        write_json(mdir / "provenance.json", {"measures": listing, "tau": ex.tau,
                                              **ctx.digests})
        ctx.record(mdir / "provenance.json")
    rows = [r for r in sw.rows if r["alpha"] != float(ex.alpha0)]
    if ctx.wants("csv"):
        write_csv(ctx.out / "bl.csv", ["alpha", "t", "bl_distance", "window", "dict_size"],
                  rows, ctx.digests)
        ctx.record(ctx.out / "bl.csv")
    return {"measures": len(listing), "distance_rows": len(rows)}


def cmd_liouville(ctx: RunContext) -> dict:
    cfg, ex = ctx.cfg, ctx.cfg.experiment
    params = cfg.params()
    psi = CylTestFunction(direction_vectors(ex.psi_directions, ex.half_width),
                          ex.psi_centers, scale=ex.psi_scale)
    sw = termwise_sweep(ex.alphas, ex.alpha0, psi, ex.s, ex.t, ex.tau, ctx.path, params,
                        cfg.forcing(), window=ex.measure_window, ds=ex.ds,
                        grid_step=ex.grid_step, half_width=ex.half_width,
                        threads=ctx.threads)
    rdir = ctx.out / "reports"
    rdir.mkdir(exist_ok=True)
    summary = []
    for k, (alpha, rep) in enumerate(sw.reports.items()):
        if ctx.wants("json"):
            body = rep.to_dict()
            body["recombination_error"] = rep.recombination_error()
            body.update(ctx.digests)
            write_json(rdir / f"report_{k:02d}.json", body)
            ctx.record(rdir / f"report_{k:02d}.json")
        row = {"alpha": alpha, "psi": "cyl", "s": rep.s, "t": rep.t, **rep.terms(),
               "residual_ito": rep.residual_ito, "residual_strat": rep.residual_strat,
               "scale": rep.scale}
        summary.append(row)
    if ctx.wants("csv"):
        write_csv(ctx.out / "liouville_summary.csv",
                  ["alpha", "psi", "s", "t", *TERM_NAMES, "residual_ito", "residual_strat",
                   "scale"], summary, ctx.digests)
        ctx.record(ctx.out / "liouville_summary.csv")
        write_csv(ctx.out / "termwise.csv",
                  ["alpha", *TERM_NAMES, *[f"diff_{t}" for t in TERM_NAMES], "sup_diff",
                   "residual_ito", "residual_strat"], sw.rows, ctx.digests)
        ctx.record(ctx.out / "termwise.csv")
    worst = max(min(abs(r["residual_ito"]), abs(r["residual_strat"])) / max(r["scale"], 1e-300)
                for r in summary)
    return {"reports": len(summary), "worst_relative_residual": worst}


_RUNNERS = {"simulate": cmd_simulate, "attractor": cmd_attractor, "measures": cmd_measures,
            "liouville": cmd_liouville}


def _write_manifest(ctx: RunContext, command: str, summary: dict) -> None:
    files = {str(f.relative_to(ctx.out)): file_digest(f) for f in ctx.files}
    write_json(ctx.out / "manifest.json", {
        "subcommand": command, "version": __version__, "config": ctx.cfg.physics_dict(),
        "formats": list(ctx.cfg.output.formats), "files": files, "summary": summary,
        **ctx.digests})


def _run(command: str, cfg: RunConfig, out: Path, threads: int, reuse: str | None) -> None:
    _check_grid(cfg)
    path = _noise_path(cfg, reuse, command)
    out.mkdir(parents=True, exist_ok=True)
    noise_digest = path_digest(path)
    base = RunContext(cfg, out, threads, path, cfg.digest(), noise_digest)
    if "bin" in cfg.output.formats:
        save_path(path, out / "noise.bin")
        base.record(out / "noise.bin")
    if command != "sweep-all":
        summary = _RUNNERS[command](base)
        _write_manifest(base, command, summary)
        return
    summary = {}
    for sub in ("attractor", "measures", "liouville"):
        ctx = RunContext(cfg, out / sub, threads, path, base.config_digest, noise_digest)
        ctx.out.mkdir(exist_ok=True)
        log.info("sweep-all: %s", sub)
        summary[sub] = _RUNNERS[sub](ctx)
        _write_manifest(ctx, sub, summary[sub])
        base.record(ctx.out / "manifest.json")
    _write_manifest(base, command, summary)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochlattice",
                                description="Random attractors and invariant measures of "
                                            "stochastic p-Laplacian lattice systems")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        s.add_argument("--config", required=True, metavar="PATH", help="YAML or JSON config")
        s.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (default: output.directory of the config)")
        s.add_argument("--threads", type=int, default=1, metavar="K",
                       help="worker threads for ensemble integration")
        s.add_argument("--reuse-noise", metavar="PATH", default=None,
                       help="binary noise file to use instead of sampling a new path")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        cfg = load_config(args.config)
        out = Path(args.out if args.out is not None else cfg.output.directory)
        _run(args.command, cfg, out, args.threads, args.reuse_noise)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as err:
        print(f"numerical blow-up: {err}", file=sys.stderr)
        return EXIT_BLOWUP
    except ValueError as err:
        # library preconditions that follow from the config (e.g. an empty window)
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished; outputs in %s", args.command, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
