"""Command-line front end.

Usage: ``python -m nanoimaging SUBCOMMAND --config FILE --out DIR``. Every run
writes its tables (CSV) and diagnostics (JSON) to ``DIR`` together with
``manifest.json``; timings and the timestamp live only in the manifest so
the data files are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import background as bg
from . import config as cfgmod
from .asymptotics import (SynthesisMode, SyntheticDataset, UnsupportedModeError, ValidityError,
                          synthesize)
from .inversion import (InconsistentDataError, ReconstructionError, run_electric_pipeline,
                        run_magnetic_pipeline)
from .mie import MieError, mie_far_field, solve_mie
from .rates import delta_ladder, electric_farfield_errors, fit_rate
from .surface_potentials import (MeshError, ball_polarization_tensor, polarization_tensor)

log = logging.getLogger("nanoimaging")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

NUMERIC_ERRORS = (bg.ConvergenceError, ReconstructionError, InconsistentDataError, MieError, MeshError,
                  ValidityError, UnsupportedModeError, np.linalg.LinAlgError, FloatingPointError)


def _f(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_f(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _write_json(path: Path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


class Run:
    def __init__(self, cfg: dict, out: Path, base: Path | None, seed: int | None):
        self.cfg = cfg
        self.out = out
        self.base = base
        self.seed = seed
        self.files: list[str] = []
        self.stages: dict[str, float] = {}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def timed(self, stage, fn, *args, **kwargs):
        t = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.stages[stage] = time.perf_counter() - t


# -- subcommands --------------------------------------------------------------------

def cmd_forward_mie(run: Run):
    scen = cfgmod.build_scenario(run.cfg, run.base)
    coeffs = run.timed("solve", solve_mie, scen.particle, scen.medium)
    d = scen.d
    # pattern in the plane spanned by d and a perpendicular axis
    perp = np.cross(d, [1.0, 0.0, 0.0])
    if np.linalg.norm(perp) < 1e-8:
        perp = np.cross(d, [0.0, 1.0, 0.0])
    perp /= np.linalg.norm(perp)
    thetas = np.linspace(0.0, math.pi, 181)
    xh = np.cos(thetas)[:, None] * d + np.sin(thetas)[:, None] * perp
    ff = mie_far_field(coeffs, xh, d)
    _write_csv(run.path("farfield.csv"), ["theta", "re", "im"],
               [(t, v.real, v.imag) for t, v in zip(thetas, ff)])
    _write_json(run.path("coefficients.json"), {
        "n_max": coeffs.n_max, "kappa0": coeffs.kappa0, "kappa1": coeffs.kappa1,
        "scat": [[c.real, c.imag] for c in coeffs.scat],
        "max_residual": float(np.max(coeffs.residual))})


def cmd_polarization(run: Run):
    medium = cfgmod.build_medium(run.cfg, run.base)
    spec, _ = cfgmod.build_particle(run.cfg, medium, run.base)
    if spec.body.mesh is None:
        pt = ball_polarization_tensor(medium.mu0, spec.mu1, spec.body.volume)
        source = "closed form"
    else:
        pt = run.timed("nystrom", polarization_tensor, spec.body.mesh, medium.mu0, spec.mu1)
        source = f"nystrom, {len(spec.body.mesh)} panels"
    _write_csv(run.path("M.csv"), ["m1", "m2", "m3"], [tuple(r) for r in pt.matrix])
    ref = ball_polarization_tensor(medium.mu0, spec.mu1)
    rel = float(np.linalg.norm(pt.matrix - ref.matrix) / np.linalg.norm(ref.matrix))
    _write_json(run.path("polarization.json"), {
        "lambda": pt.lam, "m0": pt.m0, "asymmetry": pt.asymmetry, "source": source,
        "ball_reference": ref.matrix, "relative_difference_to_ball": rel})


def cmd_background(run: Run):
    scen = cfgmod.build_scenario(run.cfg, run.base)
    medium = scen.medium
    if medium.eps0_field is None:
        raise cfgmod.ConfigError("medium.eps0_profile", "the background command needs a gridded profile")
    U, info = run.timed("ls_solve", bg.ls_solve, medium, scen.d, return_info=True)
    U.to_csv(run.path("U_total.csv"))
    medium.eps0_field.to_csv(run.path("eps0.csv"))
    ff = bg.background_farfield(medium, U, -scen.d)
    _write_json(run.path("background.json"), {
        "iterations": info.iterations, "residual": info.residual, "unknowns": bg.volume_operator(medium).n_support,
        "backscatter_farfield": [float(ff.real), float(ff.imag)]})


def _dataset(run: Run, scen):
    path = run.cfg.get("run", {}).get("dataset")
    if path:
        return SyntheticDataset.load(cfgmod._resolve(path, run.base))
    syn = run.cfg.get("synthesis", {})
    seed = run.seed if run.seed is not None else syn.get("seed", 0)
    mode = SynthesisMode(syn.get("mode", "AsymptoticLeading"))
    zg = cfgmod.build_z_grid(run.cfg, scen.medium)
    plan = cfgmod.build_plan(run.cfg)
    return run.timed("synthesize", synthesize, scen, zg, plan, mode, syn.get("noise", 0.0), seed)


def cmd_synthesize(run: Run):
    scen = cfgmod.build_scenario(run.cfg, run.base)
    ds = _dataset(run, scen)
    ds.save(run.path("dataset.json"))


def _write_reconstruction(run: Run, res, scen):
    res.eps0_map.with_values(np.where(res.mask, res.eps0_map.values, np.nan)).to_csv(run.path("eps0.csv"))
    diag = dict(res.diagnostics)
    diag["branch_flips"] = res.branch_flips
    medium = scen.medium
    if medium.eps0_field is not None and medium.eps0_field.same_geometry(res.eps0_map):
        diag["relative_max_error"] = res.error_against(medium.eps0_field)
    elif medium.homogeneous:
        diag["relative_max_error"] = res.error_against(medium.eps0_exterior)
    _write_json(run.path("reconstruction.json"), diag)


def cmd_invert_electric(run: Run):
    scen = cfgmod.build_scenario(run.cfg, run.base)
    ds = _dataset(run, scen)
    rc = run.cfg.get("run", {})
    res = run.timed("invert", run_electric_pipeline, ds, scen, rc.get("threshold", 0.1),
                    rc.get("contrast", "exact"))
    _write_reconstruction(run, res, scen)


def cmd_invert_magnetic(run: Run):
    scen = cfgmod.build_scenario(run.cfg, run.base)
    ds = _dataset(run, scen)
    res = run.timed("invert", run_magnetic_pipeline, ds, scen, run.cfg.get("run", {}).get("threshold", 0.1))
    _write_reconstruction(run, res, scen)


def cmd_rates(run: Run):
    sw = run.cfg.get("sweep")
    if sw is None:
        raise cfgmod.ConfigError("sweep", "the rates command needs a sweep section")
    medium = cfgmod.build_medium(run.cfg, run.base)
    d = run.cfg.get("measurements", {}).get("d", [0.0, 0.0, 1.0])
    deltas = delta_ladder(sw.get("delta_start", 0.1), sw.get("delta_count", 6))
    table, fits = [], []
    for alpha in sw["alphas"]:
        rows = run.timed(f"sweep_alpha_{alpha:.4f}", electric_farfield_errors, alpha, deltas, medium.omega, d)
        for delta, err, _, _ in rows:
            table.append((alpha, delta, err))
        fit = fit_rate([(r[0], r[1]) for r in rows])
        fits.append((alpha, fit.slope, fit.intercept, fit.r_squared, 4.0 - alpha))
    _write_csv(run.path("rates.csv"), ["alpha", "delta", "error"], table)
    _write_csv(run.path("rate_fits.csv"), ["alpha", "slope", "intercept", "r_squared", "target"], fits)
    for alpha, slope, _, _, target in fits:
        print(f"alpha={alpha:.4f}  fitted slope {slope:.4f}  (target {target:.4f})")


def cmd_mixed_reciprocity(run: Run):
    scen = cfgmod.build_scenario(run.cfg, run.base)
    medium = scen.medium
    meas = run.cfg.get("measurements", {})
    z = np.asarray(meas.get("z", [0.0, 0.0, 0.0]), float)
    xhat = np.asarray(meas.get("xhat", (-scen.d).tolist()), float)
    c = bg.mixed_reciprocity_constant()
    dev = run.timed("check", bg.mixed_reciprocity_check, medium, z, xhat)
    _write_json(run.path("mixed_reciprocity.json"), {
        "constant": [c.real, c.imag], "deviation": dev, "z": z, "xhat": xhat})
    print(f"mixed reciprocity deviation {dev:.3e}")


COMMANDS = {
    "forward-mie": cmd_forward_mie,
    "polarization": cmd_polarization,
    "background": cmd_background,
    "synthesize": cmd_synthesize,
    "invert-electric": cmd_invert_electric,
    "invert-magnetic": cmd_invert_magnetic,
    "rates": cmd_rates,
    "mixed-reciprocity": cmd_mixed_reciprocity,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nanoimaging", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--seed", type=int, default=None, help="overrides synthesis.seed")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _set_threads(n: int | None) -> int:
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n is None else max(1, min(n, limit))
    numba.set_num_threads(n)
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = cfgmod.load(args.config)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    threads = _set_threads(args.threads)
    run = Run(cfg, out, Path(args.config).resolve().parent, args.seed)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    status, code = "ok", EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](run)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        status, code = f"config error: {exc}", EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        print(f"stage timings: {run.stages}", file=sys.stderr)
        status, code = f"numerical failure: {exc}", EXIT_NUMERIC
    manifest = {
        "command": args.command,
        "config": cfg,
        "config_path": str(Path(args.config).resolve()),
        "seed": args.seed,
        "threads": threads,
        "outputs": run.files,
        "status": status,
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "package": _version()},
        # everything below varies between identical runs
        "volatile": {"started": started, "elapsed_s": time.perf_counter() - t0, "stages_s": run.stages,
                     "pid": os.getpid()},
    }
    _write_json(out / "manifest.json", manifest)
    return code


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # package not installed (running from a checkout)
        return "unknown"


if __name__ == "__main__":
    sys.exit(main())
