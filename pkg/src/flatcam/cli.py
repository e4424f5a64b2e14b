"""
Command-line entry point
========================

::

    flatcam gen-mask    --preset visible --out mask/
    flatcam simulate    --preset swir --scene scene.pgm --out sim/
    flatcam calibrate   --preset swir --simulate --out system/
    flatcam calibrate   --config exp.json --captures raw/ --out system/
    flatcam reconstruct --system system/ --sensor sim/sensor_raw.fcm --method tv --out rec/
    flatcam analyze     transparency --out fig4a/

Exit codes: 0 success, 2 invalid input, 3 file errors, 4 numerical failure.
Every output directory receives ``provenance.json`` with the tool version,
the full configuration and its SHA-256 hash.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, analysis, calib, fileio, recon, sim
from .config import ExperimentConfig, build_mask, load_config, preset, printable
from .errors import (
    AllSingularValuesTruncated,
    DidNotConverge,
    DimensionMismatch,
    FlatCamError,
    InconsistentFactor,
    MissingCapture,
    NonFiniteObjective,
    OutOfFieldOfView,
    TooLarge,
    ValidationError,
    ZeroInput,
)
from .optics import DENSE_LIMIT, build_dense_transfer, system_from_mask

log = logging.getLogger("flatcam")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (MissingCapture, OSError)):
        return EXIT_IO
    if isinstance(exc, (AllSingularValuesTruncated, NonFiniteObjective, InconsistentFactor,
                        np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ValidationError, DimensionMismatch, ZeroInput, OutOfFieldOfView, TooLarge,
                        FlatCamError, ValueError)):
        return EXIT_VALIDATION
    return 1


# --- shared plumbing ----------------------------------------------------------


def resolve_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ValidationError("use either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset or "swir")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def output_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_provenance(out: Path, command: str, cfg: Optional[ExperimentConfig], **extra) -> dict:
    cfg_dict = cfg.to_dict() if cfg is not None else None
    record = {
        "tool": "flatcam",
        "version": __version__,
        "command": command,
        "config": cfg_dict,
        "config_hash": fileio.config_hash(cfg_dict),
        **extra,
    }
    fileio.write_json(out / "provenance.json", record)
    return record


def simulated_system(cfg: ExperimentConfig):
    """Forward model of the printed mask, and the model of its corrected data."""
    mask = printable(build_mask(cfg.mask, cfg.optics))
    if mask.factors is not None:
        system = system_from_mask(mask, cfg.optics)
        truth = system.corrected_system() if hasattr(system, "corrected_system") else system.centered()
        return system, truth
    if cfg.optics.n_scene > DENSE_LIMIT or cfg.optics.m_sensor > DENSE_LIMIT:
        raise TooLarge("non-separable masks are simulated densely; keep n_scene, m_sensor <= "
                       f"{DENSE_LIMIT}")
    return build_dense_transfer(mask, cfg.optics), None


def absolute_noise(cfg: ExperimentConfig, system) -> float:
    """Config noise is relative to the RMS sensor value under a flat white scene."""
    if cfg.noise.sigma == 0:
        return 0.0
    n = cfg.optics.n_scene
    white = system.forward(np.ones((n, n)))
    return cfg.noise.sigma * float(np.sqrt(np.mean(white ** 2)))


# --- subcommands --------------------------------------------------------------


def cmd_gen_mask(args) -> dict:
    cfg = resolve_config(args)
    out = output_dir(args)
    mask = build_mask(cfg.mask, cfg.optics)
    optical = printable(mask)
    if mask.form == "signed":
        fileio.write_mask_pgm(out / "mask_signed.pgm", mask)
        fileio.write_csv(out / "mask_signed.csv", mask.transmittance)
    fileio.write_mask_pgm(out / "mask_optical.pgm", optical)
    fileio.write_csv(out / "mask_optical.csv", optical.transmittance)
    info = {
        "kind": cfg.mask.kind,
        "shape": list(optical.shape),
        "feature_size_um": optical.feature_size_um,
        "printed_size_mm": optical.shape[0] * cfg.optics.delta_um / 1000.0,
        "open_fraction": optical.open_fraction(),
        "separable_factors": mask.factors is not None,
    }
    write_provenance(out, "gen-mask", cfg, mask=info)
    log.info("mask %dx%d, feature %.4g um, open fraction %.3f -> %s",
             *optical.shape, optical.feature_size_um, info["open_fraction"], out)
    return info


def cmd_simulate(args) -> dict:
    cfg = resolve_config(args)
    n = cfg.optics.n_scene
    if args.scene:
        scene = fileio.read_matrix(args.scene)
        if scene.shape != (n, n):
            raise DimensionMismatch(f"scene is {scene.shape}, config expects {(n, n)}")
    else:
        scene = sim.phantom(n, rng_seed=cfg.noise.seed)
    system, truth = simulated_system(cfg)
    out = output_dir(args)
    sigma = absolute_noise(cfg, system)
    y = sim.capture(system, scene, sigma, cfg.noise.seed, cfg.noise.frames)
    yc = sim.mean_correct(y)
    fileio.write_fcm(out / "sensor_raw.fcm", y.values)
    fileio.write_fcm(out / "sensor_corrected.fcm", yc.values)
    fileio.write_fcm(out / "scene.fcm", scene)
    fileio.write_image_pgm(out / "sensor_raw.pgm", y.values)
    if truth is not None:
        # ground-truth model of the corrected data, readable by `reconstruct`
        fileio.write_fcm(out / "phi_l.fcm", truth.phi_l)
        fileio.write_fcm(out / "phi_r.fcm", truth.phi_r)
    info = {"scene": str(args.scene) if args.scene else "phantom", "seed": cfg.noise.seed,
            "noise_sigma": cfg.noise.sigma, "noise_sigma_abs": sigma, "frames": cfg.noise.frames,
            "corrected_rank": sim.numerical_rank(yc.values) if yc.values.any() else 0}
    write_provenance(out, "simulate", cfg, simulation=info)
    log.info("captured %dx%d sensor image -> %s", *y.shape, out)
    return info


def cmd_calibrate(args) -> dict:
    cfg = resolve_config(args)
    if bool(args.simulate) == bool(args.captures):
        raise ValidationError("calibrate needs exactly one of --simulate or --captures DIR")
    order = cfg.optics.n_scene
    if args.simulate:
        system, _ = simulated_system(cfg)
        sigma = absolute_noise(cfg, system)
        if args.save_captures:
            calib.write_capture_directory(system, order, args.save_captures, sigma,
                                          cfg.noise.seed, cfg.noise.frames)
        result = calib.calibrate_full(system, order, sigma, cfg.noise.seed, cfg.noise.frames)
        source = "simulated"
    else:
        result = calib.calibrate_full(Path(args.captures), order)
        source = str(args.captures)
    out = output_dir(args)
    fileio.write_fcm(out / "phi_l.fcm", result.system.phi_l)
    fileio.write_fcm(out / "phi_r.fcm", result.system.phi_r)
    meta = {"source": source, **result.metadata()}
    write_provenance(out, "calibrate", cfg, calibration=meta)
    if any(result.weak_shared_factor.values()):
        log.warning("weak shared factor on axis %s; calibration may be unreliable",
                    [k for k, v in result.weak_shared_factor.items() if v])
    log.info("calibrated %dx%d factors (residual L %.2e, R %.2e) -> %s",
             *result.system.phi_l.shape, result.residual_l, result.residual_r, out)
    return meta


def load_system(directory) -> recon.SeparableSystem:
    d = Path(directory)
    return recon.SeparableSystem(fileio.read_fcm(d / "phi_l.fcm"), fileio.read_fcm(d / "phi_r.fcm"))


def cmd_reconstruct(args) -> dict:
    cfg = resolve_config(args) if (args.config or args.preset) else None
    rs = cfg.recon if cfg is not None else None
    method = args.method or (rs.method if rs else "tikhonov")
    tau = args.tau if args.tau is not None else (rs.tau if rs else None)
    lam = args.lam if args.lam is not None else (rs.lam if rs else None)
    system = load_system(args.system)
    if args.tau_rel is not None:
        if args.tau is not None:
            raise ValidationError("use either --tau or --tau-rel, not both")
        tau = args.tau_rel * system.sigma_max ** 2
    y = sim.mean_correct(fileio.read_matrix(args.sensor)).values
    report = {"method": method, "system": str(args.system), "sensor": str(args.sensor)}
    start = time.perf_counter()
    if method == "ls":
        x = recon.reconstruct_ls(system, y)
    elif method == "tikhonov":
        tau = recon.default_tau(system) if tau is None else tau
        x = recon.reconstruct_tikhonov(system, y, tau)
        report["tau"] = tau
    else:
        opts = recon.ReconOptions(tau=tau, lam=lam,
                                  huber_eps=rs.huber_eps if rs else None,
                                  max_iters=rs.max_iters if rs else 500,
                                  rel_tol=rs.rel_tol if rs else 1e-8)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DidNotConverge)
            x, info = recon.reconstruct_tv(system, y, options=opts, return_info=True)
        report.update(tau=opts.tau if opts.tau is not None else recon.default_tau(system),
                      **{"lambda": info.lam}, huber_eps=info.huber_eps, iterations=info.iterations,
                      converged=info.converged, restarts=info.restarts, objective=info.objective)
        msgs = [str(w.message) for w in caught if issubclass(w.category, DidNotConverge)]
        if msgs:
            report["warning"] = msgs[0]
            log.warning("%s", msgs[0])
    report["seconds"] = time.perf_counter() - start
    ny = float(np.linalg.norm(y))
    report["residual"] = float(np.linalg.norm(system.forward(x) - y)) / ny if ny > 0 else 0.0
    if args.truth:
        report["metrics"] = recon.metrics(x, fileio.read_matrix(args.truth))
    out = output_dir(args)
    fileio.write_fcm(out / "image.fcm", x)
    fileio.write_image_pgm(out / "image.pgm", x)
    fileio.write_json(out / "report.json", report)
    write_provenance(out, "reconstruct", cfg, method=method)
    log.info("%s reconstruction %dx%d -> %s", method, *x.shape, out)
    return report


EXPERIMENTS = {
    "transparency": lambda seed, n_seeds, size: analysis.compare_transparency(
        seeds=range(seed, seed + n_seeds), sizes=(size or 255,)),
    "separability": lambda seed, n_seeds, size: analysis.compare_separability(n=size or 64, seed=seed),
    "pinhole-mls": lambda seed, n_seeds, size: analysis.compare_pinhole_mls(n=size or 255),
}


def cmd_analyze(args) -> dict:
    seed = 0 if args.seed is None else args.seed
    reports = EXPERIMENTS[args.experiment](seed, args.n_seeds, args.size)
    out = output_dir(args)
    analysis.write_spectra_csv(reports, out / "spectra.csv")
    analysis.write_summary_csv(reports, out / "summary.csv")
    if args.gnuplot:
        analysis.write_gnuplot(reports, "spectra.csv", out / "spectra.gp")
    summary = {r.label: {"sigma_max": r.sigma_max, "sigma_min_nonzero": r.sigma_min_nonzero,
                         "condition_number": r.condition_number, "open_fraction": r.open_fraction}
               for r in reports}
    write_provenance(out, "analyze", None, experiment=args.experiment, seed=seed,
                     n_seeds=args.n_seeds, size=args.size, reports=summary)
    for r in reports:
        log.info("%-18s sigma_max %10.4g  cond %10.4g", r.label, r.sigma_max, r.condition_number)
    return summary


# --- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment JSON")
    common.add_argument("--preset", choices=["visible", "swir"], help="built-in experiment")
    common.add_argument("--seed", type=int, help="overrides mask and noise seeds")
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    p = argparse.ArgumentParser(prog="flatcam", description="Separable-mask lensless camera toolkit.")
    p.add_argument("--version", action="version", version=f"flatcam {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-mask", parents=[common], help="write signed and printable masks")
    g.set_defaults(func=cmd_gen_mask)

    s = sub.add_parser("simulate", parents=[common], help="simulate sensor captures")
    s.add_argument("--scene", type=Path, help="N x N scene (.fcm/.pgm/.csv); default: phantom")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", parents=[common], help="estimate phi_l and phi_r")
    c.add_argument("--simulate", action="store_true", help="calibrate a simulated camera")
    c.add_argument("--captures", type=Path, help="directory of raw calibration captures")
    c.add_argument("--save-captures", type=Path, help="with --simulate: also store the raw captures")
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("reconstruct", parents=[common], help="recover a scene")
    r.add_argument("--system", type=Path, required=True, help="directory with phi_l.fcm, phi_r.fcm")
    r.add_argument("--sensor", type=Path, required=True, help="sensor image (.fcm/.pgm/.csv)")
    r.add_argument("--method", choices=["ls", "tikhonov", "tv"])
    r.add_argument("--tau", type=float)
    r.add_argument("--tau-rel", type=float,
                   help="tau as a multiple of sigma_max^2 (calibrated factors have an arbitrary scale)")
    r.add_argument("--lambda", dest="lam", type=float)
    r.add_argument("--truth", type=Path, help="reference scene for quality metrics")
    r.set_defaults(func=cmd_reconstruct)

    a = sub.add_parser("analyze", parents=[common], help="mask conditioning experiments")
    a.add_argument("experiment", choices=sorted(EXPERIMENTS))
    a.add_argument("--n-seeds", type=int, default=1, help="random masks per kind (transparency)")
    a.add_argument("--size", type=int, help="N = M (default 255, or 64 for separability)")
    a.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    log.setLevel(logging.ERROR if args.quiet else logging.INFO)
    try:
        args.func(args)
    except Exception as exc:
        code = exit_code(exc)
        if code == 1:
            raise
        log.error("%s: %s", type(exc).__name__, exc)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
