import copy
import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from flatcam import config, fileio, sim
from flatcam.cli import main


def write_config(tmp_path, name="cfg.json", **sections):
    d = copy.deepcopy(config.PRESETS["swir"])
    for key, values in sections.items():
        d.setdefault(key, {}).update(values)
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return path


def run(*argv):
    return main([str(a) for a in argv] + ["--quiet"])


def test_gen_mask_visible(tmp_path):
    assert run("gen-mask", "--preset", "visible", "--out", tmp_path) == 0
    px = fileio.read_pgm(tmp_path / "mask_optical.pgm")
    assert px.shape == (510, 510)
    assert set(np.unique(px)) == {0, 255}
    prov = fileio.read_json(tmp_path / "provenance.json")
    assert prov["mask"]["feature_size_um"] == 30.0
    assert prov["mask"]["printed_size_mm"] == pytest.approx(15.3)
    assert prov["config_hash"] == fileio.config_hash(prov["config"])
    assert (tmp_path / "mask_signed.csv").exists()


def test_gen_mask_swir_and_invalid_kind(tmp_path):
    assert run("gen-mask", "--preset", "swir", "--out", tmp_path / "a") == 0
    prov = fileio.read_json(tmp_path / "a" / "provenance.json")
    assert prov["mask"]["feature_size_um"] == 100.0
    assert prov["config"]["optics"]["delta_um"] == 100.0
    bad = write_config(tmp_path, mask={"kind": "hexagon"})
    assert run("gen-mask", "--config", bad, "--out", tmp_path / "b") == 2


def test_simulate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, noise={"sigma": 1e-3})
    for d in ("a", "b"):
        assert run("simulate", "--config", cfg, "--seed", 4, "--out", tmp_path / d) == 0
    for f in ("sensor_raw.fcm", "sensor_corrected.fcm", "scene.fcm"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    run("simulate", "--config", cfg, "--seed", 5, "--out", tmp_path / "c")
    assert (tmp_path / "c" / "sensor_raw.fcm").read_bytes() != (tmp_path / "a" / "sensor_raw.fcm").read_bytes()


def test_simulate_rank1_and_zero_scenes(tmp_path):
    cfg = write_config(tmp_path, noise={"sigma": 0.0})
    scene = np.outer(np.linspace(0, 1, 64), np.linspace(1, 2, 64))
    fileio.write_fcm(tmp_path / "r1.fcm", scene)
    assert run("simulate", "--config", cfg, "--scene", tmp_path / "r1.fcm", "--out", tmp_path / "a") == 0
    yc = fileio.read_fcm(tmp_path / "a" / "sensor_corrected.fcm")
    assert sim.numerical_rank(yc, 1e-8) == 1
    noisy = write_config(tmp_path, "noisy.json", noise={"sigma": 1e-2})
    fileio.write_fcm(tmp_path / "zero.fcm", np.zeros((64, 64)))
    assert run("simulate", "--config", noisy, "--scene", tmp_path / "zero.fcm", "--out", tmp_path / "z") == 0
    yc = fileio.read_fcm(tmp_path / "z" / "sensor_corrected.fcm")
    raw = fileio.read_fcm(tmp_path / "z" / "sensor_raw.fcm")
    assert np.allclose(yc, sim.mean_correct(raw).values)
    assert np.abs(yc.sum(axis=0)).max() < 1e-9 * np.abs(yc).sum()
    assert yc.std() > 0
    fileio.write_fcm(tmp_path / "small.fcm", np.zeros((8, 8)))
    assert run("simulate", "--config", cfg, "--scene", tmp_path / "small.fcm", "--out", tmp_path / "x") == 2


def test_calibrate_noiseless(tmp_path):
    cfg = write_config(tmp_path, noise={"sigma": 0.0})
    assert run("calibrate", "--config", cfg, "--simulate", "--out", tmp_path / "sys") == 0
    files = sorted(p.name for p in (tmp_path / "sys").iterdir())
    assert files == ["phi_l.fcm", "phi_r.fcm", "provenance.json"]
    meta = fileio.read_json(tmp_path / "sys" / "provenance.json")["calibration"]
    assert meta["residual_l"] <= 1e-10 and meta["residual_r"] <= 1e-10
    assert meta["order"] == 64


def test_calibrate_from_capture_directory(tmp_path, caplog):
    cfg = write_config(tmp_path, optics={"n_scene": 8, "m_sensor": 8}, noise={"sigma": 0.0})
    caps = tmp_path / "caps"
    assert run("calibrate", "--config", cfg, "--simulate", "--save-captures", caps,
               "--out", tmp_path / "a") == 0
    assert run("calibrate", "--config", cfg, "--captures", caps, "--out", tmp_path / "b") == 0
    a = fileio.read_fcm(tmp_path / "a" / "phi_l.fcm")
    b = fileio.read_fcm(tmp_path / "b" / "phi_l.fcm")
    assert np.allclose(a, b, atol=1e-12 * np.abs(a).max())
    (caps / "L_0003_neg.fcm").unlink()
    with caplog.at_level(logging.ERROR, logger="flatcam"):
        assert run("calibrate", "--config", cfg, "--captures", caps, "--out", tmp_path / "c") == 3
    assert "L_0003_neg" in caplog.text
    assert run("calibrate", "--config", cfg, "--out", tmp_path / "d") == 2


def test_reconstruct_tikhonov_tau0_equals_ls(tmp_path):
    rng = np.random.default_rng(0)
    sysdir = tmp_path / "sys"
    sysdir.mkdir()
    fileio.write_fcm(sysdir / "phi_l.fcm", np.eye(16) + 0.1 * rng.normal(size=(16, 16)))
    fileio.write_fcm(sysdir / "phi_r.fcm", np.eye(16) + 0.1 * rng.normal(size=(16, 16)))
    fileio.write_fcm(tmp_path / "y.fcm", rng.normal(size=(16, 16)))
    assert run("reconstruct", "--system", sysdir, "--sensor", tmp_path / "y.fcm",
               "--method", "ls", "--out", tmp_path / "ls") == 0
    assert run("reconstruct", "--system", sysdir, "--sensor", tmp_path / "y.fcm",
               "--method", "tikhonov", "--tau", 0, "--out", tmp_path / "tk") == 0
    a = fileio.read_fcm(tmp_path / "ls" / "image.fcm")
    b = fileio.read_fcm(tmp_path / "tk" / "image.fcm")
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(a)
    rep = fileio.read_json(tmp_path / "tk" / "report.json")
    assert rep["method"] == "tikhonov" and rep["tau"] == 0
    assert (tmp_path / "tk" / "provenance.json").exists()


def test_reconstruct_tv_report(tmp_path):
    cfg = write_config(tmp_path, noise={"sigma": 1e-3})
    run("simulate", "--config", cfg, "--out", tmp_path / "sim")
    assert run("reconstruct", "--system", tmp_path / "sim", "--sensor", tmp_path / "sim" / "sensor_raw.fcm",
               "--method", "tv", "--lambda", 1.0, "--truth", tmp_path / "sim" / "scene.fcm",
               "--out", tmp_path / "tv") == 0
    rep = fileio.read_json(tmp_path / "tv" / "report.json")
    trace = np.asarray(rep["objective"])
    assert np.all(np.diff(trace) <= 0)
    assert rep["lambda"] == 1.0 and "metrics" in rep
    assert rep["iterations"] >= 1


def test_reconstruct_errors(tmp_path):
    sysdir = tmp_path / "sys"
    sysdir.mkdir()
    fileio.write_fcm(sysdir / "phi_l.fcm", np.eye(4))
    fileio.write_fcm(sysdir / "phi_r.fcm", np.eye(4))
    fileio.write_fcm(tmp_path / "y.fcm", np.ones((5, 5)))
    assert run("reconstruct", "--system", sysdir, "--sensor", tmp_path / "y.fcm", "--out", tmp_path / "o") == 2
    assert run("reconstruct", "--system", tmp_path / "none", "--sensor", tmp_path / "y.fcm",
               "--out", tmp_path / "o") == 3
    fileio.write_fcm(sysdir / "phi_l.fcm", np.zeros((4, 4)))
    fileio.write_fcm(tmp_path / "y4.fcm", np.ones((4, 4)))
    assert run("reconstruct", "--system", sysdir, "--sensor", tmp_path / "y4.fcm", "--method", "ls",
               "--out", tmp_path / "o") == 4


def test_end_to_end_pipeline(tmp_path):
    # a few spare sensor rows keep the double-centered system full rank
    cfg = write_config(tmp_path, optics={"m_sensor": 72}, noise={"sigma": 0.0})
    assert run("simulate", "--config", cfg, "--out", tmp_path / "sim") == 0
    assert run("calibrate", "--config", cfg, "--simulate", "--out", tmp_path / "cal") == 0
    assert run("reconstruct", "--system", tmp_path / "cal", "--sensor", tmp_path / "sim" / "sensor_raw.fcm",
               "--method", "ls", "--truth", tmp_path / "sim" / "scene.fcm", "--out", tmp_path / "rec") == 0
    rep = fileio.read_json(tmp_path / "rec" / "report.json")
    assert rep["metrics"]["pearson"] >= 0.999


def test_analyze_small(tmp_path):
    assert run("analyze", "transparency", "--size", 31, "--gnuplot", "--out", tmp_path / "t") == 0
    rows = (tmp_path / "t" / "summary.csv").read_text().strip().splitlines()
    assert len(rows) == 5
    assert (tmp_path / "t" / "spectra.gp").exists()
    assert run("analyze", "separability", "--size", 8, "--out", tmp_path / "s") == 0
    assert len((tmp_path / "s" / "summary.csv").read_text().strip().splitlines()) == 5
    assert run("analyze", "pinhole-mls", "--size", 31, "--out", tmp_path / "p") == 0
    prov = fileio.read_json(tmp_path / "p" / "provenance.json")
    assert len(prov["reports"]) == 6
    assert run("analyze", "separability", "--size", 200, "--out", tmp_path / "x") == 2


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "flatcam.cli", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("flatcam")


def test_reconstruct_relative_tau(tmp_path):
    rng = np.random.default_rng(1)
    sysdir = tmp_path / "sys"
    sysdir.mkdir()
    phi = 1e4 * (np.eye(8) + 0.1 * rng.normal(size=(8, 8)))
    fileio.write_fcm(sysdir / "phi_l.fcm", phi)
    fileio.write_fcm(sysdir / "phi_r.fcm", phi)
    fileio.write_fcm(tmp_path / "y.fcm", rng.normal(size=(8, 8)))
    assert run("reconstruct", "--system", sysdir, "--sensor", tmp_path / "y.fcm",
               "--tau-rel", 1e-3, "--out", tmp_path / "a") == 0
    smax = np.linalg.svd(phi, compute_uv=False)[0]
    rep = fileio.read_json(tmp_path / "a" / "report.json")
    assert rep["tau"] == pytest.approx(1e-3 * smax ** 4)
    assert run("reconstruct", "--system", sysdir, "--sensor", tmp_path / "y.fcm",
               "--tau-rel", 1e-3, "--tau", 1, "--out", tmp_path / "b") == 2
