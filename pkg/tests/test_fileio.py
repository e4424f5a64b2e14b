import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from flatcam import fileio, seq
from flatcam.errors import ValidationError


def test_fcm_layout_is_bit_exact(tmp_path):
    a = np.array([[1.0, -2.5, 3.0], [0.0, 1e-300, np.pi]])
    path = tmp_path / "a.fcm"
    fileio.write_fcm(path, a)
    raw = path.read_bytes()
    assert raw[:4] == b"FCM1"
    assert struct.unpack("<II", raw[4:12]) == (2, 3)
    assert len(raw) == 12 + 6 * 8
    assert struct.unpack("<6d", raw[12:]) == tuple(a.ravel())
    assert np.array_equal(fileio.read_fcm(path), a)


@settings(max_examples=30, deadline=None)
@given(a=arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                elements=st.floats(allow_nan=False)))
def test_fcm_round_trip_is_lossless(tmp_path_factory, a):
    path = tmp_path_factory.mktemp("fcm") / "m.fcm"
    fileio.write_fcm(path, a)
    assert np.array_equal(fileio.read_fcm(path), a)


def test_fcm_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.fcm"
    bad.write_bytes(b"FCM2" + struct.pack("<II", 1, 1) + b"\0" * 8)
    with pytest.raises(ValidationError):
        fileio.read_fcm(bad)
    bad.write_bytes(b"FCM1" + struct.pack("<II", 2, 2) + b"\0" * 8)
    with pytest.raises(ValidationError):
        fileio.read_fcm(bad)


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip(tmp_path, binary):
    px = np.random.default_rng(0).integers(0, 256, size=(5, 7))
    path = tmp_path / "x.pgm"
    fileio.write_pgm(path, px, binary=binary)
    assert path.read_bytes()[:2] == (b"P5" if binary else b"P2")
    assert np.array_equal(fileio.read_pgm(path), px)


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# a comment\n3 2\n# another\n255\n0 1 2\n3 4 255\n")
    assert fileio.read_pgm(path).tolist() == [[0, 1, 2], [3, 4, 255]]
    with pytest.raises(ValidationError):
        fileio.write_pgm(tmp_path / "o.pgm", np.array([[300]]))


def test_mask_pgm_convention(tmp_path):
    m = seq.outer_mask([1, -1], [1, 1, -1])
    path = tmp_path / "m.pgm"
    fileio.write_mask_pgm(path, m)
    px = fileio.read_pgm(path)
    assert px.tolist() == [[255, 255, 0], [0, 0, 255]]
    assert np.array_equal(fileio.read_mask_pgm(path), seq.to_optical(m).transmittance)


def test_image_pgm_sidecar_restores_units(tmp_path):
    img = np.linspace(-3.0, 7.0, 256).reshape(16, 16)
    path = tmp_path / "img.pgm"
    fileio.write_image_pgm(path, img)
    assert (tmp_path / "img.pgm.csv").exists()
    back = fileio.read_image_pgm(path)
    assert np.abs(back - img).max() <= (10.0 / 255) / 2 + 1e-12


def test_csv_and_dispatch(tmp_path):
    a = np.random.default_rng(1).normal(size=(3, 4))
    for suffix in (".csv", ".fcm"):
        p = tmp_path / ("a" + suffix)
        fileio.write_matrix(p, a)
        assert np.array_equal(fileio.read_matrix(p), a)
    with pytest.raises(ValidationError):
        fileio.read_matrix(tmp_path / "a.txt")


def test_json_and_hash(tmp_path):
    fileio.write_json(tmp_path / "j.json", {"x": float("inf"), "y": np.float64(2.0), "z": float("nan")})
    back = fileio.read_json(tmp_path / "j.json")
    assert back == {"x": "inf", "y": 2.0, "z": None}
    assert fileio.config_hash({"a": 1, "b": 2}) == fileio.config_hash({"b": 2, "a": 1})
    assert fileio.config_hash({"a": 1}) != fileio.config_hash({"a": 2})
